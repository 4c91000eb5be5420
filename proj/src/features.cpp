#include "scout/features.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace scout {

CellRange cell_range(int i, int cells, int extent) {
    const auto first = static_cast<int>(static_cast<long long>(i) * extent / cells);
    auto last = static_cast<int>(static_cast<long long>(i + 1) * extent / cells);
    last = std::max(last, first + 1);
    return {std::min(first, extent - 1), std::min(last, extent)};
}

FeatureTensor cell_statistics(const Image& image, const BackboneConfig& config) {
    if (image.width <= 0 || image.height <= 0) {
        throw InvalidInput("image must have positive dimensions");
    }
    if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
        throw InvalidInput("image buffer size does not match its dimensions");
    }
    if (config.grid_width <= 0 || config.grid_height <= 0 || config.orientation_bins <= 0) {
        throw InvalidInput("backbone grid and histogram sizes must be positive");
    }

    const int w = image.width;
    const int h = image.height;

    // Grayscale in [0, 1] and its central-difference gradient (edges replicated).
    std::vector<double> gray(static_cast<std::size_t>(w) * h);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            gray[static_cast<std::size_t>(y) * w + x] =
                (0.299 * image.at(x, y, 0) + 0.587 * image.at(x, y, 1) + 0.114 * image.at(x, y, 2)) / 255.0;
        }
    }
    auto g = [&](int x, int y) {
        x = std::clamp(x, 0, w - 1);
        y = std::clamp(y, 0, h - 1);
        return gray[static_cast<std::size_t>(y) * w + x];
    };

    const int bins = config.orientation_bins;
    FeatureTensor out(BackboneConfig::kChannels, config.grid_width, config.grid_height);
    std::vector<double> hist(bins);

    for (int cy = 0; cy < config.grid_height; ++cy) {
        const auto ry = cell_range(cy, config.grid_height, h);
        for (int cx = 0; cx < config.grid_width; ++cx) {
            const auto rx = cell_range(cx, config.grid_width, w);

            double sum[3] = {0, 0, 0};
            double sum_sq[3] = {0, 0, 0};
            double grad_sum = 0.0;
            std::fill(hist.begin(), hist.end(), 0.0);

            for (int y = ry.first; y < ry.last; ++y) {
                for (int x = rx.first; x < rx.last; ++x) {
                    for (int ch = 0; ch < 3; ++ch) {
                        const double v = image.at(x, y, ch) / 255.0;
                        sum[ch] += v;
                        sum_sq[ch] += v * v;
                    }
                    const double gx = 0.5 * (g(x + 1, y) - g(x - 1, y));
                    const double gy = 0.5 * (g(x, y + 1) - g(x, y - 1));
                    const double mag = std::sqrt(gx * gx + gy * gy);
                    grad_sum += mag;
                    if (mag > 0.0) {
                        const double theta = std::atan2(gy, gx) + std::numbers::pi;
                        auto bin = static_cast<int>(theta / (2.0 * std::numbers::pi) * bins);
                        hist[std::clamp(bin, 0, bins - 1)] += mag;
                    }
                }
            }

            const double n = static_cast<double>(rx.last - rx.first) * (ry.last - ry.first);
            for (int ch = 0; ch < 3; ++ch) {
                const double mean = sum[ch] / n;
                const double var = std::max(0.0, sum_sq[ch] / n - mean * mean);
                out(kMeanR + ch, cy, cx) = mean;
                out(kStdR + ch, cy, cx) = std::sqrt(var);
            }
            out(kGradientMagnitude, cy, cx) = grad_sum / n;

            double entropy = 0.0;
            if (grad_sum > 0.0) {
                for (double mass : hist) {
                    if (mass > 0.0) {
                        const double p = mass / grad_sum;
                        entropy -= p * std::log(p);
                    }
                }
            }
            out(kOrientationEntropy, cy, cx) = entropy;
        }
    }
    return out;
}

FeatureTensor extract_features(const Image& image, const BackboneConfig& config) {
    FeatureTensor t = cell_statistics(image, config);
    for (int c = 0; c < t.channels(); ++c) {
        auto plane = t.plane(c);
        const double mean = plane.mean();
        const double stddev = std::sqrt((plane.array() - mean).square().mean());
        plane = (plane.array() - mean) / (stddev + config.epsilon);
    }
    return t;
}

} // namespace scout
