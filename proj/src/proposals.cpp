#include "scout/proposals.hpp"

#include <algorithm>
#include <cmath>

#include "scout/similarity.hpp"

namespace scout {

Box clip_box(const Box& box, ImageDims dims) {
    if (!std::isfinite(box.x_min) || !std::isfinite(box.y_min) || !std::isfinite(box.x_max) ||
        !std::isfinite(box.y_max)) {
        throw InvalidInput("box coordinates must be finite");
    }
    const double w = dims.width;
    const double h = dims.height;
    Box out{std::clamp(box.x_min, 0.0, w), std::clamp(box.y_min, 0.0, h), std::clamp(box.x_max, 0.0, w),
            std::clamp(box.y_max, 0.0, h)};
    if (!(out.x_min < out.x_max && out.y_min < out.y_max)) {
        throw InvalidInput("box has zero area inside the image");
    }
    return out;
}

std::vector<Box> generate_proposals(ImageDims dims, const AnchorConfig& config) {
    std::vector<Box> boxes;
    if (dims.width <= 0 || dims.height <= 0) return boxes;

    const double base = std::min(dims.width, dims.height);
    const double stride = config.stride_fraction * base;
    if (!(stride > 0.0)) throw InvalidInput("anchor stride must be positive");

    for (double cy = stride / 2.0; cy < dims.height; cy += stride) {
        for (double cx = stride / 2.0; cx < dims.width; cx += stride) {
            for (double scale : config.scales) {
                for (double ratio : config.aspect_ratios) {
                    const double side = scale * base;
                    const double bw = side / std::sqrt(ratio);
                    const double bh = side * std::sqrt(ratio);
                    const Box raw{cx - bw / 2.0, cy - bh / 2.0, cx + bw / 2.0, cy + bh / 2.0};
                    Box clipped;
                    try {
                        clipped = clip_box(raw, dims);
                    } catch (const InvalidInput&) {
                        continue;
                    }
                    if (std::find(boxes.begin(), boxes.end(), clipped) == boxes.end()) {
                        boxes.push_back(clipped);
                    }
                }
            }
        }
    }
    return boxes;
}

ProposalFeature roi_pool(const FeatureTensor& t, const Box& box, ImageDims dims, int grid) {
    if (grid < 1) throw InvalidInput("roi_pool: grid size must be >= 1");
    if (dims.width <= 0 || dims.height <= 0) throw InvalidInput("roi_pool: image dims must be positive");
    const Box clipped = clip_box(box, dims);

    const double sx = static_cast<double>(t.width()) / dims.width;
    const double sy = static_cast<double>(t.height()) / dims.height;
    const double x0 = clipped.x_min * sx;
    const double y0 = clipped.y_min * sy;
    const double cell_w = (clipped.x_max - clipped.x_min) * sx / grid;
    const double cell_h = (clipped.y_max - clipped.y_min) * sy / grid;

    Eigen::VectorXd v = Eigen::VectorXd::Zero(pooled_dimension(t.channels(), grid));
    for (int gy = 0; gy < grid; ++gy) {
        const double ya = y0 + gy * cell_h;
        const double yb = ya + cell_h;
        for (int gx = 0; gx < grid; ++gx) {
            const double xa = x0 + gx * cell_w;
            const double xb = xa + cell_w;

            double weight_sum = 0.0;
            Eigen::VectorXd acc = Eigen::VectorXd::Zero(t.channels());
            const int ty_end = std::min(t.height(), static_cast<int>(std::ceil(yb)));
            const int tx_end = std::min(t.width(), static_cast<int>(std::ceil(xb)));
            for (int ty = static_cast<int>(std::floor(ya)); ty < ty_end; ++ty) {
                const double oy = std::min(yb, ty + 1.0) - std::max(ya, static_cast<double>(ty));
                if (oy <= 0.0) continue;
                for (int tx = static_cast<int>(std::floor(xa)); tx < tx_end; ++tx) {
                    const double ox = std::min(xb, tx + 1.0) - std::max(xa, static_cast<double>(tx));
                    if (ox <= 0.0) continue;
                    const double wgt = ox * oy;
                    weight_sum += wgt;
                    for (int c = 0; c < t.channels(); ++c) acc[c] += wgt * t(c, ty, tx);
                }
            }
            if (weight_sum > 0.0) acc /= weight_sum;
            for (int c = 0; c < t.channels(); ++c) v[(c * grid + gy) * grid + gx] = acc[c];
        }
    }
    const double n = v.norm();
    if (n >= kNormGuard) v /= n;
    return {clipped, std::move(v)};
}

} // namespace scout
