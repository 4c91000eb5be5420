#ifndef SCOUT_TENSOR_HPP
#define SCOUT_TENSOR_HPP

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include "scout/errors.hpp"

namespace scout {

/// Dense C x H x W tensor stored flat in (c, y, x) row-major order.
///
/// The flat storage is an Eigen column vector so whole-tensor reductions
/// (norms, dot products, blends) are plain Eigen expressions.
template <typename Scalar>
class Tensor3 {
public:
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    Tensor3() = default;

    Tensor3(int channels, int width, int height)
        : channels_(channels), width_(width), height_(height) {
        check_shape(channels, width, height);
        data_ = Vector::Zero(static_cast<Eigen::Index>(channels) * width * height);
    }

    Tensor3(int channels, int width, int height, Vector data)
        : channels_(channels), width_(width), height_(height), data_(std::move(data)) {
        check_shape(channels, width, height);
        if (data_.size() != static_cast<Eigen::Index>(channels) * width * height) {
            throw InvalidInput("tensor data length does not match C*W*H");
        }
        if (!data_.allFinite()) {
            throw InvalidInput("tensor data contains non-finite values");
        }
    }

    int channels() const { return channels_; }
    int width() const { return width_; }
    int height() const { return height_; }
    Eigen::Index size() const { return data_.size(); }
    Eigen::Index plane_size() const { return static_cast<Eigen::Index>(width_) * height_; }

    bool same_shape(const Tensor3& other) const {
        return channels_ == other.channels_ && width_ == other.width_ && height_ == other.height_;
    }

    Scalar& operator()(int c, int y, int x) { return data_[index(c, y, x)]; }
    Scalar operator()(int c, int y, int x) const { return data_[index(c, y, x)]; }

    const Vector& flat() const { return data_; }
    Vector& flat() { return data_; }

    /// H x W view of one channel (row = y).
    auto plane(int c) const {
        return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            data_.data() + c * plane_size(), height_, width_);
    }
    auto plane(int c) {
        return Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            data_.data() + c * plane_size(), height_, width_);
    }

    Eigen::Index index(int c, int y, int x) const {
        return (static_cast<Eigen::Index>(c) * height_ + y) * width_ + x;
    }

    friend bool operator==(const Tensor3& a, const Tensor3& b) {
        return a.same_shape(b) && a.data_ == b.data_;
    }

private:
    static void check_shape(int c, int w, int h) {
        if (c <= 0 || w <= 0 || h <= 0) {
            throw InvalidInput("tensor dimensions must be positive");
        }
    }

    int channels_ = 0;
    int width_ = 0;
    int height_ = 0;
    Vector data_;
};

using FeatureTensor = Tensor3<double>;

/// Circular spatial shift: result(c, y, x) = t(c, y - dy, x - dx) (indices mod H, W).
template <typename Scalar>
Tensor3<Scalar> roll(const Tensor3<Scalar>& t, int dy, int dx) {
    Tensor3<Scalar> out(t.channels(), t.width(), t.height());
    const int h = t.height();
    const int w = t.width();
    for (int c = 0; c < t.channels(); ++c) {
        for (int y = 0; y < h; ++y) {
            const int sy = ((y - dy) % h + h) % h;
            for (int x = 0; x < w; ++x) {
                const int sx = ((x - dx) % w + w) % w;
                out(c, y, x) = t(c, sy, sx);
            }
        }
    }
    return out;
}

/// Axis-aligned box in pixel coordinates.
struct Box {
    double x_min = 0.0;
    double y_min = 0.0;
    double x_max = 0.0;
    double y_max = 0.0;

    double width() const { return x_max - x_min; }
    double height() const { return y_max - y_min; }
    double area() const { return width() * height(); }

    bool valid() const {
        return std::isfinite(x_min) && std::isfinite(y_min) && std::isfinite(x_max) &&
               std::isfinite(y_max) && x_min >= 0.0 && y_min >= 0.0 && x_min < x_max &&
               y_min < y_max;
    }

    friend bool operator==(const Box&, const Box&) = default;
};

/// Pooled, L2-normalized region descriptor fed to the detection head.
struct ProposalFeature {
    Box box;
    Eigen::VectorXd vector;
};

// On-disk cache format: C, W, H as u32 LE then C*W*H f32 LE.
void write_tensor(const std::filesystem::path& path, const FeatureTensor& t);
FeatureTensor read_tensor(const std::filesystem::path& path);

} // namespace scout

#endif // SCOUT_TENSOR_HPP
