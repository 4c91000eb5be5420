#include "scout/similarity.hpp"

#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

namespace scout {

namespace {

using ComplexPlane = Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Separable 2-D transform: rows, then columns.
void fft2(Eigen::FFT<double>& fft, ComplexPlane& plane, bool inverse) {
    Eigen::VectorXcd out;
    auto transform = [&](const Eigen::VectorXcd& in) {
        // A length-1 transform is the identity, and kissfft crashes on it.
        if (in.size() < 2) {
            out = in;
        } else if (inverse) {
            fft.inv(out, in);
        } else {
            fft.fwd(out, in);
        }
    };
    for (Eigen::Index r = 0; r < plane.rows(); ++r) {
        transform(plane.row(r).transpose());
        plane.row(r) = out.transpose();
    }
    for (Eigen::Index c = 0; c < plane.cols(); ++c) {
        transform(plane.col(c));
        plane.col(c) = out;
    }
}

} // namespace

Eigen::MatrixXd circular_cross_correlation(const FeatureTensor& x, const FeatureTensor& m) {
    if (!x.same_shape(m)) throw InvalidInput("max_shift_sim: tensor shapes differ");

    const int h = x.height();
    const int w = x.width();
    Eigen::FFT<double> fft;
    ComplexPlane acc = ComplexPlane::Zero(h, w);
    for (int c = 0; c < x.channels(); ++c) {
        ComplexPlane fx = x.plane(c).cast<std::complex<double>>();
        ComplexPlane fm = m.plane(c).cast<std::complex<double>>();
        fft2(fft, fx, false);
        fft2(fft, fm, false);
        acc.array() += fx.array() * fm.array().conjugate();
    }
    fft2(fft, acc, true);
    return acc.real();
}

ShiftSimilarity max_shift_sim(const FeatureTensor& x, const FeatureTensor& m) {
    const Eigen::MatrixXd corr = circular_cross_correlation(x, m);
    const double nx = x.flat().norm();
    const double nm = m.flat().norm();
    if (nx < kNormGuard || nm < kNormGuard) return {0.0, {0, 0}};

    const int h = x.height();
    const int w = x.width();
    // corr(k) = <x, roll(m, k)>; m ~ roll(x, d) aligns at k = -d.
    constexpr double kTieTolerance = 1e-12;
    ShiftSimilarity best{-2.0, {0, 0}};
    for (int dy = 0; dy < h; ++dy) {
        for (int dx = 0; dx < w; ++dx) {
            const double s = corr((h - dy) % h, (w - dx) % w) / (nx * nm);
            if (s > best.similarity + kTieTolerance) best = {s, {dy, dx}};
        }
    }
    best.similarity = std::clamp(best.similarity, -1.0, 1.0);
    return best;
}

} // namespace scout
