#ifndef SCOUT_SIMILARITY_HPP
#define SCOUT_SIMILARITY_HPP

#include <Eigen/Core>

#include <algorithm>

#include "scout/tensor.hpp"

namespace scout {

/// Norms below this are treated as zero vectors; similarity to them is 0.
inline constexpr double kNormGuard = 1e-12;

template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar cosine_sim(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
    using Scalar = typename DerivedA::Scalar;
    if (a.size() != b.size()) throw InvalidInput("cosine_sim: length mismatch");
    const Scalar na = a.norm();
    const Scalar nb = b.norm();
    if (na < kNormGuard || nb < kNormGuard) return Scalar(0);
    const Scalar s = a.dot(b) / (na * nb);
    return std::clamp(s, Scalar(-1), Scalar(1));
}

struct Shift {
    int dy = 0;
    int dx = 0;
    friend bool operator==(const Shift&, const Shift&) = default;
};

struct ShiftSimilarity {
    double similarity = 0.0;
    /// Displacement of `m` relative to `x`: m is closest to roll(x, dy, dx).
    Shift shift;
};

/// Cross-correlation of x against every circular shift of m, summed over
/// channels: result(k) = <x, roll(m, k)>, computed in the Fourier domain.
/// Returned as an H x W row-major matrix indexed by (ky, kx).
Eigen::MatrixXd circular_cross_correlation(const FeatureTensor& x, const FeatureTensor& m);

/// Maximum cosine similarity between x and all circular translations of m.
/// The denominator uses the global norms, which every circular shift preserves.
/// Ties go to the lexicographically smallest (dy, dx).
ShiftSimilarity max_shift_sim(const FeatureTensor& x, const FeatureTensor& m);

} // namespace scout

#endif // SCOUT_SIMILARITY_HPP
