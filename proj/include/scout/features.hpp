#ifndef SCOUT_FEATURES_HPP
#define SCOUT_FEATURES_HPP

#include "scout/image.hpp"
#include "scout/tensor.hpp"

namespace scout {

/// Patch-statistics backbone. Every grid cell yields eight statistics:
/// RGB means, RGB standard deviations, mean gradient magnitude and the
/// entropy of the magnitude-weighted gradient orientation histogram.
struct BackboneConfig {
    static constexpr int kChannels = 8;
    int grid_width = 16;
    int grid_height = 16;
    int orientation_bins = 8;
    double epsilon = 1e-8;
};

enum FeatureChannel : int {
    kMeanR = 0,
    kMeanG,
    kMeanB,
    kStdR,
    kStdG,
    kStdB,
    kGradientMagnitude,
    kOrientationEntropy,
};

/// Cell i along an axis of `extent` pixels split into `cells` covers
/// [first, last). Cells never come out empty, even for tiny images.
struct CellRange {
    int first;
    int last;
};
CellRange cell_range(int i, int cells, int extent);

/// Raw per-cell statistics before standardization.
FeatureTensor cell_statistics(const Image& image, const BackboneConfig& config = {});

/// Per-cell statistics, each channel standardized to zero mean and unit
/// variance over the grid. Pure function of the pixel values.
FeatureTensor extract_features(const Image& image, const BackboneConfig& config = {});

} // namespace scout

#endif // SCOUT_FEATURES_HPP
