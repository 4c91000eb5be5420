#ifndef SCOUT_PROPOSALS_HPP
#define SCOUT_PROPOSALS_HPP

#include <vector>

#include "scout/tensor.hpp"

namespace scout {

struct ImageDims {
    int width = 0;
    int height = 0;
};

/// Deterministic anchor grid standing in for a learned proposal network.
struct AnchorConfig {
    std::vector<double> scales{0.25, 0.5, 0.75}; // fraction of min(width, height)
    std::vector<double> aspect_ratios{0.5, 1.0, 2.0}; // height / width
    double stride_fraction = 1.0 / 8.0; // fraction of min(width, height)
};

/// Anchors centred at stride/2 + k*stride on both axes, enumerated by
/// (centre y, centre x, scale, ratio), clipped to the image. Boxes that
/// collapse or duplicate an earlier box after clipping are dropped.
std::vector<Box> generate_proposals(ImageDims dims, const AnchorConfig& config = {});

/// Clips a box to [0, w] x [0, h]. Throws InvalidInput if nothing is left.
Box clip_box(const Box& box, ImageDims dims);

/// Area-weighted average pooling of the box region into P x P sub-cells per
/// channel, concatenated channel-major and L2-normalized.
ProposalFeature roi_pool(const FeatureTensor& t, const Box& box, ImageDims dims, int grid);

inline int pooled_dimension(int channels, int grid) { return channels * grid * grid; }

} // namespace scout

#endif // SCOUT_PROPOSALS_HPP
