#ifndef SCOUT_PIPELINE_HPP
#define SCOUT_PIPELINE_HPP

#include <random>
#include <string>
#include <vector>

#include "scout/features.hpp"
#include "scout/head.hpp"
#include "scout/image.hpp"
#include "scout/metrics.hpp"
#include "scout/proposals.hpp"

namespace scout {

/// Settings shared by robot and station so both sides pool identical
/// features from the same image.
struct PipelineConfig {
    BackboneConfig backbone;
    AnchorConfig anchors;
    int roi_grid = 4;
    DetectConfig detect;

    int dimension() const { return pooled_dimension(BackboneConfig::kChannels, roi_grid); }
};

struct FrameAnalysis {
    FeatureTensor features;
    ImageDims dims;
    std::vector<ProposalFeature> proposals;
};

FrameAnalysis analyze_frame(const Image& image, const PipelineConfig& config = {});

/// Pooled feature for an arbitrary (e.g. operator-drawn) box.
ProposalFeature pool_box(const FrameAnalysis& frame, const Box& box, const PipelineConfig& config = {});

struct LabelledBox {
    int class_id = 0;
    Box box;
};

struct HarvestConfig {
    double foreground_iou = 0.5;
    double background_iou = 0.3;
    std::size_t max_foreground = 8;  // per ground-truth box
    std::size_t max_background = 8;  // per image
};

/// Training samples from one annotated image: each ground-truth box itself,
/// proposals overlapping it (with box regression targets), and a random
/// subset of proposals far from every box labelled background.
std::vector<TrainingSample> harvest_samples(const FrameAnalysis& frame, const std::vector<LabelledBox>& truth,
                                            const HarvestConfig& config, std::mt19937_64& rng,
                                            const PipelineConfig& pipeline = {});

/// Converts head detections on one frame to the evaluation form.
std::vector<Detection> to_detections(const std::string& frame_id, const std::vector<Detection2D>& dets);

} // namespace scout

#endif // SCOUT_PIPELINE_HPP
