#include "scout/pipeline.hpp"

#include <algorithm>

namespace scout {

FrameAnalysis analyze_frame(const Image& image, const PipelineConfig& config) {
    FrameAnalysis out{extract_features(image, config.backbone), ImageDims{image.width, image.height}, {}};
    const auto boxes = generate_proposals(out.dims, config.anchors);
    out.proposals.reserve(boxes.size());
    for (const auto& b : boxes) out.proposals.push_back(roi_pool(out.features, b, out.dims, config.roi_grid));
    return out;
}

ProposalFeature pool_box(const FrameAnalysis& frame, const Box& box, const PipelineConfig& config) {
    return roi_pool(frame.features, box, frame.dims, config.roi_grid);
}

std::vector<TrainingSample> harvest_samples(const FrameAnalysis& frame, const std::vector<LabelledBox>& truth,
                                            const HarvestConfig& config, std::mt19937_64& rng,
                                            const PipelineConfig& pipeline) {
    std::vector<TrainingSample> out;
    std::vector<std::size_t> background;
    std::vector<std::vector<std::size_t>> foreground(truth.size());

    for (std::size_t i = 0; i < frame.proposals.size(); ++i) {
        const Box& p = frame.proposals[i].box;
        double best = 0.0;
        std::size_t best_gt = 0;
        for (std::size_t g = 0; g < truth.size(); ++g) {
            const double o = iou(p, truth[g].box);
            if (o > best) {
                best = o;
                best_gt = g;
            }
        }
        if (best >= config.foreground_iou) {
            foreground[best_gt].push_back(i);
        } else if (best < config.background_iou) {
            background.push_back(i);
        }
    }

    for (std::size_t g = 0; g < truth.size(); ++g) {
        const auto gt_feature = pool_box(frame, truth[g].box, pipeline);
        out.push_back({gt_feature.vector, truth[g].class_id, Eigen::Vector4d::Zero()});
        auto& fg = foreground[g];
        std::shuffle(fg.begin(), fg.end(), rng);
        fg.resize(std::min(fg.size(), config.max_foreground));
        for (std::size_t i : fg) {
            const auto& prop = frame.proposals[i];
            out.push_back({prop.vector, truth[g].class_id, encode_box_delta(prop.box, truth[g].box)});
        }
    }
    std::shuffle(background.begin(), background.end(), rng);
    background.resize(std::min(background.size(), config.max_background));
    for (std::size_t i : background) {
        out.push_back({frame.proposals[i].vector, kBackground, Eigen::Vector4d::Zero()});
    }
    return out;
}

std::vector<Detection> to_detections(const std::string& frame_id, const std::vector<Detection2D>& dets) {
    std::vector<Detection> out;
    out.reserve(dets.size());
    for (const auto& d : dets) out.push_back({frame_id, d.box, d.class_id, d.score});
    return out;
}

} // namespace scout
