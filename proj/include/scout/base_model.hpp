#ifndef SCOUT_BASE_MODEL_HPP
#define SCOUT_BASE_MODEL_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "scout/dataset.hpp"
#include "scout/head.hpp"
#include "scout/pipeline.hpp"

namespace scout {

struct BaseModelConfig {
    int shots_per_class = 3;
    HarvestConfig harvest;
    double alpha = 20.0;
    std::uint64_t seed = 7;
};

/// The pretrained starting point shared by robot and station: a head whose
/// class rows are the mean pooled features of every labelled base box, and
/// the K-shot base pool that fine-tuning mixes with the novel shots.
struct BaseModel {
    HeadParams head;
    std::vector<TrainingSample> pool;
};

/// Classes are named in order of first appearance. Throws InvalidInput when
/// no image carries a box.
BaseModel build_base_model(const std::vector<LabelledImage>& images, const PipelineConfig& pipeline = {},
                           const BaseModelConfig& config = {});

struct FewShotTrial {
    std::uint64_t seed = 1;
    int novel_ratio = 1;
    int shots = 3;
    std::size_t steps = 500;
    int base_images = 30;
    int eval_images = 40;
    PipelineConfig pipeline;
};

struct FewShotOutcome {
    double map = 0.0;       // over every class in the evaluation set
    double novel_map = 0.0; // over the novel classes only
    std::map<std::string, double> per_class;
};

/// Synthetic few-shot run: base model from fresh base scenes, K shots of
/// each novel class, fine-tuning with novel reuse ratio r, COCO-style mAP on
/// held-out scenes of all classes.
FewShotOutcome run_fewshot_trial(const FewShotTrial& trial);

} // namespace scout

#endif // SCOUT_BASE_MODEL_HPP
