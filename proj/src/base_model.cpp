#include "scout/base_model.hpp"

#include <algorithm>
#include <random>

#include "scout/metrics.hpp"
#include "scout/synthetic.hpp"
#include "scout/training.hpp"

namespace scout {

namespace {

int index_of(const std::vector<std::string>& names, const std::string& name) {
    const auto it = std::find(names.begin(), names.end(), name);
    return it == names.end() ? -1 : static_cast<int>(it - names.begin());
}

std::vector<LabelledBox> truth_for(const FrameAnnotation& a, const std::vector<std::string>& names) {
    std::vector<LabelledBox> out;
    for (const auto& b : a.boxes) out.push_back({index_of(names, b.class_name), b.box});
    return out;
}

} // namespace

BaseModel build_base_model(const std::vector<LabelledImage>& images, const PipelineConfig& pipeline,
                           const BaseModelConfig& config) {
    std::vector<std::string> names;
    for (const auto& img : images) {
        for (const auto& b : img.annotation.boxes) {
            if (index_of(names, b.class_name) < 0) names.push_back(b.class_name);
        }
    }
    if (names.empty()) throw InvalidInput("base model needs at least one labelled box");

    std::mt19937_64 rng(config.seed);
    std::vector<TrainingSample> foreground;
    std::vector<int> shots(names.size(), 0);
    BaseModel model;
    for (const auto& img : images) {
        if (img.annotation.boxes.empty()) continue;
        const FrameAnalysis frame = analyze_frame(img.image, pipeline);
        const auto truth = truth_for(img.annotation, names);
        const auto samples = harvest_samples(frame, truth, config.harvest, rng, pipeline);
        for (const auto& s : samples) {
            if (s.class_id != kBackground) foreground.push_back(s);
        }
        const bool needed = std::any_of(truth.begin(), truth.end(), [&](const LabelledBox& t) {
            return shots[static_cast<std::size_t>(t.class_id)] < config.shots_per_class;
        });
        if (!needed) continue;
        for (const auto& t : truth) ++shots[static_cast<std::size_t>(t.class_id)];
        model.pool.insert(model.pool.end(), samples.begin(), samples.end());
    }
    model.head = init_head(names, foreground, pipeline.dimension(), config.alpha, config.seed);
    return model;
}

FewShotOutcome run_fewshot_trial(const FewShotTrial& trial) {
    const PipelineConfig& pc = trial.pipeline;
    const auto base_scenes = make_base_set(trial.base_images, trial.seed * 100 + 1);
    BaseModel base = build_base_model(base_scenes, pc, BaseModelConfig{trial.shots, {}, 20.0, trial.seed});

    SamplePool pool;
    pool.base = std::move(base.pool);
    pool.novel_ratio = trial.novel_ratio;
    pool.shots_per_class = trial.shots;
    HeadParams head = std::move(base.head);

    std::mt19937_64 scene_rng(trial.seed * 100 + 2);
    const auto& novel = novel_shape_classes();
    for (int i = 0; i < trial.shots * static_cast<int>(novel.size()); ++i) {
        const ShapeClass& cls = novel[static_cast<std::size_t>(i) % novel.size()];
        const auto scene = make_object_scene("shot_" + std::to_string(i), {&cls}, scene_rng);
        const FrameAnalysis frame = analyze_frame(scene.image, pc);
        const Box& box = scene.annotation.boxes.front().box;
        NovelShot shot;
        shot.box = box;
        shot.pooled = pool_box(frame, box, pc);
        shot.source_frame_id = scene.annotation.frame;
        std::tie(head, shot.class_id) = register_novel_class(head, cls.name, shot.pooled.vector);
        pool.novel.push_back(std::move(shot));
    }

    FineTuneConfig ft;
    ft.step_budget = trial.steps;
    std::mt19937_64 train_rng(trial.seed);
    const HeadParams tuned = fine_tune(head, pool, ft, train_rng);

    std::vector<ShapeClass> all = base_shape_classes();
    all.insert(all.end(), novel.begin(), novel.end());
    const auto eval = make_labelled_set(all, trial.eval_images, trial.seed * 100 + 3, "eval");
    std::vector<Detection> dets;
    std::vector<GroundTruth> gts;
    for (const auto& scene : eval) {
        const FrameAnalysis frame = analyze_frame(scene.image, pc);
        const auto d = to_detections(scene.annotation.frame, detect(tuned, frame.proposals, frame.dims, pc.detect));
        dets.insert(dets.end(), d.begin(), d.end());
        for (const auto& b : scene.annotation.boxes) {
            gts.push_back({scene.annotation.frame, b.box, tuned.find_class(b.class_name)});
        }
    }
    std::vector<int> classes(static_cast<std::size_t>(tuned.classes()));
    for (int c = 0; c < tuned.classes(); ++c) classes[static_cast<std::size_t>(c)] = c;
    const MapResult all_map = coco_map(dets, gts, classes);
    std::vector<int> novel_ids(classes.begin() + tuned.base_count, classes.end());
    const MapResult novel_map = coco_map(dets, gts, novel_ids);

    FewShotOutcome out;
    out.map = all_map.mean;
    out.novel_map = novel_map.mean;
    for (const auto& [c, ap] : all_map.per_class) out.per_class[tuned.class_names[static_cast<std::size_t>(c)]] = ap;
    return out;
}

} // namespace scout
