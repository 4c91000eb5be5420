#ifndef SCOUT_TRAINING_HPP
#define SCOUT_TRAINING_HPP

#include <atomic>
#include <chrono>
#include <cstdint>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "scout/head.hpp"

namespace scout {

/// An operator-annotated example of a novel class.
struct NovelShot {
    int class_id = 0;
    std::string image_ref;
    Box box;
    ProposalFeature pooled;
    std::string source_frame_id;

    TrainingSample sample() const { return {pooled.vector, class_id, Eigen::Vector4d::Zero()}; }
};

/// Fine-tuning pool. Base samples appear once in the virtual pool; each
/// novel shot appears `novel_ratio` times.
struct SamplePool {
    std::vector<TrainingSample> base;
    std::vector<NovelShot> novel;
    int novel_ratio = 1;
    int shots_per_class = 1;

    std::size_t virtual_size() const { return base.size() + static_cast<std::size_t>(novel_ratio) * novel.size(); }
    bool empty() const { return base.empty() && novel.empty(); }
};

/// Which pool entry a virtual slot resolves to.
struct PoolSlot {
    bool novel = false;
    std::size_t index = 0;
};

PoolSlot resolve_slot(const SamplePool& pool, std::size_t virtual_index);

/// Draws m distinct virtual slots uniformly without replacement.
std::vector<PoolSlot> sample_slots(const SamplePool& pool, std::size_t m, std::mt19937_64& rng);
std::vector<TrainingSample> sample_minibatch(const SamplePool& pool, std::size_t m, std::mt19937_64& rng);

/// Number of distinct minibatches of size m: C(virtual_size, m).
double minibatch_combinations(const SamplePool& pool, std::size_t m);

struct FineTuneConfig {
    double learning_rate = 0.01;
    double momentum = 0.9;
    std::size_t batch_size = 16;
    std::optional<std::size_t> step_budget;
    std::optional<std::chrono::milliseconds> time_budget;
};

class TrainingDiverged : public Error {
public:
    using Error::Error;
};

/// SGD with momentum over the trainable head entries. Snapshots can be
/// requested from another thread; they are taken between steps.
class FineTuner {
public:
    explicit FineTuner(FineTuneConfig config) : config_(config) {}

    /// Runs until the step or time budget is spent. Returns the input
    /// unchanged when no step ran; otherwise version + 1.
    HeadParams run(const HeadParams& start, const SamplePool& pool, std::mt19937_64& rng);

    void request_snapshot() { snapshot_requested_.store(true); }
    std::optional<HeadParams> take_snapshot();

    std::size_t steps_taken() const { return steps_; }
    double last_loss() const { return last_loss_; }

private:
    FineTuneConfig config_;
    std::atomic<bool> snapshot_requested_{false};
    std::mutex snapshot_mutex_;
    std::optional<HeadParams> snapshot_;
    std::size_t steps_ = 0;
    double last_loss_ = 0.0;
};

HeadParams fine_tune(const HeadParams& p, const SamplePool& pool, const FineTuneConfig& config,
                     std::mt19937_64& rng);

} // namespace scout

#endif // SCOUT_TRAINING_HPP
