#include "scout/training.hpp"

#include <algorithm>
#include <cmath>

namespace scout {

PoolSlot resolve_slot(const SamplePool& pool, std::size_t virtual_index) {
    if (virtual_index < pool.base.size()) return {false, virtual_index};
    const std::size_t k = virtual_index - pool.base.size();
    if (k >= static_cast<std::size_t>(pool.novel_ratio) * pool.novel.size()) {
        throw InvalidInput("virtual slot out of range");
    }
    return {true, k / static_cast<std::size_t>(pool.novel_ratio)};
}

std::vector<PoolSlot> sample_slots(const SamplePool& pool, std::size_t m, std::mt19937_64& rng) {
    if (pool.novel_ratio < 1) throw InvalidInput("novel ratio must be >= 1");
    if (m < 1) throw InvalidInput("batch size must be >= 1");
    const std::size_t total = pool.virtual_size();
    if (total < m) throw InvalidInput("virtual pool is smaller than the batch size");

    // Floyd's algorithm: m distinct indices from [0, total).
    std::vector<std::size_t> chosen;
    chosen.reserve(m);
    for (std::size_t j = total - m; j < total; ++j) {
        const std::size_t t = std::uniform_int_distribution<std::size_t>(0, j)(rng);
        if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
            chosen.push_back(t);
        } else {
            chosen.push_back(j);
        }
    }
    std::vector<PoolSlot> slots;
    slots.reserve(m);
    for (std::size_t v : chosen) slots.push_back(resolve_slot(pool, v));
    return slots;
}

std::vector<TrainingSample> sample_minibatch(const SamplePool& pool, std::size_t m, std::mt19937_64& rng) {
    std::vector<TrainingSample> batch;
    for (const auto& slot : sample_slots(pool, m, rng)) {
        batch.push_back(slot.novel ? pool.novel[slot.index].sample() : pool.base[slot.index]);
    }
    return batch;
}

double minibatch_combinations(const SamplePool& pool, std::size_t m) {
    const std::size_t n = pool.virtual_size();
    if (m > n) return 0.0;
    double c = 1.0;
    for (std::size_t i = 1; i <= m; ++i) c = c * static_cast<double>(n - m + i) / static_cast<double>(i);
    return std::round(c);
}

std::optional<HeadParams> FineTuner::take_snapshot() {
    std::lock_guard lock(snapshot_mutex_);
    auto out = std::move(snapshot_);
    snapshot_.reset();
    return out;
}

HeadParams FineTuner::run(const HeadParams& start, const SamplePool& pool, std::mt19937_64& rng) {
    steps_ = 0;
    if (pool.empty() || start.empty()) return start;
    const std::size_t batch = std::min(config_.batch_size, pool.virtual_size());
    if (config_.step_budget && *config_.step_budget == 0) return start;

    HeadParams p = start;
    Eigen::MatrixXd vel_class = Eigen::MatrixXd::Zero(p.class_weights.rows(), p.class_weights.cols());
    Eigen::MatrixXd vel_box = Eigen::MatrixXd::Zero(p.box_weights.rows(), p.box_weights.cols());
    Eigen::VectorXd vel_bias = Eigen::VectorXd::Zero(p.box_bias.size());
    std::uint64_t version = start.version;

    const auto t0 = std::chrono::steady_clock::now();
    auto budget_left = [&] {
        if (config_.step_budget && steps_ >= *config_.step_budget) return false;
        if (config_.time_budget && std::chrono::steady_clock::now() - t0 >= *config_.time_budget) return false;
        return config_.step_budget.has_value() || config_.time_budget.has_value();
    };

    while (budget_left()) {
        const auto samples = sample_minibatch(pool, batch, rng);
        const LossAndGrad lg = loss_and_grad(p, samples);
        if (!std::isfinite(lg.loss)) throw TrainingDiverged("non-finite loss during fine-tuning");
        last_loss_ = lg.loss;

        vel_class = config_.momentum * vel_class + lg.grad.class_weights;
        vel_box = config_.momentum * vel_box + lg.grad.box_weights;
        vel_bias = config_.momentum * vel_bias + lg.grad.box_bias;
        p.class_weights -= config_.learning_rate * vel_class;
        p.box_weights -= config_.learning_rate * vel_box;
        p.box_bias -= config_.learning_rate * vel_bias;
        ++steps_;

        if (snapshot_requested_.exchange(false)) {
            HeadParams snap = p;
            snap.version = ++version;
            round_to_wire_precision(snap);
            std::lock_guard lock(snapshot_mutex_);
            snapshot_ = std::move(snap);
        }
    }
    if (steps_ == 0) return start;
    if (!p.class_weights.allFinite() || !p.box_weights.allFinite() || !p.box_bias.allFinite()) {
        throw TrainingDiverged("non-finite parameters after fine-tuning");
    }
    p.version = ++version;
    round_to_wire_precision(p);
    return p;
}

HeadParams fine_tune(const HeadParams& p, const SamplePool& pool, const FineTuneConfig& config,
                     std::mt19937_64& rng) {
    FineTuner tuner(config);
    return tuner.run(p, pool, rng);
}

} // namespace scout
