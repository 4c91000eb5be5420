#include "doctest.h"

#include <functional>

#include "scout/head.hpp"
#include "scout/training.hpp"

using namespace scout;

namespace {

Eigen::VectorXd unit_vector(int d, int k) {
    Eigen::VectorXd v = Eigen::VectorXd::Zero(d);
    v[k] = 1.0;
    return v;
}

NovelShot shot(int class_id, const Eigen::VectorXd& f) {
    NovelShot s;
    s.class_id = class_id;
    s.pooled.vector = f;
    s.box = Box{0, 0, 8, 8};
    return s;
}

SamplePool counted_pool(std::size_t base, std::size_t novel, int r) {
    SamplePool pool;
    pool.novel_ratio = r;
    for (std::size_t i = 0; i < base; ++i) pool.base.push_back({unit_vector(4, 0), 0, {}});
    for (std::size_t i = 0; i < novel; ++i) pool.novel.push_back(shot(1, unit_vector(4, 1)));
    return pool;
}

double novel_rate(const SamplePool& pool, int draws, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    int novel = 0;
    for (int i = 0; i < draws; ++i) novel += sample_slots(pool, 1, rng)[0].novel ? 1 : 0;
    return static_cast<double>(novel) / draws;
}

std::size_t hash_bytes(const void* data, std::size_t n, std::size_t h) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) h = (h ^ p[i]) * 1099511628211ULL;
    return h;
}

// FNV-1a over everything fine-tuning must leave untouched.
std::size_t frozen_state_hash(const HeadParams& p, const SamplePool& pool) {
    std::size_t h = 1469598103934665603ULL;
    h = hash_bytes(&p.alpha, sizeof p.alpha, h);
    h = hash_bytes(&p.base_count, sizeof p.base_count, h);
    for (const auto& n : p.class_names) h = hash_bytes(n.data(), n.size(), h);
    for (const auto& s : pool.base) {
        h = hash_bytes(s.feature.data(), sizeof(double) * s.feature.size(), h);
        h = hash_bytes(&s.class_id, sizeof s.class_id, h);
        h = hash_bytes(s.box_target.data(), sizeof(double) * 4, h);
    }
    for (const auto& s : pool.novel) {
        h = hash_bytes(s.pooled.vector.data(), sizeof(double) * s.pooled.vector.size(), h);
        h = hash_bytes(&s.class_id, sizeof s.class_id, h);
    }
    return h;
}

struct Separable {
    HeadParams head;
    SamplePool pool;
};

// Two classes split by the sign of the first coordinate, with the class rows
// deliberately swapped so the starting head gets every sample wrong.
Separable separable_problem(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 0.3);
    const int d = 6;
    Separable s;
    for (int i = 0; i < 40; ++i) {
        const int cls = i % 2;
        Eigen::VectorXd f(d);
        for (int k = 0; k < d; ++k) f[k] = g(rng);
        f[0] = (cls == 0 ? 1.0 : -1.0) * (0.5 + std::abs(g(rng)));
        s.pool.base.push_back({f.normalized(), cls, Eigen::Vector4d::Zero()});
    }
    s.head = init_head({"left", "right"}, s.pool.base, d, 20.0, seed);
    s.head.class_weights.row(0).swap(s.head.class_weights.row(1));
    return s;
}

double accuracy(const HeadParams& p, const std::vector<TrainingSample>& samples) {
    int correct = 0;
    for (const auto& s : samples) {
        Eigen::Index best = 0;
        forward(p, s.feature).class_scores.maxCoeff(&best);
        correct += (p.row_of(s.class_id) == best) ? 1 : 0;
    }
    return static_cast<double>(correct) / static_cast<double>(samples.size());
}

} // namespace

TEST_CASE("sampler: two base slots and one novel shot repeated three times") {
    const SamplePool pool = counted_pool(2, 1, 3);
    CHECK(pool.virtual_size() == 5);
    CHECK(std::abs(novel_rate(pool, 100000, 1) - 0.6) <= 0.01);
}

TEST_CASE("sampler: r = 1 with equal counts draws novel half the time") {
    CHECK(std::abs(novel_rate(counted_pool(3, 3, 1), 100000, 2) - 0.5) <= 0.01);
}

TEST_CASE("sampler: single base and novel shot admit exactly one pair") {
    const SamplePool pool = counted_pool(1, 1, 1);
    CHECK(minibatch_combinations(pool, 2) == 1.0);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 20; ++i) {
        const auto slots = sample_slots(pool, 2, rng);
        REQUIRE(slots.size() == 2);
        CHECK(slots[0].novel != slots[1].novel);
    }
}

TEST_CASE("sampler: slots are distinct and a novel shot appears at most r times") {
    const SamplePool pool = counted_pool(4, 2, 3);
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 500; ++trial) {
        const auto slots = sample_slots(pool, 10, rng);
        int per_novel[2] = {0, 0};
        for (const auto& s : slots)
            if (s.novel) ++per_novel[s.index];
        CHECK(per_novel[0] <= 3);
        CHECK(per_novel[1] <= 3);
    }
    // The whole virtual pool is one batch: every slot appears exactly once.
    const auto all = sample_slots(pool, 10, rng);
    int base = 0, novel = 0;
    for (const auto& s : all) (s.novel ? novel : base)++;
    CHECK(base == 4);
    CHECK(novel == 6);
}

TEST_CASE("sampler: novel frequency tracks r for r in {1, 2, 3}") {
    for (int r : {1, 2, 3}) {
        const SamplePool pool = counted_pool(6, 2, r);
        const double expect = r * 2.0 / (6.0 + r * 2.0);
        CHECK(std::abs(novel_rate(pool, 100000, 10 + r) - expect) <= 0.01);
    }
}

TEST_CASE("sampler errors") {
    std::mt19937_64 rng(5);
    CHECK_THROWS_AS(sample_minibatch(counted_pool(1, 0, 1), 2, rng), InvalidInput);
    CHECK_THROWS_AS(sample_minibatch(counted_pool(3, 0, 1), 0, rng), InvalidInput);
    CHECK(minibatch_combinations(counted_pool(2, 1, 3), 2) == 10.0);
}

TEST_CASE("fine_tune: zero step budget leaves params and version alone") {
    Separable s = separable_problem(1);
    FineTuneConfig cfg;
    cfg.step_budget = 0;
    std::mt19937_64 rng(1);
    CHECK(fine_tune(s.head, s.pool, cfg, rng) == s.head);
}

TEST_CASE("fine_tune: empty pool is a no-op") {
    Separable s = separable_problem(2);
    FineTuneConfig cfg;
    cfg.step_budget = 10;
    std::mt19937_64 rng(1);
    CHECK(fine_tune(s.head, SamplePool{}, cfg, rng) == s.head);
}

TEST_CASE("fine_tune: separable two-class pool reaches full training accuracy") {
    Separable s = separable_problem(3);
    CHECK(accuracy(s.head, s.pool.base) == 0.0);
    FineTuneConfig cfg;
    cfg.step_budget = 500;
    std::mt19937_64 rng(7);
    const HeadParams tuned = fine_tune(s.head, s.pool, cfg, rng);
    CHECK(accuracy(tuned, s.pool.base) == 1.0);
    CHECK(tuned.version == s.head.version + 1);
}

TEST_CASE("fine_tune: same seed and budget give identical params") {
    Separable s = separable_problem(4);
    FineTuneConfig cfg;
    cfg.step_budget = 50;
    std::mt19937_64 a(11), b(11);
    CHECK(fine_tune(s.head, s.pool, cfg, a) == fine_tune(s.head, s.pool, cfg, b));
}

TEST_CASE("fine_tune only touches trainable entries") {
    Separable s = separable_problem(5);
    auto [head, id] = register_novel_class(s.head, "novel", unit_vector(6, 3));
    s.pool.novel.push_back(shot(id, unit_vector(6, 3)));
    s.pool.novel_ratio = 2;
    const std::size_t before = frozen_state_hash(head, s.pool);
    FineTuneConfig cfg;
    cfg.step_budget = 100;
    std::mt19937_64 rng(1);
    const HeadParams tuned = fine_tune(head, s.pool, cfg, rng);
    CHECK(frozen_state_hash(tuned, s.pool) == before);
    CHECK(tuned.class_weights != head.class_weights);
}

TEST_CASE("fine_tune output is float32-exact") {
    Separable s = separable_problem(6);
    FineTuneConfig cfg;
    cfg.step_budget = 20;
    std::mt19937_64 rng(1);
    const HeadParams tuned = fine_tune(s.head, s.pool, cfg, rng);
    for (Eigen::Index i = 0; i < tuned.class_weights.size(); ++i) {
        const double v = tuned.class_weights.data()[i];
        CHECK(static_cast<double>(static_cast<float>(v)) == v);
    }
}

TEST_CASE("snapshot requested mid-run carries its own version") {
    Separable s = separable_problem(7);
    FineTuneConfig cfg;
    cfg.step_budget = 30;
    FineTuner tuner(cfg);
    tuner.request_snapshot();
    std::mt19937_64 rng(1);
    const HeadParams final_params = tuner.run(s.head, s.pool, rng);
    const auto snap = tuner.take_snapshot();
    REQUIRE(snap.has_value());
    CHECK(snap->version == s.head.version + 1);
    CHECK(final_params.version == s.head.version + 2);
    CHECK_FALSE(tuner.take_snapshot().has_value());
    CHECK(tuner.steps_taken() == 30);
}
