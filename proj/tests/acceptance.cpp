// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "scout/base_model.hpp"
#include "scout/features.hpp"
#include "scout/mission.hpp"
#include "scout/param_delta.hpp"
#include "scout/protocol.hpp"
#include "scout/similarity.hpp"
#include "scout/training.hpp"
#include "scout/visual_memory.hpp"

using namespace scout;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::string fmt(const char* format, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, format, args...);
    return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

Outcome memory_correctness() {
    std::mt19937_64 rng(101);
    double min_conf = 1.0, max_dev = 0.0, max_time = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureTensor x = extract_features(oracle::random_image(64, 64, rng));
        const auto start = std::chrono::steady_clock::now();
        VisualMemory memory{MemoryConfig{}};
        memory.write(x);
        const double conf = memory.read(x).confidence;
        max_time = std::max(max_time, seconds_since(start));
        min_conf = std::min(min_conf, conf);
        for (int dy = 0; dy < x.height(); ++dy) {
            for (int dx = 0; dx < x.width(); ++dx) {
                max_dev = std::max(max_dev, std::abs(memory.read(roll(x, dy, dx)).confidence - conf));
            }
        }
    }
    return {min_conf >= 0.99 && max_dev <= 1e-5 && max_time < 1.0,
            fmt("20 frames: min confidence %.6f, max shift deviation %.2e over all 256 shifts, write+read %.3f s",
                min_conf, max_dev, max_time)};
}

Outcome habituation() {
    std::mt19937_64 rng(202);
    bool monotone = true;
    double worst_final = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const FeatureTensor x = extract_features(oracle::random_image(64, 64, rng));
        VisualMemory memory{MemoryConfig{}};
        double prev = 2.0;
        for (int k = 0; k < 10; ++k) {
            const double s = memory.process_frame(x).score;
            monotone = monotone && s <= prev + 1e-9;
            prev = s;
        }
        worst_final = std::max(worst_final, prev);
    }
    return {monotone && worst_final < 0.05,
            fmt("20 frames x 10 presentations: non-increasing %s, worst final score %.5f", monotone ? "yes" : "no",
                worst_final)};
}

Outcome fft_equivalence() {
    std::mt19937_64 rng(303);
    double max_err = 0.0;
    const int cases = 150;
    for (int i = 0; i < cases; ++i) {
        const int c = 1 + static_cast<int>(rng() % 4), w = 1 + static_cast<int>(rng() % 8),
                  h = 1 + static_cast<int>(rng() % 8);
        const FeatureTensor x = oracle::random_tensor(c, w, h, rng);
        const FeatureTensor m = oracle::random_tensor(c, w, h, rng);
        const double fast = max_shift_sim(x, m).similarity;
        const double brute = oracle::brute_force_max_shift(x, m).similarity;
        max_err = std::max(max_err, std::abs(fast - brute));
    }
    return {max_err <= 1e-6, fmt("%d random tensors up to 4x8x8: max |fft - brute force| = %.2e", cases, max_err)};
}

Eigen::VectorXd random_unit(int d, std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    Eigen::VectorXd v(d);
    for (int i = 0; i < d; ++i) v[i] = g(rng);
    return v.normalized();
}

Outcome gradient_check() {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> g;
    double worst = 0.0;
    std::size_t entries = 0;
    const int configs = 60;
    for (int trial = 0; trial < configs; ++trial) {
        const int classes = 1 + trial % 4, d = 3 + trial % 6;
        std::vector<std::string> names;
        std::vector<TrainingSample> seed_rows;
        for (int c = 0; c < classes; ++c) {
            names.push_back("k" + std::to_string(c));
            seed_rows.push_back({random_unit(d, rng), c, Eigen::Vector4d::Zero()});
        }
        HeadParams p = init_head(names, seed_rows, d, 20.0, rng());
        for (Eigen::Index i = 0; i < p.box_weights.size(); ++i) p.box_weights.data()[i] = 0.3 * g(rng);
        for (Eigen::Index i = 0; i < p.box_bias.size(); ++i) p.box_bias[i] = 0.3 * g(rng);
        std::vector<TrainingSample> batch;
        const int n = 1 + trial % 6;
        for (int i = 0; i < n; ++i) {
            const int cls = static_cast<int>(rng() % static_cast<std::uint64_t>(classes + 1)) - 1;
            batch.push_back({random_unit(d, rng), cls, Eigen::Vector4d(g(rng), g(rng), 2 * g(rng), g(rng))});
        }
        const LossAndGrad lg = loss_and_grad(p, batch);
        auto f = [&] { return loss_and_grad(p, batch).loss; };
        auto check = [&](double& param, double analytic) {
            const double numeric = oracle::central_difference(f, param, 1e-4);
            worst = std::max(worst,
                             std::abs(numeric - analytic) / std::max(1.0, std::abs(numeric) + std::abs(analytic)));
            ++entries;
        };
        for (Eigen::Index i = 0; i < p.class_weights.size(); ++i)
            check(p.class_weights.data()[i], lg.grad.class_weights.data()[i]);
        for (Eigen::Index i = 0; i < p.box_weights.size(); ++i)
            check(p.box_weights.data()[i], lg.grad.box_weights.data()[i]);
        for (Eigen::Index i = 0; i < p.box_bias.size(); ++i) check(p.box_bias[i], lg.grad.box_bias[i]);
    }
    return {worst <= 1e-4, fmt("%d configurations, %zu entries, h=1e-4: max relative error %.2e", configs, entries, worst)};
}

Outcome sampler_frequency() {
    double worst = 0.0;
    std::ostringstream rates;
    for (auto [base, novel] : {std::pair<int, int>{2, 1}, {6, 2}}) {
        for (int r : {1, 2, 3}) {
            SamplePool pool;
            pool.novel_ratio = r;
            for (int i = 0; i < base; ++i) pool.base.push_back({random_unit(4, *std::make_unique<std::mt19937_64>(i)), 0, {}});
            for (int i = 0; i < novel; ++i) {
                NovelShot s;
                s.class_id = 1;
                s.pooled.vector = Eigen::Vector4d(0, 1, 0, 0);
                pool.novel.push_back(s);
            }
            std::mt19937_64 rng(500 + static_cast<std::uint64_t>(10 * base + r));
            int hits = 0;
            const int draws = 100000;
            for (int i = 0; i < draws; ++i) hits += sample_slots(pool, 1, rng)[0].novel ? 1 : 0;
            const double expect = double(r * novel) / double(base + r * novel);
            const double got = double(hits) / draws;
            worst = std::max(worst, std::abs(got - expect));
            rates << " " << base << "/" << novel << " r=" << r << ": " << fmt("%.4f vs %.4f", got, expect) << ";";
        }
    }
    return {worst <= 0.01, "1e5 draws each;" + rates.str() + fmt(" max deviation %.4f", worst)};
}

Outcome ap_oracle() {
    std::mt19937_64 rng(606);
    std::uniform_real_distribution<double> pos(0, 12), size(3, 10), score(0, 1);
    int instances = 0, mismatches = 0;
    for (int trial = 0; trial < 600; ++trial) {
        std::vector<GroundTruth> gts;
        std::vector<Detection> dets;
        const int n_gt = 1 + trial % 3, n_det = trial % 7;
        for (int i = 0; i < n_gt; ++i) {
            const double x = pos(rng), y = pos(rng);
            gts.push_back({"f" + std::to_string(rng() % 2), Box{x, y, x + size(rng), y + size(rng)},
                           static_cast<int>(rng() % 2)});
        }
        for (int i = 0; i < n_det; ++i) {
            const double x = pos(rng), y = pos(rng);
            dets.push_back({"f" + std::to_string(rng() % 2), Box{x, y, x + size(rng), y + size(rng)},
                            static_cast<int>(rng() % 2), std::round(score(rng) * 4) / 4});
        }
        for (int c : {0, 1}) {
            for (double thr : {0.1, 0.3, 0.5}) {
                ++instances;
                mismatches += average_precision(dets, gts, c, thr) != oracle::brute_force_ap(dets, gts, c, thr);
            }
        }
    }
    return {mismatches == 0 && instances >= 500,
            fmt("%d instances (<=6 detections, <=3 GT): %d mismatches against exhaustive PR enumeration", instances,
                mismatches)};
}

Outcome r_effect() {
    double sum1 = 0, sum3 = 0, novel1 = 0, novel3 = 0;
    const int seeds = 5;
    for (int seed = 1; seed <= seeds; ++seed) {
        FewShotTrial trial;
        trial.seed = static_cast<std::uint64_t>(seed);
        trial.shots = 3;
        trial.steps = 500;
        trial.novel_ratio = 1;
        const FewShotOutcome a = run_fewshot_trial(trial);
        trial.novel_ratio = 3;
        const FewShotOutcome b = run_fewshot_trial(trial);
        sum1 += a.map;
        sum3 += b.map;
        novel1 += a.novel_map;
        novel3 += b.novel_map;
    }
    const double m1 = sum1 / seeds, m3 = sum3 / seeds;
    return {m3 >= m1, fmt("K=3, 500 steps, 5 seeds: mean mAP r=1 %.5f, r=3 %.5f (novel classes: %.5f vs %.5f)", m1, m3,
                          novel1 / seeds, novel3 / seeds)};
}

double ranking_ap(const std::vector<InterestSample>& seq) {
    std::vector<int> order(seq.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return seq[a].score > seq[b].score; });
    double sum = 0;
    int hits = 0, n_gt = 0;
    for (std::size_t j = 0; j < order.size(); ++j) {
        if (!seq[static_cast<std::size_t>(order[j])].interesting) continue;
        ++hits;
        sum += double(hits) / double(j + 1);
    }
    for (const auto& s : seq) n_gt += s.interesting;
    return sum / n_gt;
}

Outcome auc_op_properties() {
    std::mt19937_64 rng(808);
    std::uniform_real_distribution<double> u(0, 1);
    bool monotone = true;
    double max_gap = 0.0;
    const int sequences = 300;
    for (int trial = 0; trial < sequences; ++trial) {
        const int n = 3 + trial % 20;
        std::vector<InterestSample> seq;
        for (int i = 0; i < n; ++i) seq.push_back({"f" + std::to_string(i), std::round(u(rng) * 10) / 10, u(rng) < 0.3});
        seq[rng() % static_cast<std::uint64_t>(n)].interesting = true;
        double prev = 0.0;
        for (double d = 1.0; d <= 8.0; d += 0.25) {
            const double v = auc_op(seq, d);
            monotone = monotone && v >= prev;
            prev = v;
        }
        int n_gt = 0;
        for (const auto& s : seq) n_gt += s.interesting;
        max_gap = std::max(max_gap, std::abs(auc_op(seq, double(n) / n_gt) - ranking_ap(seq)));
    }
    const std::vector<InterestSample> hand{{"a", 0.9, true}, {"b", 0.8, false}, {"c", 0.7, true}, {"d", 0.1, false}};
    const double v = auc_op(hand, 2.0);
    return {monotone && max_gap <= 1e-12 && std::abs(v - 5.0 / 6.0) <= 1e-9,
            fmt("%d sequences: monotone in delta %s, max |full budget - ranking AP| %.1e; TP,FP,TP at delta 2 = %.12f",
                sequences, monotone ? "yes" : "no", max_gap, v)};
}

Message random_message(MessageKind kind, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0, 1);
    const std::string id = "f\"{" + std::to_string(rng() % 1000) + "}\\";
    switch (kind) {
    case MessageKind::kHello:
        return make_hello(id, rng() % 100);
    case MessageKind::kCandidate: {
        Bytes b(1 + rng() % 500);
        for (auto& x : b) x = static_cast<std::uint8_t>(rng());
        return make_candidate(id, u(rng), std::move(b));
    }
    case MessageKind::kFeedbackUninteresting:
        return make_feedback_uninteresting(id);
    case MessageKind::kFeedbackAnnotation: {
        const double x = 50 * u(rng), y = 50 * u(rng);
        return make_feedback_annotation(id, {{"ring", Box{x, y, x + 1 + 9 * u(rng), y + 1 + 9 * u(rng)}}});
    }
    case MessageKind::kParamUpdate: {
        HeadParams p = fixture::base_model().head;
        p.version = 2 + rng() % 50;
        p.class_weights(0, 0) = static_cast<float>(u(rng));
        return make_param_update(snapshot_delta(p));
    }
    case MessageKind::kAck:
        return make_ack(rng() % 100);
    }
    return {};
}

Outcome protocol() {
    std::mt19937_64 rng(909);
    const std::vector<MessageKind> all{MessageKind::kHello,          MessageKind::kCandidate,
                                       MessageKind::kFeedbackUninteresting, MessageKind::kFeedbackAnnotation,
                                       MessageKind::kParamUpdate,    MessageKind::kAck};
    int round_trips = 0, codec_failures = 0;
    FrameDecoder stream;
    std::vector<Message> sent, received;
    for (int i = 0; i < 40; ++i) {
        for (MessageKind k : all) {
            const Message m = random_message(k, rng);
            const Bytes frame = encode(m);
            codec_failures += !(decode(frame) == m);
            ++round_trips;
            sent.push_back(m);
            for (std::size_t pos = 0; pos < frame.size();) {
                const std::size_t n = std::min<std::size_t>(frame.size() - pos, 1 + rng() % 97);
                stream.feed(std::span(frame).subspan(pos, n));
                pos += n;
                while (auto got = stream.next()) received.push_back(std::move(*got));
            }
        }
    }
    codec_failures += !(received == sent);

    // Scripted outage: candidates pile up while the uplink is down and go out
    // highest score first once it returns.
    bool ordered = true, bounded = true, evicts_min = true;
    std::size_t delivered_total = 0;
    for (int trial = 0; trial < 20; ++trial) {
        LinkConfig cfg;
        cfg.outages = {{10.0, 40.0}};
        cfg.latency_s = 0.3;
        cfg.bandwidth_bps = 5000;
        cfg.seed = static_cast<std::uint64_t>(trial);
        LinkSim link(cfg);
        CandidateBuffer buffer(8);
        std::vector<double> after_outage;
        std::uniform_real_distribution<double> u(0, 1);
        for (int step = 0; step < 60; ++step) {
            const double t = step;
            for (int k = 0; k < 2; ++k) {
                const auto before_min = buffer.min_score();
                const bool full = buffer.size() == buffer.capacity();
                const double score = std::round(u(rng) * 50) / 50;
                const auto evicted = buffer.push("c" + std::to_string(step) + "_" + std::to_string(k), score, Bytes(40, 1));
                bounded = bounded && buffer.size() <= buffer.capacity();
                if (full) {
                    evicts_min = evicts_min && evicted.has_value() &&
                                 evicted->score == std::min(*before_min, score);
                }
            }
            if (link.is_up(t)) {
                for (auto& c : buffer.drain_highest(buffer.capacity())) {
                    link.enqueue(encode(make_candidate(c.frame_id, c.score, c.payload)), t);
                }
            }
            for (auto& d : link.transfer(t + 0.999)) {
                ++delivered_total;
                if (t >= 40.0 && t < 41.0) after_outage.push_back(decode(d.bytes).header["score"].get<double>());
            }
        }
        ordered = ordered && after_outage.size() == 8 && std::is_sorted(after_outage.rbegin(), after_outage.rend());
    }
    return {codec_failures == 0 && ordered && bounded && evicts_min,
            fmt("%d round trips over 6 kinds, %d failures; outage replay in score order %s; capacity held %s; "
                "evicts minimum %s (%zu deliveries)",
                round_trips, codec_failures, ordered ? "yes" : "no", bounded ? "yes" : "no", evicts_min ? "yes" : "no",
                delivered_total)};
}

Outcome end_to_end() {
    fixture::TempDir dir("acceptance");
    SimMissionConfig cfg = fixture::sim_mission(dir.path(), 0.3);
    cfg.log_path = dir / "log.jsonl";
    cfg.store_path = dir / "store.jsonl";
    const auto start = std::chrono::steady_clock::now();
    const SimMissionResult r = run_sim_mission(cfg);
    const double elapsed = seconds_since(start);
    const bool identical = fixture::bit_identical(r.robot_head, r.station_head);
    const double ratio = r.report.bandwidth_ratio.value_or(1.0);
    const MissionReport replayed =
        metrics_from_log(MissionLog::read(dir / "log.jsonl"), read_annotations(dir / "mission" / "annotations.jsonl"));
    const bool replay = replayed == r.report && report_to_json(replayed) == report_to_json(r.report);

    SimMissionConfig defaults = fixture::sim_mission(dir.path(), MissionConfig{}.tau);
    const SimMissionResult d = run_sim_mission(defaults);
    const double default_ratio = d.report.bandwidth_ratio.value_or(1.0);
    const bool default_identical = fixture::bit_identical(d.robot_head, d.station_head);

    return {elapsed < 300.0 && identical && ratio <= 0.25 && replay && default_ratio <= 0.25 && default_identical,
            fmt("tau 0.3: %.1f s, %zu sent, head v%llu on both sides %s, bandwidth %.3f, replay %s, mAP %.4f; "
                "tau 0.75: bandwidth %.3f, heads %s",
                elapsed, r.candidates_sent, static_cast<unsigned long long>(r.robot_head.version),
                identical ? "bit-identical" : "DIFFERENT", ratio, replay ? "exact" : "MISMATCH",
                r.report.map.value_or(0.0), default_ratio, default_identical ? "bit-identical" : "DIFFERENT")};
}

} // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"memory correctness", memory_correctness},
        {"habituation", habituation},
        {"FFT oracle equivalence", fft_equivalence},
        {"gradient check", gradient_check},
        {"sampler frequency", sampler_frequency},
        {"AP oracle", ap_oracle},
        {"synthetic r-effect", r_effect},
        {"AUC-OP properties", auc_op_properties},
        {"protocol", protocol},
        {"end-to-end headless mission", end_to_end},
    };
    int failed = 0;
    for (const auto& [name, run] : criteria) {
        Outcome o;
        try {
            o = run();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failed += !o.pass;
        std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    }
    std::cout << (failed ? "acceptance: " + std::to_string(failed) + " criteria failed" : "acceptance: all passed")
              << std::endl;
    return failed ? 1 : 0;
}
