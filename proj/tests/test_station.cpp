#include "doctest.h"

#include <atomic>
#include <fstream>
#include <thread>

#include "fixtures.hpp"
#include "scout/station.hpp"
#include "scout/synthetic.hpp"

using namespace scout;

namespace {

StationConfig fast_config() {
    StationConfig c;
    c.cycle_steps = 20;
    c.sync_period_s = 0.5;
    c.cycles_per_change = 1;
    return c;
}

struct Scene {
    std::string id;
    Bytes png;
    Box box;
};

Scene object_scene(const std::string& id, const std::string& cls, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto s = make_object_scene(id, {&shape_class(cls)}, rng);
    return {id, encode_png(s.image), s.annotation.boxes.at(0).box};
}

void offer(Station& station, const std::string& id, const Bytes& png, double score = 0.5, double t = 0.0) {
    station.on_message(make_candidate(id, score, png), t);
}

std::vector<nlohmann::json> kinds(const std::vector<nlohmann::json>& events, const std::string& kind) {
    std::vector<nlohmann::json> out;
    for (const auto& e : events) {
        if (e["kind"] == kind) out.push_back(e);
    }
    return out;
}

} // namespace

TEST_CASE("review queue order, dedup and status transitions") {
    ReviewQueue q;
    CHECK(q.enqueue({"a", {1}, 0.4, 0.0, ReviewStatus::kPending}));
    CHECK(q.enqueue({"b", {2}, 0.9, 1.0, ReviewStatus::kPending}));
    CHECK(q.next_pending()->frame_id == "a");

    CHECK_FALSE(q.enqueue({"a", {3}, 0.7, 2.0, ReviewStatus::kPending}));
    CHECK(q.size() == 2);
    CHECK(q.next_pending()->frame_id == "a");
    CHECK(q.find("a")->score == 0.7);
    CHECK(q.find("a")->image == Bytes{3});

    q.resolve("a", ReviewStatus::kUninteresting);
    CHECK(q.next_pending()->frame_id == "b");
    CHECK_THROWS_AS(q.resolve("a", ReviewStatus::kInteresting), ValidationError);
    CHECK_THROWS_AS(q.resolve("b", ReviewStatus::kPending), ValidationError);
    CHECK_THROWS_AS(q.resolve("zzz", ReviewStatus::kInteresting), NotFound);

    // A decided item is immutable, even to a re-sent candidate.
    CHECK_FALSE(q.enqueue({"a", {9}, 0.1, 3.0, ReviewStatus::kPending}));
    CHECK(q.find("a")->status == ReviewStatus::kUninteresting);
    CHECK(q.find("a")->score == 0.7);
    CHECK(q.pending() == 1);
    CHECK(q.count(ReviewStatus::kUninteresting) == 1);
}

TEST_CASE("review queue status only moves out of pending, under random operations") {
    std::mt19937_64 rng(12);
    ReviewQueue q;
    std::map<std::string, ReviewStatus> model;
    std::vector<std::string> order;
    for (int step = 0; step < 2000; ++step) {
        const std::string id = "f" + std::to_string(rng() % 40);
        if (rng() % 2 == 0) {
            const bool fresh = q.enqueue({id, {}, 0.5, 0.0, ReviewStatus::kPending});
            CHECK(fresh == (model.count(id) == 0));
            if (fresh) {
                model[id] = ReviewStatus::kPending;
                order.push_back(id);
            }
        } else {
            const auto status = rng() % 2 ? ReviewStatus::kInteresting : ReviewStatus::kUninteresting;
            const auto it = model.find(id);
            if (it == model.end()) {
                CHECK_THROWS_AS(q.resolve(id, status), NotFound);
            } else if (it->second != ReviewStatus::kPending) {
                CHECK_THROWS_AS(q.resolve(id, status), ValidationError);
            } else {
                q.resolve(id, status);
                it->second = status;
            }
        }
        std::optional<std::string> expected;
        for (const auto& o : order) {
            if (model[o] == ReviewStatus::kPending) {
                expected = o;
                break;
            }
        }
        const auto next = q.next_pending();
        REQUIRE(next.has_value() == expected.has_value());
        if (next) REQUIRE(next->frame_id == *expected);
    }
}

TEST_CASE("decision strings") {
    CHECK(decision_from_string("interesting") == Decision::kInteresting);
    CHECK(decision_from_string("uninteresting") == Decision::kUninteresting);
    CHECK_THROWS_AS(decision_from_string("maybe"), InvalidInput);
    CHECK(to_string(ReviewStatus::kPending) == "pending");
}

TEST_CASE("oracle operator answers from ground truth within the shot budget") {
    AnnotationMap truth;
    for (int i = 0; i < 4; ++i) {
        const std::string id = "r" + std::to_string(i);
        truth[id] = {id, true, {{"ring", Box{1, 2, 20, 22}}}};
    }
    truth["both"] = {"both", true, {{"cross", Box{0, 0, 10, 10}}, {"ring", Box{30, 30, 40, 40}}}};
    truth["bg"] = {"bg", false, {}};
    truth["empty"] = {"empty", true, {}};
    OracleOperator oracle(truth, 3);

    for (int i = 0; i < 3; ++i) {
        const OracleAnswer a = oracle.decide("r" + std::to_string(i));
        CHECK(a.decision == Decision::kInteresting);
        REQUIRE(a.boxes.size() == 1);
        CHECK(a.boxes[0] == AnnotatedBox{"ring", Box{1, 2, 20, 22}});
    }
    const OracleAnswer exhausted = oracle.decide("r3");
    CHECK(exhausted.decision == Decision::kUninteresting);
    CHECK(exhausted.boxes.empty());
    CHECK_FALSE(exhausted.note.empty());

    // A frame is declined as a whole when any of its classes is out of budget.
    CHECK(oracle.decide("both").decision == Decision::kUninteresting);
    CHECK(oracle.shots_given("cross") == 0);

    CHECK(oracle.decide("bg").decision == Decision::kUninteresting);
    CHECK(oracle.decide("empty").decision == Decision::kUninteresting);
    const OracleAnswer missing = oracle.decide("nowhere");
    CHECK(missing.decision == Decision::kUninteresting);
    CHECK_FALSE(missing.note.empty());
    CHECK(oracle.shots_given("ring") == 3);
    CHECK_THROWS_AS(OracleOperator({}, -1), InvalidInput);
}

TEST_CASE("uninteresting decision emits exactly one write-back") {
    Station station(fast_config(), fixture::base_model());
    offer(station, "a", fixture::scene_png(1));
    offer(station, "b", fixture::scene_png(2));
    CHECK(station.next_item()->frame_id == "a");
    const DecisionResult r = station.decide("a", Decision::kUninteresting, {}, 1.0);
    REQUIRE(r.outbound.size() == 1);
    CHECK(r.outbound[0].kind == MessageKind::kFeedbackUninteresting);
    CHECK(r.outbound[0].header["frame_id"] == "a");
    CHECK(station.next_item()->frame_id == "b");
    CHECK(station.pool_size() == 0);
    CHECK_FALSE(station.training_wanted());
}

TEST_CASE("first interesting decision with a new class adds one class and one shot") {
    const HeadParams before = fixture::base_model().head;
    Station station(fast_config(), fixture::base_model());
    const Scene s = object_scene("s", "ring", 3);
    offer(station, s.id, s.png);
    const DecisionResult r = station.decide(s.id, Decision::kInteresting, {{"ring", s.box}}, 1.0);
    CHECK(r.new_classes == std::vector<std::string>{"ring"});
    CHECK(r.shots_added == 1);
    CHECK(station.head().classes() == before.classes() + 1);
    CHECK(station.head().version > before.version);
    CHECK(station.pool_size() == 1);
    CHECK(station.training_wanted());
    REQUIRE(r.outbound.size() == 1);
    CHECK(r.outbound[0].kind == MessageKind::kFeedbackAnnotation);
    CHECK(annotation_boxes(r.outbound[0]) == std::vector<AnnotatedBox>{{"ring", s.box}});

    // A second shot of the same class adds a shot but no class.
    const Scene t = object_scene("t", "ring", 4);
    offer(station, t.id, t.png);
    const DecisionResult r2 = station.decide(t.id, Decision::kInteresting, {{"ring", t.box}}, 2.0);
    CHECK(r2.new_classes.empty());
    CHECK(station.head().classes() == before.classes() + 1);
    CHECK(station.pool_size() == 2);
}

TEST_CASE("rejected decisions change nothing") {
    Station station(fast_config(), fixture::base_model());
    const Scene s = object_scene("s", "cross", 5);
    offer(station, s.id, s.png);
    const HeadParams head = station.head();

    CHECK_THROWS_AS(station.decide("unknown", Decision::kUninteresting, {}, 1.0), NotFound);
    CHECK_THROWS_AS(station.decide(s.id, Decision::kInteresting, {}, 1.0), ValidationError);
    CHECK_THROWS_AS(station.decide(s.id, Decision::kInteresting, {{"", s.box}}, 1.0), ValidationError);
    CHECK_THROWS_AS(station.decide(s.id, Decision::kInteresting, {{"cross", Box{5, 5, 5, 9}}}, 1.0),
                    ValidationError);
    CHECK_THROWS_AS(station.decide(s.id, Decision::kInteresting, {{"cross", Box{200, 200, 240, 240}}}, 1.0),
                    ValidationError);
    CHECK(station.pending() == 1);
    CHECK(station.head() == head);
    CHECK(station.pool_size() == 0);

    station.decide(s.id, Decision::kUninteresting, {}, 2.0);
    CHECK_THROWS_AS(station.decide(s.id, Decision::kUninteresting, {}, 3.0), ValidationError);

    // An undecodable candidate image cannot be annotated.
    offer(station, "junk", Bytes{1, 2, 3});
    CHECK_THROWS_AS(station.decide("junk", Decision::kInteresting, {{"cross", s.box}}, 4.0), ValidationError);
    CHECK(station.pending() == 1);
}

TEST_CASE("class capacity is enforced atomically") {
    Station station(fast_config(), fixture::base_model());
    const Scene s = object_scene("s", "ring", 6);
    for (int i = 0; i < kNovelCapacity; ++i) {
        const std::string id = "n" + std::to_string(i);
        offer(station, id, s.png);
        station.decide(id, Decision::kInteresting, {{"class" + std::to_string(i), s.box}}, 1.0);
    }
    offer(station, "over", s.png);
    const HeadParams head = station.head();
    CHECK_THROWS_AS(station.decide("over", Decision::kInteresting, {{"ring", s.box}, {"one-more", s.box}}, 2.0),
                    CapacityError);
    CHECK(station.head() == head);
    CHECK(station.pool_size() == static_cast<std::size_t>(kNovelCapacity));
    CHECK(station.pending() == 1);
}

TEST_CASE("no shots means no cycles and no deltas") {
    fixture::TempDir dir("station-idle");
    EventStore store(dir / "store.jsonl");
    Station station(fast_config(), fixture::base_model(), &store);
    offer(station, "a", fixture::scene_png(7));
    station.decide("a", Decision::kUninteresting, {}, 1.0);
    CHECK_FALSE(station.training_wanted());
    CHECK_FALSE(station.run_training_cycle(2.0));
    CHECK_FALSE(station.sync_if_due(3.0));
    CHECK(kinds(store.events(), "cycle").empty());
    CHECK(kinds(store.events(), "delta").empty());
}

TEST_CASE("two cycles give one delta each with strictly increasing versions") {
    StationConfig cfg = fast_config();
    cfg.cycles_per_change = 2;
    Station station(cfg, fixture::base_model());
    const Scene s = object_scene("s", "ring", 8);
    offer(station, s.id, s.png);
    station.decide(s.id, Decision::kInteresting, {{"ring", s.box}}, 1.0);
    const auto first = station.run_training_cycle(2.0);
    const auto second = station.run_training_cycle(3.0);
    REQUIRE(first);
    REQUIRE(second);
    const auto v1 = param_update_delta(*first).version;
    const auto v2 = param_update_delta(*second).version;
    CHECK(v2 > v1);
    CHECK(v2 == station.head().version);
    CHECK_FALSE(station.training_wanted());
    CHECK_FALSE(station.run_training_cycle(4.0));
}

TEST_CASE("sync waits for the period and stops once acknowledged") {
    StationConfig cfg = fast_config();
    cfg.sync_period_s = 30.0;
    cfg.cycles_per_change = 3;
    Station station(cfg, fixture::base_model());
    const Scene s = object_scene("s", "ring", 9);
    offer(station, s.id, s.png);
    station.decide(s.id, Decision::kInteresting, {{"ring", s.box}}, 0.0);
    CHECK(station.run_training_cycle(1.0)); // first sync goes out at once
    CHECK_FALSE(station.run_training_cycle(2.0));
    CHECK_FALSE(station.sync_if_due(10.0));
    const auto late = station.sync_if_due(40.0);
    REQUIRE(late);
    station.on_message(make_ack(station.head().version), 41.0);
    CHECK(station.acknowledged_version() == station.head().version);
    CHECK_FALSE(station.sync_if_due(100.0));
    const Message forced = station.force_sync(101.0);
    CHECK(param_update_delta(forced).version == station.head().version);
}

TEST_CASE("hello from a robot behind the station gets the head") {
    Station station(fast_config(), fixture::base_model());
    const auto v = station.head().version;
    CHECK_FALSE(station.on_message(make_hello("r", v), 0.0));
    const auto reply = station.on_message(make_hello("r", v - 1), 0.0);
    REQUIRE(reply);
    CHECK(reply->kind == MessageKind::kParamUpdate);
    CHECK(param_update_delta(*reply).version == v);
}

TEST_CASE("candidates keep arriving while a cycle runs, and mid-cycle shots wait for the next cycle") {
    StationConfig cfg = fast_config();
    cfg.cycle_steps = 4000;
    Station station(cfg, fixture::base_model());
    std::vector<nlohmann::json> events;
    std::mutex m;
    station.set_listener([&](const nlohmann::json& e) {
        std::lock_guard lock(m);
        events.push_back(e);
    });
    const Scene a = object_scene("a", "ring", 10);
    const Scene b = object_scene("b", "cross", 11);
    offer(station, a.id, a.png);
    station.decide(a.id, Decision::kInteresting, {{"ring", a.box}}, 1.0);

    std::atomic<bool> started{false};
    station.set_listener([&](const nlohmann::json& e) {
        if (e["kind"] == "cycle_start") started = true;
        std::lock_guard lock(m);
        events.push_back(e);
    });
    std::thread trainer([&] { station.run_training_cycle(2.0); });
    while (!started) std::this_thread::yield();
    offer(station, b.id, b.png, 0.8, 2.5);
    station.decide(b.id, Decision::kInteresting, {{"cross", b.box}}, 2.5);
    trainer.join();

    const auto cycles = kinds(events, "cycle");
    REQUIRE(cycles.size() == 1);
    CHECK(cycles[0]["pool"] == 1);
    const HeadParams head = station.head();
    CHECK(head.find_class("ring") >= 0);
    CHECK(head.find_class("cross") >= 0);
    CHECK(station.pool_size() == 2);
    CHECK(station.training_wanted());

    station.run_training_cycle(3.0);
    const auto after = kinds(events, "cycle");
    REQUIRE(after.size() == 2);
    CHECK(after[1]["pool"] == 2);
    CHECK(station.head().version > head.version);
}

TEST_CASE("feedback messages equal uninteresting decisions and the pool stays within budget") {
    std::mt19937_64 rng(21);
    const std::vector<std::string> names{"ring", "cross"};
    for (int trial = 0; trial < 3; ++trial) {
        AnnotationMap truth;
        std::vector<Scene> scenes;
        for (int i = 0; i < 14; ++i) {
            const std::string id = "t" + std::to_string(trial) + "_" + std::to_string(i);
            if (rng() % 3 == 0) {
                scenes.push_back({id, fixture::scene_png(rng()), {}});
                truth[id] = {id, false, {}};
            } else {
                const std::string cls = names[rng() % 2];
                scenes.push_back(object_scene(id, cls, rng()));
                truth[id] = {id, true, {{cls, scenes.back().box}}};
            }
        }
        const int budget = 1 + trial;
        OracleOperator oracle(truth, budget);
        Station station(fast_config(), fixture::base_model());
        std::size_t uninteresting = 0, feedback = 0;
        for (const auto& s : scenes) offer(station, s.id, s.png);
        while (auto item = station.next_item()) {
            const OracleAnswer a = oracle.decide(item->frame_id);
            const DecisionResult r = station.decide(item->frame_id, a.decision, a.boxes, 1.0);
            uninteresting += a.decision == Decision::kUninteresting;
            for (const auto& msg : r.outbound) feedback += msg.kind == MessageKind::kFeedbackUninteresting;
            const HeadParams head = station.head();
            CHECK(station.pool_size() <= static_cast<std::size_t>(head.novel_count() * budget));
        }
        CHECK(feedback == uninteresting);
        CHECK(station.pending() == 0);
        const auto status = station.status();
        CHECK(status["counts"]["uninteresting"] == uninteresting);
        CHECK(status["counts"]["received"] == scenes.size());
    }
}

TEST_CASE("event store sequence, time order and reopening") {
    fixture::TempDir dir("store");
    {
        EventStore store(dir / "s.jsonl");
        CHECK_FALSE(store.recovery_note());
        store.append({{"kind", "a"}, {"t", 2.0}});
        const auto e = store.append({{"kind", "b"}, {"t", 1.0}});
        CHECK(e["t"] == 2.0);
        CHECK(e["seq"] == 1);
    }
    EventStore again(dir / "s.jsonl");
    REQUIRE(again.events().size() == 2);
    const auto e = again.append({{"kind", "c"}, {"t", 0.5}});
    CHECK(e["seq"] == 2);
    CHECK(e["t"] == 2.0);
}

TEST_CASE("event store truncates a cut-off trailing line") {
    fixture::TempDir dir("store-cut");
    {
        EventStore store(dir / "s.jsonl");
        store.append({{"kind", "a"}, {"t", 1.0}});
        store.append({{"kind", "b"}, {"t", 2.0}});
    }
    std::ofstream(dir / "s.jsonl", std::ios::app) << R"({"kind": "c", "t": 3)";
    {
        EventStore store(dir / "s.jsonl");
        REQUIRE(store.recovery_note());
        CHECK(store.events().size() == 2);
        store.append({{"kind", "d"}, {"t", 4.0}});
    }
    EventStore reopened(dir / "s.jsonl");
    CHECK_FALSE(reopened.recovery_note());
    REQUIRE(reopened.events().size() == 3);
    CHECK(reopened.events()[2]["kind"] == "d");
    CHECK(reopened.events()[2]["seq"] == 2);

    std::ofstream(dir / "mid.jsonl") << "{\"kind\": \"a\", \"t\": 1}\n{broken\n{\"kind\": \"b\", \"t\": 2}\n";
    CHECK_THROWS_AS(EventStore(dir / "mid.jsonl"), InvalidInput);
}

TEST_CASE("store replay rebuilds head version, classes and shot pool") {
    fixture::TempDir dir("store-replay");
    EventStore store(dir / "s.jsonl");
    StationConfig cfg = fast_config();
    cfg.cycles_per_change = 2;
    Station station(cfg, fixture::base_model(), &store);
    const Scene a = object_scene("a", "ring", 30);
    const Scene b = object_scene("b", "cross", 31);
    const Scene c = object_scene("c", "ring", 32);
    for (const Scene* s : {&a, &b, &c}) {
        offer(station, s->id, s->png);
        const std::string cls = s == &b ? "cross" : "ring";
        station.decide(s->id, Decision::kInteresting, {{cls, s->box}}, 1.0);
        while (station.training_wanted()) station.run_training_cycle(2.0);
    }
    offer(station, "bg", fixture::scene_png(33));
    station.decide("bg", Decision::kUninteresting, {}, 3.0);

    const StoreReplay replay = replay_store(EventStore(dir / "s.jsonl").events());
    CHECK(replay.head_version == station.head().version);
    CHECK(replay.class_names == std::vector<std::string>{"ring", "cross"});
    CHECK(replay.shots.size() == station.pool_size());
    CHECK(replay.decisions == 4);
    for (const auto& shot : replay.shots) {
        CHECK(std::filesystem::exists(shot.image_ref));
        CHECK(shot.pooled.vector.norm() == doctest::Approx(1.0));
    }

    double t = -1.0;
    std::uint64_t seq = 0;
    for (const auto& e : store.events()) {
        CHECK(e["t"].get<double>() >= t);
        CHECK(e["seq"] == seq++);
        t = e["t"].get<double>();
    }
}

TEST_CASE("station rejects a base head of the wrong width") {
    BaseModel base = fixture::base_model();
    StationConfig cfg;
    cfg.pipeline.roi_grid = 2;
    CHECK_THROWS_AS(Station(cfg, base), InvalidInput);
    cfg.pipeline.roi_grid = 4;
    cfg.novel_ratio = 0;
    CHECK_THROWS_AS(Station(cfg, base), InvalidInput);
}
