#include "scout/mission.hpp"

#include <chrono>
#include <memory>

#include "scout/image.hpp"

namespace scout {

SimSchedule sim_schedule_from_json(const nlohmann::json& j) {
    SimSchedule s;
    try {
        s.frame_interval_s = j.value("frame_interval_s", s.frame_interval_s);
        if (j.contains("uplink")) s.uplink = link_config_from_json(j["uplink"]);
        if (j.contains("downlink")) s.downlink = link_config_from_json(j["downlink"]);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed sim schedule: ") + e.what());
    }
    if (!(s.frame_interval_s > 0.0)) throw InvalidInput("frame interval must be positive");
    return s;
}

namespace {

class SimRun {
public:
    SimRun(const SimMissionConfig& config, const Dataset& mission, BaseModel base)
        : config_(config),
          log_(config.log_path ? std::make_unique<MissionLog>(*config.log_path) : std::make_unique<MissionLog>()),
          store_(config.store_path ? std::optional<EventStore>(std::in_place, *config.store_path) : std::nullopt),
          robot_(config.robot, base.head, *log_),
          station_(config.station, std::move(base), store_ ? &*store_ : nullptr),
          oracle_(config.oracle_truth ? *config.oracle_truth : mission.annotations, config.oracle_shots),
          uplink_(config.schedule.uplink),
          downlink_(config.schedule.downlink) {}

    SimMissionResult run(const Dataset& mission) {
        const auto wall_start = std::chrono::steady_clock::now();
        const auto warm = static_cast<std::size_t>(config_.robot.warmup);
        if (mission.size() < warm) throw InvalidInput("mission has fewer frames than the warmup count");

        std::vector<Image> warmup;
        for (std::size_t i = 0; i < warm; ++i) warmup.push_back(load_image(mission.images[i].string()));
        robot_.warmup(warmup, 0.0);
        uplink_.enqueue(encode(robot_.hello()), 0.0);

        const double dt = config_.schedule.frame_interval_s;
        double t = 0.0;
        for (std::size_t i = warm; i < mission.size(); ++i) {
            t = static_cast<double>(i - warm) * dt;
            exchange(t);
            robot_.process(Dataset::frame_id(mission.images[i]), load_image(mission.images[i].string()), t);
            send_candidates(t);
            station_step(t);
        }

        const double limit = t + config_.drain_limit_s;
        while (!quiescent()) {
            t += dt;
            if (t > limit) throw Error("mission did not reach quiescence");
            exchange(t);
            send_candidates(t);
            station_step(t);
        }
        downlink_.enqueue(encode(station_.force_sync(t)), t);
        ++result_.param_updates;
        while (!(uplink_.idle() && downlink_.idle() && station_.acknowledged_version() == station_.head().version)) {
            t += dt;
            if (t > limit) throw Error("final sync was not acknowledged");
            exchange(t);
        }

        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count();
        robot_.finish(t, wall);

        result_.end_time = t;
        result_.quiescent = true;
        result_.log = log_->events();
        result_.report = metrics_from_log(result_.log, mission.annotations);
        result_.robot_head = robot_.head();
        result_.station_head = station_.head();
        return std::move(result_);
    }

private:
    bool quiescent() const {
        return robot_.buffered() == 0 && uplink_.idle() && downlink_.idle() && station_.pending() == 0 &&
               !station_.training_wanted();
    }

    void exchange(double t) {
        for (auto& d : uplink_.transfer(t)) {
            std::optional<Message> reply;
            try {
                reply = station_.on_message(decode(d.bytes), d.time);
            } catch (const ProtocolError&) {
                continue;
            }
            if (reply) send_down(*reply, d.time);
        }
        for (auto& d : downlink_.transfer(t)) {
            Message msg;
            try {
                msg = decode(d.bytes);
            } catch (const ProtocolError&) {
                continue;
            }
            if (auto reply = robot_.handle(msg, d.time)) uplink_.enqueue(encode(*reply), d.time);
        }
    }

    void send_candidates(double t) {
        if (!uplink_.is_up(t)) return;
        for (auto& frame : robot_.drain_candidates(t)) {
            uplink_.enqueue(std::move(frame), t);
            ++result_.candidates_sent;
        }
    }

    void send_down(const Message& msg, double t) {
        if (msg.kind == MessageKind::kFeedbackUninteresting) ++result_.feedback_messages;
        if (msg.kind == MessageKind::kParamUpdate) ++result_.param_updates;
        downlink_.enqueue(encode(msg), t);
    }

    void station_step(double t) {
        while (auto item = station_.next_item()) {
            const OracleAnswer answer = oracle_.decide(item->frame_id);
            Decision decision = answer.decision;
            DecisionResult r;
            try {
                r = station_.decide(item->frame_id, decision, answer.boxes, t);
            } catch (const Error&) {
                // An annotation the head cannot take (e.g. past the class
                // capacity) is answered as uninteresting instead.
                decision = Decision::kUninteresting;
                r = station_.decide(item->frame_id, decision, {}, t);
            }
            if (decision == Decision::kUninteresting) ++result_.uninteresting_decisions;
            for (const auto& msg : r.outbound) send_down(msg, t);
        }
        if (station_.training_wanted()) {
            if (auto update = station_.run_training_cycle(t)) send_down(*update, t);
        }
    }

    const SimMissionConfig& config_;
    std::unique_ptr<MissionLog> log_;
    std::optional<EventStore> store_;
    RobotNode robot_;
    Station station_;
    OracleOperator oracle_;
    LinkSim uplink_;
    LinkSim downlink_;
    SimMissionResult result_;
};

} // namespace

SimMissionResult run_sim_mission(const SimMissionConfig& config) {
    const Dataset mission = open_dataset(config.robot.dataset);
    const Dataset base_ds = open_dataset(config.base_dataset);
    BaseModel base = build_base_model(load_labelled(base_ds), config.station.pipeline);
    SimRun run(config, mission, std::move(base));
    return run.run(mission);
}

} // namespace scout
