#ifndef SCOUT_MISSION_HPP
#define SCOUT_MISSION_HPP

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scout/robot.hpp"
#include "scout/station.hpp"

namespace scout {

/// Simulated timing of a headless mission: one frame every
/// frame_interval_s seconds and one LinkSim per direction.
struct SimSchedule {
    double frame_interval_s = 1.0;
    LinkConfig uplink;
    LinkConfig downlink;
};

/// {"frame_interval_s", "uplink": {...}, "downlink": {...}} with link
/// objects as accepted by link_config_from_json.
SimSchedule sim_schedule_from_json(const nlohmann::json& j);

struct SimMissionConfig {
    MissionConfig robot;
    StationConfig station;
    SimSchedule schedule;
    std::filesystem::path base_dataset;
    std::optional<std::filesystem::path> log_path;
    std::optional<std::filesystem::path> store_path;
    int oracle_shots = 3;
    /// Ground truth the oracle answers from; the mission's own
    /// annotations when unset.
    std::optional<AnnotationMap> oracle_truth;
    /// Simulated seconds allowed after the stream ends to reach quiescence.
    double drain_limit_s = 3600.0;
};

struct SimMissionResult {
    MissionReport report;
    HeadParams robot_head;
    HeadParams station_head;
    std::vector<nlohmann::json> log;
    std::size_t candidates_sent = 0;
    std::size_t feedback_messages = 0;
    std::size_t uninteresting_decisions = 0;
    std::size_t param_updates = 0;
    double end_time = 0.0;
    bool quiescent = false;
};

/// Robot, station and oracle operator over simulated links. After the
/// stream ends the mission runs until nothing is queued anywhere, then the
/// station pushes its head once more and the run waits for the robot's ACK.
/// Throws IoError for unreadable datasets and Error when quiescence is not
/// reached within drain_limit_s.
SimMissionResult run_sim_mission(const SimMissionConfig& config);

} // namespace scout

#endif // SCOUT_MISSION_HPP
