#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "scout/base_model.hpp"
#include "scout/mission.hpp"
#include "scout/robot_live.hpp"

namespace {

nlohmann::json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw scout::IoError("cannot read " + path);
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw scout::InvalidInput(path + ": " + e.what());
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robot node: online interestingness, candidate upload and onboard detection"};
    scout::MissionConfig mission;
    std::string dataset, base, endpoint, sim, snapshot, log_path = "mission_log.jsonl", report_path, store;
    double rate = 0.0, linger = 2.0;
    app.add_option("--dataset", dataset, "Mission frames directory")->required();
    app.add_option("--mission-id", mission.mission_id)->capture_default_str();
    app.add_option("--base", base, "Labelled base set the pretrained head is built from")->required();
    app.add_option("--warmup", mission.warmup, "Frames written to memory before scoring")->capture_default_str();
    app.add_option("--tau", mission.tau, "Interestingness threshold")->capture_default_str();
    app.add_option("--buffer", mission.buffer_capacity, "Candidate buffer capacity")->capture_default_str();
    app.add_option("--cache", mission.cache_size, "Frames kept for write-backs")->capture_default_str();
    app.add_option("--cubes", mission.memory.cubes, "Memory cubes")->capture_default_str();
    app.add_option("--gamma-write", mission.memory.gamma_write)->capture_default_str();
    app.add_option("--gamma-read", mission.memory.gamma_read)->capture_default_str();
    auto* ep = app.add_option("--endpoint", endpoint, "Station robot link, host:port");
    auto* sm = app.add_option("--sim", sim, "Run headless against an in-process station (schedule JSON)");
    ep->excludes(sm);
    app.add_option("--memory-snapshot", snapshot, "Save the visual memory here at the end");
    app.add_option("--log", log_path, "Mission log (JSONL)")->capture_default_str();
    app.add_option("--report", report_path, "Write the mission report here (default stdout)");
    app.add_option("--store", store, "Station event store for --sim");
    app.add_option("--frame-interval", rate, "Seconds between frames with --endpoint")->capture_default_str();
    app.add_option("--linger", linger, "Seconds to wait for feedback after the stream")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    if (endpoint.empty() == sim.empty()) {
        std::cerr << "robot: give exactly one of --endpoint or --sim\n";
        return 2;
    }
    try {
        mission.dataset = dataset;
        mission.validate();
        scout::MissionReport report;
        if (!sim.empty()) {
            scout::SimMissionConfig config;
            config.robot = mission;
            config.schedule = scout::sim_schedule_from_json(read_json(sim));
            config.base_dataset = base;
            config.log_path = log_path;
            if (!store.empty()) config.store_path = store;
            const auto result = scout::run_sim_mission(config);
            report = result.report;
            std::cerr << "robot: sent " << result.candidates_sent << " candidates, head v" << result.robot_head.version
                      << (result.robot_head == result.station_head ? " (matches station)" : " (DIFFERS from station)")
                      << '\n';
        } else {
            const scout::Dataset ds = scout::open_dataset(dataset);
            const auto model = scout::build_base_model(scout::load_labelled(scout::open_dataset(base)), mission.pipeline);
            scout::MissionLog log(log_path);
            scout::RobotNode node(mission, model.head, log);
            scout::LiveOptions options;
            options.station = scout::parse_endpoint(endpoint);
            options.frame_interval_s = rate;
            options.linger_s = linger;
            const auto outcome = scout::run_robot_live(node, ds, options);
            if (!outcome.drained) std::cerr << "robot: " << node.buffered() << " candidates never reached the station\n";
            if (!snapshot.empty()) node.memory().save(snapshot);
            report = scout::metrics_from_log(log.events(), ds.annotations);
        }
        if (report_path.empty()) {
            std::cout << scout::report_to_json(report) << '\n';
        } else {
            scout::emit_report(report, report_path);
        }
    } catch (const std::exception& e) {
        std::cerr << "robot: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
