#include <csignal>
#include <fstream>
#include <iostream>
#include <thread>

#include "CLI11.hpp"
#include "scout/base_model.hpp"
#include "scout/mission.hpp"
#include "scout/station_server.hpp"

namespace {

volatile std::sig_atomic_t stop_requested = 0;

void on_signal(int) { stop_requested = 1; }

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Base station: review queue, operator API, few-shot fine-tuning and head sync"};
    std::string listen = "127.0.0.1:8080", robot = "127.0.0.1:9000", oracle, store = "station_store.jsonl", base;
    scout::StationConfig config;
    int shots = 3;
    double duration = 0.0;
    std::string sim, dataset, log_path = "mission_log.jsonl";
    app.add_option("--listen", listen, "HTTP/WebSocket address")->capture_default_str();
    app.add_option("--robot", robot, "Address the robot link listens on")->capture_default_str();
    app.add_option("--oracle", oracle, "Answer the queue from these annotations instead of a human");
    app.add_option("--shots", shots, "Oracle shot budget per class")->capture_default_str();
    app.add_option("--store", store, "Event store (JSONL)")->capture_default_str();
    app.add_option("--base", base, "Labelled base set the pretrained head is built from")->required();
    app.add_option("--ratio", config.novel_ratio, "Novel reuse ratio r")->capture_default_str();
    app.add_option("--cycle-steps", config.cycle_steps, "Fine-tuning steps per cycle")->capture_default_str();
    app.add_option("--sync-period", config.sync_period_s, "Seconds between head pushes")->capture_default_str();
    app.add_option("--duration", duration, "Stop after this many seconds (0 runs until interrupted)");
    app.add_option("--sim", sim, "Run a headless mission with an in-process robot (schedule JSON)");
    app.add_option("--dataset", dataset, "Mission frames for --sim");
    app.add_option("--log", log_path, "Robot mission log for --sim")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    if (!sim.empty()) {
        if (dataset.empty()) {
            std::cerr << "station: --sim needs --dataset\n";
            return 2;
        }
        try {
            std::ifstream in(sim);
            if (!in) throw scout::IoError("cannot read " + sim);
            scout::SimMissionConfig mission;
            mission.robot.dataset = dataset;
            mission.station = config;
            mission.station.shots_per_class = shots;
            mission.schedule = scout::sim_schedule_from_json(nlohmann::json::parse(in));
            mission.base_dataset = base;
            mission.log_path = log_path;
            mission.store_path = store;
            mission.oracle_shots = shots;
            if (!oracle.empty()) mission.oracle_truth = scout::read_annotations(oracle);
            const auto result = scout::run_sim_mission(mission);
            std::cout << scout::report_to_json(result.report) << '\n';
            return result.robot_head == result.station_head ? 0 : 1;
        } catch (const std::exception& e) {
            std::cerr << "station: " << e.what() << '\n';
            return 1;
        }
    }

    try {
        config.shots_per_class = shots;
        auto model = scout::build_base_model(scout::load_labelled(scout::open_dataset(base)), config.pipeline);
        scout::EventStore events(store);
        if (events.recovery_note()) std::cerr << "station: store recovery: " << *events.recovery_note() << '\n';
        scout::Station station(config, std::move(model), &events);
        std::optional<scout::OracleOperator> operator_;
        if (!oracle.empty()) operator_.emplace(scout::read_annotations(oracle), shots);

        scout::StationServerConfig server_config;
        server_config.http = scout::parse_endpoint(listen);
        server_config.robot = scout::parse_endpoint(robot);
        scout::StationServer server(station, server_config, operator_ ? &*operator_ : nullptr);
        server.start();
        std::cerr << "station: http on port " << server.http_port() << ", robot link on port " << server.robot_port()
                  << '\n';

        std::signal(SIGINT, on_signal);
        std::signal(SIGTERM, on_signal);
        while (!stop_requested && (duration <= 0.0 || server.now() < duration)) {
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        server.stop();
        std::cout << station.status().dump(2) << '\n';
    } catch (const std::exception& e) {
        std::cerr << "station: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
