#include <iostream>

#include "CLI11.hpp"
#include "scout/robot.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Recompute mission metrics from a robot mission log"};
    std::string log_path, annotations, out, mission_id;
    app.add_option("--log", log_path, "Mission log (JSONL)")->required();
    app.add_option("--annotations", annotations, "Ground truth annotations.jsonl")->required();
    app.add_option("--mission-id", mission_id, "Override the id recorded in the log");
    app.add_option("--out", out, "Write the report here instead of stdout");
    CLI11_PARSE(app, argc, argv);
    try {
        const auto report =
            scout::metrics_from_log(scout::MissionLog::read(log_path), scout::read_annotations(annotations), mission_id);
        if (out.empty()) {
            std::cout << scout::report_to_json(report) << '\n';
        } else {
            scout::emit_report(report, out);
        }
    } catch (const std::exception& e) {
        std::cerr << "mission-report: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
