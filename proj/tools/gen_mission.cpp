#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "scout/synthetic.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Write a synthetic mission, a labelled base set and a sim schedule"};
    std::string out;
    scout::MissionSpec spec;
    int base_images = 30;
    std::uint64_t base_seed = 11;
    double outage_start = 50.0, outage_end = 80.0;
    app.add_option("--out", out, "Output directory")->required();
    app.add_option("--frames", spec.frames, "Mission frames")->capture_default_str();
    app.add_option("--warmup", spec.warmup, "Leading background frames for warmup")->capture_default_str();
    app.add_option("--novel-fraction", spec.novel_fraction, "Fraction of frames with a novel object")
        ->capture_default_str();
    app.add_option("--textures", spec.textures)->capture_default_str();
    app.add_option("--views", spec.views_per_texture, "Fixed views per texture")->capture_default_str();
    app.add_option("--noise", spec.noise, "Per-pixel noise amplitude")->capture_default_str();
    app.add_option("--seed", spec.seed)->capture_default_str();
    app.add_option("--base-images", base_images, "Images in the base training set")->capture_default_str();
    app.add_option("--base-seed", base_seed)->capture_default_str();
    app.add_option("--outage-start", outage_start, "Uplink outage start (s)")->capture_default_str();
    app.add_option("--outage-end", outage_end, "Uplink outage end (s)")->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        const std::filesystem::path dir(out);
        scout::write_scene_dataset(dir / "mission", scout::generate_mission(spec));
        scout::write_scene_dataset(dir / "base", scout::make_base_set(base_images, base_seed));
        nlohmann::json schedule{{"frame_interval_s", 1.0},
                                {"uplink", {{"outages", nlohmann::json::array()}, {"latency_s", 0.2}}},
                                {"downlink", {{"latency_s", 0.2}}}};
        if (outage_end > outage_start) schedule["uplink"]["outages"].push_back({outage_start, outage_end});
        std::ofstream(dir / "schedule.json") << schedule.dump(2) << '\n';
        std::cout << "wrote " << spec.frames << " mission frames and " << base_images << " base images to " << out
                  << '\n';
    } catch (const std::exception& e) {
        std::cerr << "gen-mission: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
