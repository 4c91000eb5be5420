// Shared setup for the system-level suites: temporary directories and a
// small pretrained base model built once per test binary.
#ifndef SCOUT_TESTS_FIXTURES_HPP
#define SCOUT_TESTS_FIXTURES_HPP

#include <atomic>
#include <cstring>
#include <filesystem>
#include <random>
#include <string>

#include "scout/base_model.hpp"
#include "scout/image.hpp"
#include "scout/mission.hpp"
#include "scout/synthetic.hpp"

namespace fixture {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("scout-" + tag + "-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline const scout::BaseModel& base_model() {
    static const scout::BaseModel model = [] {
        const auto scenes = scout::make_base_set(18, 11);
        return scout::build_base_model(scenes);
    }();
    return model;
}

inline scout::Bytes scene_png(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return scout::encode_png(scout::make_texture(64, rng));
}

/// The bundled synthetic mission as gen-mission writes it: default mission
/// spec, 30 base images and an uplink outage over [50, 80) s.
inline scout::SimMissionConfig sim_mission(const std::filesystem::path& dir, double tau) {
    if (!std::filesystem::exists(dir / "mission" / "annotations.jsonl")) {
        scout::write_scene_dataset(dir / "mission", scout::generate_mission(scout::MissionSpec{}));
        scout::write_scene_dataset(dir / "base", scout::make_base_set(30, 11));
    }
    scout::SimMissionConfig c;
    c.robot.dataset = dir / "mission";
    c.robot.tau = tau;
    c.robot.mission_id = "sim";
    c.base_dataset = dir / "base";
    c.schedule.frame_interval_s = 1.0;
    c.schedule.uplink.latency_s = 0.2;
    c.schedule.uplink.outages = {{50.0, 80.0}};
    c.schedule.downlink.latency_s = 0.2;
    return c;
}

/// Bitwise equality of every committed field of two heads.
inline bool bit_identical(const scout::HeadParams& a, const scout::HeadParams& b) {
    auto same = [](const auto& x, const auto& y) {
        return x.rows() == y.rows() && x.cols() == y.cols() &&
               std::memcmp(x.data(), y.data(), sizeof(double) * static_cast<std::size_t>(x.size())) == 0;
    };
    return a.version == b.version && a.class_names == b.class_names && a.base_count == b.base_count &&
           std::memcmp(&a.alpha, &b.alpha, sizeof(double)) == 0 && same(a.class_weights, b.class_weights) &&
           same(a.box_weights, b.box_weights) && same(a.box_bias, b.box_bias);
}

} // namespace fixture

#endif // SCOUT_TESTS_FIXTURES_HPP
