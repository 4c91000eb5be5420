#ifndef SCOUT_ROBOT_HPP
#define SCOUT_ROBOT_HPP

#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scout/dataset.hpp"
#include "scout/head.hpp"
#include "scout/metrics.hpp"
#include "scout/pipeline.hpp"
#include "scout/protocol.hpp"
#include "scout/visual_memory.hpp"

namespace scout {

struct MissionConfig {
    std::filesystem::path dataset;
    int warmup = 20;
    double tau = 0.75;
    MemoryConfig memory;
    std::size_t buffer_capacity = 64;
    std::size_t cache_size = 256;
    PipelineConfig pipeline;
    std::string robot_id = "robot";
    std::string mission_id = "mission";

    /// Throws InvalidInput for tau outside [0, 1], a negative warmup or
    /// a zero-sized buffer or cache.
    void validate() const;
};

/// Append-only JSONL record of a mission. Every event carries "t" and
/// "kind". Safe to append from several threads.
class MissionLog {
public:
    MissionLog() = default;
    /// Also writes each event to `path`, truncating an existing file.
    explicit MissionLog(const std::filesystem::path& path);

    void append(nlohmann::json event);
    std::vector<nlohmann::json> events() const;

    /// Throws IoError when unreadable and InvalidInput on a malformed line.
    static std::vector<nlohmann::json> read(const std::filesystem::path& path);

private:
    mutable std::mutex mutex_;
    std::vector<nlohmann::json> events_;
    std::optional<std::ofstream> file_;
};

/// Metrics of a mission recomputed from its log and the ground truth:
/// bandwidth ratio (sent candidates over scored frames), AUC-OP at
/// delta 1, 2 and 3 over the scored frames, and COCO-style AP of the
/// onboard detections per class. Metrics undefined for the mission (no
/// interesting frame, no box) are left out. The mission id comes from the
/// log's start event unless one is given.
MissionReport metrics_from_log(const std::vector<nlohmann::json>& events, const AnnotationMap& truth,
                               const std::string& mission_id = {});

struct FrameOutcome {
    std::string frame_id;
    double score = 0.0;
    bool candidate = false;
    bool skipped = false;
    std::vector<Detection2D> detections;
};

/// Onboard state of the robot: visual memory, candidate buffer, cache of
/// recent candidates for write-backs, and the detection head. The pipeline
/// calls process/handle; a sender may call drain_candidates concurrently.
class RobotNode {
public:
    RobotNode(MissionConfig config, HeadParams head, MissionLog& log);

    /// Writes the frames into memory without scoring them.
    void warmup(const std::vector<Image>& frames, double t);

    FrameOutcome process(const std::string& frame_id, const Image& image, double t);

    /// Removes every buffered candidate, highest score first, and returns
    /// them as encoded CANDIDATE frames.
    std::vector<Bytes> drain_candidates(double t);

    /// Applies a message from the station. A PARAM_UPDATE is answered with
    /// an ACK carrying the onboard version.
    std::optional<Message> handle(const Message& msg, double t);

    Message hello() const { return make_hello(config_.robot_id, head_.version); }

    /// Marks the end of the stream in the log.
    void finish(double t, double wall_seconds);

    const MissionConfig& config() const { return config_; }
    const HeadParams& head() const { return head_; }
    const VisualMemory& memory() const { return memory_; }
    std::size_t buffered() const { return buffer_.size(); }
    std::size_t cached() const { return cache_.size(); }
    std::size_t frames_scored() const { return scored_; }

private:
    struct Cached {
        std::string frame_id;
        FeatureTensor features;
    };

    MissionConfig config_;
    HeadParams head_;
    MissionLog& log_;
    VisualMemory memory_;
    CandidateBuffer buffer_;
    std::deque<Cached> cache_;
    std::size_t scored_ = 0;
};

/// Builds the robot's MissionConfig defaults from a JSON object with
/// optional keys warmup, tau, buffer_capacity, cache_size, cubes,
/// gamma_write, gamma_read, robot_id.
MissionConfig mission_config_from_json(const nlohmann::json& j, MissionConfig base = {});

} // namespace scout

#endif // SCOUT_ROBOT_HPP
