#include "scout/robot.hpp"

#include <algorithm>
#include <set>

#include "scout/param_delta.hpp"

namespace scout {

void MissionConfig::validate() const {
    if (!(tau >= 0.0 && tau <= 1.0)) throw InvalidInput("tau must lie in [0, 1]");
    if (warmup < 0) throw InvalidInput("warmup count must be non-negative");
    if (buffer_capacity == 0) throw InvalidInput("candidate buffer needs a positive capacity");
    if (cache_size == 0) throw InvalidInput("frame cache needs a positive size");
}

MissionLog::MissionLog(const std::filesystem::path& path) : file_(std::in_place, path, std::ios::trunc) {
    if (!*file_) throw IoError("cannot open mission log " + path.string());
}

void MissionLog::append(nlohmann::json event) {
    std::lock_guard lock(mutex_);
    if (file_) {
        *file_ << event.dump() << '\n';
        file_->flush();
        if (!*file_) throw IoError("failed writing mission log");
    }
    events_.push_back(std::move(event));
}

std::vector<nlohmann::json> MissionLog::events() const {
    std::lock_guard lock(mutex_);
    return events_;
}

std::vector<nlohmann::json> MissionLog::read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read mission log " + path.string());
    std::vector<nlohmann::json> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            out.push_back(nlohmann::json::parse(line));
        } catch (const nlohmann::json::exception&) {
            throw InvalidInput(path.string() + ":" + std::to_string(number) + ": not valid JSON");
        }
    }
    return out;
}

namespace {

nlohmann::json box_json(const Box& b) { return nlohmann::json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

Box box_from_json(const nlohmann::json& j) {
    return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

} // namespace

MissionReport metrics_from_log(const std::vector<nlohmann::json>& events, const AnnotationMap& truth,
                               const std::string& mission_id) {
    MissionReport report;
    report.mission_id = mission_id;
    if (mission_id.empty() && !events.empty() && events.front().value("kind", "") == "start") {
        report.mission_id = events.front().value("mission_id", "");
    }

    std::vector<InterestSample> ranking;
    std::size_t sent = 0;
    std::vector<std::pair<std::string, Detection>> named_dets;
    std::vector<std::pair<std::string, GroundTruth>> named_gts;
    for (const auto& e : events) {
        const std::string kind = e.at("kind").get<std::string>();
        if (kind == "sent") {
            ++sent;
        } else if (kind == "end" && e.contains("wall_seconds")) {
            report.timings["wall_seconds"] = e["wall_seconds"].get<double>();
        } else if (kind == "frame") {
            const std::string id = e.at("frame_id").get<std::string>();
            const auto gt = truth.find(id);
            const bool interesting = gt != truth.end() && gt->second.interesting;
            ranking.push_back({id, e.at("score").get<double>(), interesting});
            for (const auto& d : e.at("detections")) {
                named_dets.push_back(
                    {d.at("class").get<std::string>(), {id, box_from_json(d.at("box")), 0, d.at("score").get<double>()}});
            }
            if (gt != truth.end()) {
                for (const auto& b : gt->second.boxes) named_gts.push_back({b.class_name, {id, b.box, 0}});
            }
        }
    }

    report.bandwidth_ratio = bandwidth_ratio(sent, ranking.size());
    if (std::any_of(ranking.begin(), ranking.end(), [](const InterestSample& s) { return s.interesting; })) {
        for (int delta : {1, 2, 3}) report.auc_op[delta] = auc_op(ranking, delta);
    }

    if (!named_gts.empty()) {
        std::set<std::string> names;
        for (const auto& [n, g] : named_gts) names.insert(n);
        for (const auto& [n, d] : named_dets) names.insert(n);
        const std::vector<std::string> index(names.begin(), names.end());
        auto id_of = [&](const std::string& n) {
            return static_cast<int>(std::lower_bound(index.begin(), index.end(), n) - index.begin());
        };
        std::vector<Detection> dets;
        std::vector<GroundTruth> gts;
        for (auto [n, d] : named_dets) {
            d.class_id = id_of(n);
            dets.push_back(std::move(d));
        }
        for (auto [n, g] : named_gts) {
            g.class_id = id_of(n);
            gts.push_back(std::move(g));
        }
        std::vector<int> classes(index.size());
        for (std::size_t c = 0; c < index.size(); ++c) classes[c] = static_cast<int>(c);
        const MapResult m = coco_map(dets, gts, classes);
        report.map = m.mean;
        for (const auto& [c, ap] : m.per_class) report.per_class_ap[index[static_cast<std::size_t>(c)]] = ap;
    }
    return report;
}

RobotNode::RobotNode(MissionConfig config, HeadParams head, MissionLog& log)
    : config_(std::move(config)),
      head_(std::move(head)),
      log_(log),
      memory_(config_.memory),
      buffer_(config_.buffer_capacity) {
    config_.validate();
    log_.append({{"t", 0.0},
                 {"kind", "start"},
                 {"robot_id", config_.robot_id},
                 {"mission_id", config_.mission_id},
                 {"tau", config_.tau},
                 {"warmup", config_.warmup},
                 {"head_version", head_.version}});
}

void RobotNode::warmup(const std::vector<Image>& frames, double t) {
    std::vector<FeatureTensor> features;
    features.reserve(frames.size());
    for (const auto& img : frames) features.push_back(extract_features(img, config_.pipeline.backbone));
    std::size_t written = 0;
    for (const auto& f : features) {
        try {
            memory_.write(f);
            ++written;
        } catch (const InvalidInput&) {
            // Blank frames carry nothing to remember.
        }
    }
    log_.append({{"t", t}, {"kind", "warmup"}, {"frames", frames.size()}, {"written", written}});
}

FrameOutcome RobotNode::process(const std::string& frame_id, const Image& image, double t) {
    FrameOutcome out;
    out.frame_id = frame_id;
    const FrameAnalysis frame = analyze_frame(image, config_.pipeline);
    InterestResult interest;
    try {
        interest = memory_.process_frame(frame.features);
    } catch (const InvalidInput& e) {
        out.skipped = true;
        log_.append({{"t", t}, {"kind", "skipped"}, {"frame_id", frame_id}, {"reason", e.what()}});
        return out;
    }
    ++scored_;
    out.score = interest.score;
    out.candidate = interest.score >= config_.tau;
    if (out.candidate) {
        if (auto evicted = buffer_.push(frame_id, out.score, encode_png(image))) {
            log_.append({{"t", t}, {"kind", "evicted"}, {"frame_id", evicted->frame_id}, {"score", evicted->score}});
        }
        auto known = std::find_if(cache_.begin(), cache_.end(), [&](const Cached& c) { return c.frame_id == frame_id; });
        if (known != cache_.end()) {
            known->features = frame.features;
        } else {
            if (cache_.size() == config_.cache_size) {
                log_.append({{"t", t}, {"kind", "cache_evicted"}, {"frame_id", cache_.front().frame_id}});
                cache_.pop_front();
            }
            cache_.push_back({frame_id, frame.features});
        }
    }

    out.detections = detect(head_, frame.proposals, frame.dims, config_.pipeline.detect);
    nlohmann::json dets = nlohmann::json::array();
    for (const auto& d : out.detections) {
        dets.push_back({{"class", head_.class_names[static_cast<std::size_t>(d.class_id)]},
                        {"score", d.score},
                        {"box", box_json(d.box)}});
    }
    log_.append({{"t", t},
                 {"kind", "frame"},
                 {"frame_id", frame_id},
                 {"score", out.score},
                 {"candidate", out.candidate},
                 {"head_version", head_.version},
                 {"detections", std::move(dets)}});
    return out;
}

std::vector<Bytes> RobotNode::drain_candidates(double t) {
    std::vector<Bytes> out;
    for (auto& c : buffer_.drain_highest(buffer_.capacity())) {
        Bytes frame = encode(make_candidate(c.frame_id, c.score, std::move(c.payload)));
        log_.append({{"t", t}, {"kind", "sent"}, {"frame_id", c.frame_id}, {"score", c.score}, {"bytes", frame.size()}});
        out.push_back(std::move(frame));
    }
    return out;
}

std::optional<Message> RobotNode::handle(const Message& msg, double t) {
    switch (msg.kind) {
    case MessageKind::kFeedbackUninteresting: {
        const std::string id = msg.header.at("frame_id").get<std::string>();
        const auto it = std::find_if(cache_.begin(), cache_.end(), [&](const Cached& c) { return c.frame_id == id; });
        if (it == cache_.end()) {
            log_.append({{"t", t}, {"kind", "writeback"}, {"frame_id", id}, {"applied", false},
                         {"warning", "frame not cached"}});
            return std::nullopt;
        }
        memory_.write(it->features);
        log_.append({{"t", t}, {"kind", "writeback"}, {"frame_id", id}, {"applied", true}});
        return std::nullopt;
    }
    case MessageKind::kParamUpdate: {
        const std::uint64_t before = head_.version;
        try {
            head_ = apply_delta(head_, param_update_delta(msg));
        } catch (const SyncError& e) {
            log_.append({{"t", t}, {"kind", "param_update"}, {"applied", false}, {"error", e.what()}});
            return std::nullopt;
        }
        log_.append({{"t", t},
                     {"kind", "param_update"},
                     {"version", head_.version},
                     {"applied", head_.version != before},
                     {"classes", head_.classes()}});
        return make_ack(head_.version);
    }
    case MessageKind::kFeedbackAnnotation:
        log_.append({{"t", t},
                     {"kind", "annotation"},
                     {"frame_id", msg.header.at("frame_id")},
                     {"boxes", annotation_boxes(msg).size()}});
        return std::nullopt;
    default:
        log_.append({{"t", t}, {"kind", "unexpected"}, {"message", to_string(msg.kind)}});
        return std::nullopt;
    }
}

void RobotNode::finish(double t, double wall_seconds) {
    log_.append({{"t", t}, {"kind", "end"}, {"frames", scored_}, {"wall_seconds", wall_seconds}});
}

MissionConfig mission_config_from_json(const nlohmann::json& j, MissionConfig base) {
    try {
        base.warmup = j.value("warmup", base.warmup);
        base.tau = j.value("tau", base.tau);
        base.buffer_capacity = j.value("buffer_capacity", base.buffer_capacity);
        base.cache_size = j.value("cache_size", base.cache_size);
        base.memory.cubes = j.value("cubes", base.memory.cubes);
        base.memory.gamma_write = j.value("gamma_write", base.memory.gamma_write);
        base.memory.gamma_read = j.value("gamma_read", base.memory.gamma_read);
        base.robot_id = j.value("robot_id", base.robot_id);
        base.mission_id = j.value("mission_id", base.mission_id);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidInput(std::string("malformed mission config: ") + e.what());
    }
    base.validate();
    return base;
}

} // namespace scout
