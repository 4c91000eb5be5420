#include "scout/protocol.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace scout {

namespace {

constexpr std::array<std::pair<MessageKind, const char*>, 6> kKindNames{{
    {MessageKind::kHello, "HELLO"},
    {MessageKind::kCandidate, "CANDIDATE"},
    {MessageKind::kFeedbackUninteresting, "FEEDBACK_UNINTERESTING"},
    {MessageKind::kFeedbackAnnotation, "FEEDBACK_ANNOTATION"},
    {MessageKind::kParamUpdate, "PARAM_UPDATE"},
    {MessageKind::kAck, "ACK"},
}};

constexpr std::size_t kMaxFrame = 256u << 20;

// Offset one past the closing brace of the JSON object starting at data[0].
std::size_t json_object_end(std::span<const std::uint8_t> data) {
    if (data.empty() || data[0] != '{') throw ProtocolError("frame header is not a JSON object");
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const char c = static_cast<char>(data[i]);
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{' || c == '[') {
            ++depth;
        } else if (c == '}' || c == ']') {
            if (--depth == 0) return i + 1;
        }
    }
    throw ProtocolError("unterminated frame header");
}

void require_string(const nlohmann::json& h, const char* key) {
    if (!h.contains(key) || !h[key].is_string()) {
        throw ProtocolError(std::string("header field '") + key + "' missing or not a string");
    }
}

void require_number(const nlohmann::json& h, const char* key) {
    if (!h.contains(key) || !h[key].is_number()) {
        throw ProtocolError(std::string("header field '") + key + "' missing or not a number");
    }
}

Box box_from_json(const nlohmann::json& b) {
    for (const char* k : {"x_min", "y_min", "x_max", "y_max"}) require_number(b, k);
    return Box{b["x_min"].get<double>(), b["y_min"].get<double>(), b["x_max"].get<double>(),
               b["y_max"].get<double>()};
}

void validate(const Message& m) {
    const auto& h = m.header;
    switch (m.kind) {
    case MessageKind::kHello:
        require_string(h, "robot_id");
        require_number(h, "head_version");
        break;
    case MessageKind::kCandidate: {
        require_string(h, "frame_id");
        require_number(h, "score");
        const double s = h["score"].get<double>();
        if (!(s >= 0.0 && s <= 1.0)) throw ProtocolError("candidate score outside [0, 1]");
        if (m.blob.empty()) throw ProtocolError("candidate without image bytes");
        break;
    }
    case MessageKind::kFeedbackUninteresting:
        require_string(h, "frame_id");
        break;
    case MessageKind::kFeedbackAnnotation:
        require_string(h, "frame_id");
        if (!h.contains("boxes") || !h["boxes"].is_array() || h["boxes"].empty()) {
            throw ProtocolError("annotation without boxes");
        }
        for (const auto& b : h["boxes"]) {
            require_string(b, "class");
            if (!box_from_json(b).valid()) throw ProtocolError("annotation box is empty");
        }
        break;
    case MessageKind::kParamUpdate:
        try {
            decode_delta(h, m.blob);
        } catch (const SyncError& e) {
            throw ProtocolError(std::string("bad parameter update: ") + e.what());
        }
        break;
    case MessageKind::kAck:
        require_number(h, "version");
        break;
    }
}

} // namespace

std::string to_string(MessageKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) return name;
    }
    throw ProtocolError("unknown message kind");
}

MessageKind kind_from_string(const std::string& name) {
    for (const auto& [k, n] : kKindNames) {
        if (name == n) return k;
    }
    throw ProtocolError("unknown message kind '" + name + "'");
}

Bytes encode(const Message& msg) {
    validate(msg);
    nlohmann::json header = msg.header;
    header["kind"] = to_string(msg.kind);
    header["blob_len"] = msg.blob.size();
    std::string text;
    try {
        text = header.dump();
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("header cannot be serialized: ") + e.what());
    }
    const std::size_t body = text.size() + msg.blob.size();
    if (body > kMaxFrame) throw ProtocolError("message exceeds maximum frame size");

    Bytes out;
    out.reserve(4 + body);
    put_u32_be(out, static_cast<std::uint32_t>(body));
    out.insert(out.end(), text.begin(), text.end());
    out.insert(out.end(), msg.blob.begin(), msg.blob.end());
    return out;
}

Message decode(std::span<const std::uint8_t> frame) {
    ByteReader reader(frame);
    const std::uint32_t body = reader.u32_be();
    if (body > kMaxFrame) throw FramingError("declared frame length is implausible");
    if (reader.remaining() < body) throw FramingError("truncated frame");
    if (reader.remaining() > body) throw FramingError("trailing bytes after frame");
    const auto rest = frame.subspan(4, body);

    const std::size_t header_len = json_object_end(rest);
    nlohmann::json header;
    try {
        header = nlohmann::json::parse(rest.begin(), rest.begin() + static_cast<std::ptrdiff_t>(header_len));
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("frame header is not valid JSON: ") + e.what());
    }
    if (!header.contains("kind") || !header["kind"].is_string()) throw ProtocolError("frame has no kind");
    if (!header.contains("blob_len") || !header["blob_len"].is_number_unsigned()) {
        throw ProtocolError("frame has no blob_len");
    }
    const auto blob_len = header["blob_len"].get<std::uint64_t>();
    if (header_len + blob_len != body) throw ProtocolError("blob_len disagrees with frame length");

    Message m;
    m.kind = kind_from_string(header["kind"].get<std::string>());
    header.erase("kind");
    header.erase("blob_len");
    m.header = std::move(header);
    m.blob.assign(rest.begin() + static_cast<std::ptrdiff_t>(header_len), rest.end());
    validate(m);
    return m;
}

void FrameDecoder::feed(std::span<const std::uint8_t> bytes) { buffer_.insert(buffer_.end(), bytes.begin(), bytes.end()); }

std::optional<Message> FrameDecoder::next() {
    if (buffer_.size() < 4) return std::nullopt;
    ByteReader reader(buffer_);
    const std::uint32_t body = reader.u32_be();
    if (body > kMaxFrame) throw FramingError("declared frame length is implausible");
    if (buffer_.size() < 4 + static_cast<std::size_t>(body)) return std::nullopt;
    Bytes frame(buffer_.begin(), buffer_.begin() + 4 + body);
    buffer_.erase(buffer_.begin(), buffer_.begin() + 4 + body);
    return decode(frame);
}

Message make_hello(const std::string& robot_id, std::uint64_t head_version) {
    return {MessageKind::kHello, {{"robot_id", robot_id}, {"head_version", head_version}}, {}};
}

Message make_candidate(const std::string& frame_id, double score, Bytes image) {
    return {MessageKind::kCandidate, {{"frame_id", frame_id}, {"score", score}}, std::move(image)};
}

Message make_feedback_uninteresting(const std::string& frame_id) {
    return {MessageKind::kFeedbackUninteresting, {{"frame_id", frame_id}}, {}};
}

Message make_feedback_annotation(const std::string& frame_id, const std::vector<AnnotatedBox>& boxes) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& b : boxes) {
        arr.push_back({{"class", b.class_name},
                       {"x_min", b.box.x_min},
                       {"y_min", b.box.y_min},
                       {"x_max", b.box.x_max},
                       {"y_max", b.box.y_max}});
    }
    return {MessageKind::kFeedbackAnnotation, {{"frame_id", frame_id}, {"boxes", arr}}, {}};
}

Message make_param_update(const ParamDelta& delta) {
    nlohmann::json h = delta_header(delta);
    h.erase("blob_len");
    return {MessageKind::kParamUpdate, h, delta_blob(delta)};
}

Message make_ack(std::uint64_t version) { return {MessageKind::kAck, {{"version", version}}, {}}; }

std::vector<AnnotatedBox> annotation_boxes(const Message& msg) {
    if (msg.kind != MessageKind::kFeedbackAnnotation) throw ProtocolError("not an annotation message");
    std::vector<AnnotatedBox> out;
    for (const auto& b : msg.header.at("boxes")) out.push_back({b.at("class").get<std::string>(), box_from_json(b)});
    return out;
}

ParamDelta param_update_delta(const Message& msg) {
    if (msg.kind != MessageKind::kParamUpdate) throw ProtocolError("not a parameter update");
    nlohmann::json h = msg.header;
    h["blob_len"] = msg.blob.size();
    return decode_delta(h, msg.blob);
}

CandidateBuffer::CandidateBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw InvalidInput("candidate buffer capacity must be positive");
}

std::optional<Candidate> CandidateBuffer::push(const std::string& frame_id, double score, Bytes payload) {
    if (!(score >= 0.0 && score <= 1.0)) throw InvalidInput("candidate score must lie in [0, 1]");
    std::lock_guard lock(mutex_);
    for (auto& e : entries_) {
        if (e.frame_id == frame_id) {
            e.score = std::max(e.score, score);
            e.payload = std::move(payload);
            return std::nullopt;
        }
    }
    entries_.push_back({frame_id, score, std::move(payload), next_sequence_++});
    if (entries_.size() <= capacity_) return std::nullopt;

    const auto victim = std::min_element(entries_.begin(), entries_.end(), [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score < b.score : a.sequence < b.sequence;
    });
    Candidate out = std::move(*victim);
    entries_.erase(victim);
    return out;
}

std::vector<Candidate> CandidateBuffer::drain_highest(std::size_t n) {
    std::lock_guard lock(mutex_);
    std::sort(entries_.begin(), entries_.end(), [](const Candidate& a, const Candidate& b) {
        return a.score != b.score ? a.score > b.score : a.sequence < b.sequence;
    });
    const std::size_t k = std::min(n, entries_.size());
    std::vector<Candidate> out(std::make_move_iterator(entries_.begin()),
                               std::make_move_iterator(entries_.begin() + static_cast<std::ptrdiff_t>(k)));
    entries_.erase(entries_.begin(), entries_.begin() + static_cast<std::ptrdiff_t>(k));
    return out;
}

std::size_t CandidateBuffer::size() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

std::optional<double> CandidateBuffer::min_score() const {
    std::lock_guard lock(mutex_);
    if (entries_.empty()) return std::nullopt;
    double m = entries_.front().score;
    for (const auto& e : entries_) m = std::min(m, e.score);
    return m;
}

SyncScheduler::SyncScheduler(double period_s) : period_(period_s) {
    if (!(period_s > 0.0)) throw InvalidInput("sync period must be positive");
}

bool SyncScheduler::sync_due(double now, std::uint64_t latest_version) const {
    return latest_version > acknowledged_ && now - last_sync_ >= period_;
}

void SyncScheduler::acknowledge(std::uint64_t version) { acknowledged_ = std::max(acknowledged_, version); }

LinkSim::LinkSim(LinkConfig config) : config_(std::move(config)), rng_(config_.seed) {
    if (!(config_.bandwidth_bps > 0.0)) throw InvalidInput("link bandwidth must be positive");
    if (config_.latency_s < 0.0 || config_.jitter_s < 0.0) throw InvalidInput("link delays must be non-negative");
    double prev_end = -std::numeric_limits<double>::infinity();
    for (const auto& o : config_.outages) {
        if (!(o.start < o.end)) throw InvalidInput("outage must have start < end");
        if (o.start < prev_end) throw InvalidInput("outages must be disjoint and ordered");
        prev_end = o.end;
    }
}

void LinkSim::enqueue(Bytes message, double at) {
    const double size = static_cast<double>(message.size());
    queue_.push_back({std::move(message), at, size});
}

bool LinkSim::is_up(double t) const {
    for (const auto& o : config_.outages) {
        if (t >= o.start && t < o.end) return false;
    }
    return true;
}

double LinkSim::next_up(double t) const {
    for (const auto& o : config_.outages) {
        if (t >= o.start && t < o.end) return o.end;
    }
    return t;
}

std::vector<Delivery> LinkSim::transfer(double t1) {
    if (t1 < now_) throw InvalidInput("link time cannot move backwards");
    double t = now_;
    while (!queue_.empty()) {
        Pending& head = queue_.front();
        t = std::max(t, head.ready);
        bool done = head.remaining <= 0.0;
        while (!done && t < t1) {
            if (!is_up(t)) {
                t = next_up(t);
                continue;
            }
            double up_end = t1;
            for (const auto& o : config_.outages) {
                if (o.start > t) {
                    up_end = std::min(up_end, o.start);
                    break;
                }
            }
            const double capacity = (up_end - t) * config_.bandwidth_bps;
            if (capacity >= head.remaining) {
                t += head.remaining / config_.bandwidth_bps;
                head.remaining = 0.0;
                done = true;
            } else {
                head.remaining -= capacity;
                t = up_end;
            }
        }
        if (!done) break;
        double arrival = t + config_.latency_s;
        if (config_.jitter_s > 0.0) arrival += std::uniform_real_distribution<double>(0.0, config_.jitter_s)(rng_);
        arrival = std::max(arrival, last_arrival_);
        last_arrival_ = arrival;
        flight_.push_back({arrival, std::move(head.bytes)});
        queue_.pop_front();
    }
    now_ = t1;

    std::vector<Delivery> out;
    while (!flight_.empty() && flight_.front().time <= t1) {
        bytes_delivered_ += flight_.front().bytes.size();
        out.push_back(std::move(flight_.front()));
        flight_.pop_front();
    }
    return out;
}

LinkConfig link_config_from_json(const nlohmann::json& j) {
    LinkConfig c;
    if (j.contains("outages")) {
        for (const auto& o : j["outages"]) c.outages.push_back({o.at(0).get<double>(), o.at(1).get<double>()});
    }
    c.latency_s = j.value("latency_s", c.latency_s);
    c.bandwidth_bps = j.value("bandwidth_bps", c.bandwidth_bps);
    c.jitter_s = j.value("jitter_s", c.jitter_s);
    c.seed = j.value("seed", c.seed);
    return c;
}

} // namespace scout
