#ifndef SCOUT_PROTOCOL_HPP
#define SCOUT_PROTOCOL_HPP

#include <cstdint>
#include <deque>
#include <limits>
#include <mutex>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scout/bytes.hpp"
#include "scout/param_delta.hpp"
#include "scout/tensor.hpp"

namespace scout {

enum class MessageKind {
    kHello,
    kCandidate,
    kFeedbackUninteresting,
    kFeedbackAnnotation,
    kParamUpdate,
    kAck,
};

std::string to_string(MessageKind kind);
/// Throws ProtocolError for names outside the protocol.
MessageKind kind_from_string(const std::string& name);

struct Message {
    MessageKind kind = MessageKind::kHello;
    nlohmann::json header = nlohmann::json::object();
    Bytes blob;

    friend bool operator==(const Message&, const Message&) = default;
};

/// Frame layout: u32 big-endian length of the remainder, a UTF-8 JSON header
/// object carrying "kind" and "blob_len", then blob_len raw bytes.
Bytes encode(const Message& msg);

/// Decodes exactly one frame. Truncated or over-long input is a
/// FramingError; a well-framed message of an unknown kind or with missing
/// required fields is a ProtocolError.
Message decode(std::span<const std::uint8_t> frame);

/// Incremental decoder for a byte stream carrying back-to-back frames.
class FrameDecoder {
public:
    void feed(std::span<const std::uint8_t> bytes);

    /// Next complete message, or nullopt when more bytes are needed. A
    /// complete frame that fails protocol validation is consumed before the
    /// ProtocolError propagates, so the stream stays aligned.
    std::optional<Message> next();

    std::size_t buffered() const { return buffer_.size(); }

private:
    Bytes buffer_;
};

struct AnnotatedBox {
    std::string class_name;
    Box box;

    friend bool operator==(const AnnotatedBox&, const AnnotatedBox&) = default;
};

Message make_hello(const std::string& robot_id, std::uint64_t head_version);
Message make_candidate(const std::string& frame_id, double score, Bytes image);
Message make_feedback_uninteresting(const std::string& frame_id);
Message make_feedback_annotation(const std::string& frame_id, const std::vector<AnnotatedBox>& boxes);
Message make_param_update(const ParamDelta& delta);
Message make_ack(std::uint64_t version);

std::vector<AnnotatedBox> annotation_boxes(const Message& msg);
ParamDelta param_update_delta(const Message& msg);

struct Candidate {
    std::string frame_id;
    double score = 0.0;
    Bytes payload;
    std::uint64_t sequence = 0; // insertion order, lower is older
};

/// Bounded score-ordered store of candidates awaiting transmission. When
/// full, the lowest score goes first (older frame on ties). Thread-safe.
class CandidateBuffer {
public:
    explicit CandidateBuffer(std::size_t capacity = 64);

    /// Returns the evicted entry, which may be the pushed frame itself. A
    /// known frame_id is updated in place and keeps the higher score.
    std::optional<Candidate> push(const std::string& frame_id, double score, Bytes payload);

    /// Removes up to n entries, highest score first, older first on ties.
    std::vector<Candidate> drain_highest(std::size_t n);

    std::size_t size() const;
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return size() == 0; }
    std::optional<double> min_score() const;

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::vector<Candidate> entries_;
    std::uint64_t next_sequence_ = 0;
};

/// Decides when the station pushes its head to the robot.
class SyncScheduler {
public:
    explicit SyncScheduler(double period_s = 30.0);

    bool sync_due(double now, std::uint64_t latest_version) const;
    void mark_sent(double now) { last_sync_ = now; }
    void acknowledge(std::uint64_t version);

    double period() const { return period_; }
    std::uint64_t acknowledged() const { return acknowledged_; }

private:
    double period_;
    double last_sync_ = -std::numeric_limits<double>::infinity();
    std::uint64_t acknowledged_ = 0;
};

struct Outage {
    double start = 0.0;
    double end = 0.0;
};

struct LinkConfig {
    std::vector<Outage> outages;
    double latency_s = 0.0;
    double bandwidth_bps = 1e6; // bytes per second
    double jitter_s = 0.0;
    std::uint64_t seed = 0;
};

struct Delivery {
    double time = 0.0;
    Bytes bytes;
};

/// One direction of a simulated link. Bytes leave FIFO at the bandwidth cap
/// and only while the link is up; each message arrives latency (plus seeded
/// jitter, never reordering) after its last byte left.
class LinkSim {
public:
    explicit LinkSim(LinkConfig config);

    void enqueue(Bytes message, double at);

    /// Advances the link to t1 and returns every message that arrived in
    /// (previous t1, t1]. Requires t1 >= the previous call's t1.
    std::vector<Delivery> transfer(double t1);

    bool is_up(double t) const;
    /// Start of the next up interval at or after t.
    double next_up(double t) const;

    std::size_t queued() const { return queue_.size(); }
    std::size_t in_flight() const { return flight_.size(); }
    bool idle() const { return queue_.empty() && flight_.empty(); }
    double now() const { return now_; }
    std::uint64_t bytes_delivered() const { return bytes_delivered_; }

private:
    struct Pending {
        Bytes bytes;
        double ready = 0.0;
        double remaining = 0.0;
    };

    LinkConfig config_;
    std::mt19937_64 rng_;
    std::deque<Pending> queue_;
    std::deque<Delivery> flight_;
    double now_ = 0.0;
    double last_arrival_ = 0.0;
    std::uint64_t bytes_delivered_ = 0;
};

/// Parses {"outages": [[start, end], ...], "latency_s", "bandwidth_bps",
/// "jitter_s", "seed"}; absent keys keep their defaults.
LinkConfig link_config_from_json(const nlohmann::json& j);

} // namespace scout

#endif // SCOUT_PROTOCOL_HPP
