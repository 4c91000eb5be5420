#ifndef SCOUT_STATION_HPP
#define SCOUT_STATION_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "scout/base_model.hpp"
#include "scout/dataset.hpp"
#include "scout/protocol.hpp"
#include "scout/training.hpp"

namespace scout {

enum class ReviewStatus { kPending, kInteresting, kUninteresting };
enum class Decision { kInteresting, kUninteresting };

std::string to_string(ReviewStatus status);
std::string to_string(Decision decision);
/// Accepts "interesting" and "uninteresting"; anything else is InvalidInput.
Decision decision_from_string(const std::string& text);

struct ReviewItem {
    std::string frame_id;
    Bytes image;
    double score = 0.0;
    double received_at = 0.0;
    ReviewStatus status = ReviewStatus::kPending;
};

/// Candidates in arrival order. A known frame id keeps its position and
/// takes the newer image and score while still pending.
class ReviewQueue {
public:
    /// Returns false when the frame id was already queued.
    bool enqueue(ReviewItem item);

    /// Oldest pending item.
    std::optional<ReviewItem> next_pending() const;
    const ReviewItem* find(const std::string& frame_id) const;

    /// Throws NotFound for an unknown id and ValidationError when the item
    /// was already decided.
    void resolve(const std::string& frame_id, ReviewStatus status);

    std::size_t size() const { return items_.size(); }
    std::size_t pending() const;
    std::size_t count(ReviewStatus status) const;

private:
    std::vector<ReviewItem> items_;
    std::map<std::string, std::size_t> index_;
    std::size_t first_pending_ = 0;
};

struct OracleAnswer {
    Decision decision = Decision::kUninteresting;
    std::vector<AnnotatedBox> boxes;
    std::string note; // why an interesting frame was declined, if it was
};

/// Scripted operator answering from ground truth with at most K shots per
/// class.
class OracleOperator {
public:
    OracleOperator(AnnotationMap truth, int shots_per_class = 3);

    OracleAnswer decide(const std::string& frame_id);

    int shots_given(const std::string& class_name) const;
    int budget() const { return budget_; }

private:
    AnnotationMap truth_;
    int budget_;
    std::map<std::string, int> given_;
};

/// Append-only JSONL event store. Each event gets a sequence number and a
/// time no earlier than the previous event's.
class EventStore {
public:
    /// Opens or creates the file. A trailing line that does not parse (a
    /// write cut short) is truncated away; see recovery_note().
    explicit EventStore(const std::filesystem::path& path);

    /// Throws IoError if the line cannot be written.
    nlohmann::json append(nlohmann::json event);

    const std::vector<nlohmann::json>& events() const { return events_; }
    const std::optional<std::string>& recovery_note() const { return recovery_note_; }
    const std::filesystem::path& path() const { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
    std::vector<nlohmann::json> events_;
    std::optional<std::string> recovery_note_;
    std::uint64_t next_seq_ = 0;
    double last_t_ = 0.0;
};

struct StoreReplay {
    std::uint64_t head_version = 0;
    std::vector<std::string> class_names;
    std::vector<NovelShot> shots;
    std::size_t decisions = 0;
};

/// Rebuilds the head version, the registered classes and the shot pool
/// from stored events.
StoreReplay replay_store(const std::vector<nlohmann::json>& events);

struct StationConfig {
    PipelineConfig pipeline;
    std::size_t cycle_steps = 200;
    FineTuneConfig fine_tune;
    int novel_ratio = 3;
    int shots_per_class = 3;
    double sync_period_s = 30.0;
    /// Cycles run after each change of the shot pool.
    int cycles_per_change = 3;
    std::uint64_t seed = 0;
};

struct DecisionResult {
    std::vector<Message> outbound;
    std::vector<std::string> new_classes;
    std::size_t shots_added = 0;
};

/// Base-station logic: review queue, shot pool, head, fine-tuning cycles
/// and synchronization. Methods may be called from several threads; at
/// most one training cycle runs at a time and it works on a snapshot of the
/// pool taken when it starts.
class Station {
public:
    Station(StationConfig config, BaseModel base, EventStore* store = nullptr);

    /// Handles an inbound robot message. Returns a reply if one is due.
    std::optional<Message> on_message(const Message& msg, double t);

    std::optional<ReviewItem> next_item() const;

    /// Applies an operator decision. Throws NotFound for an unknown frame,
    /// ValidationError when the frame was already decided, an interesting
    /// decision has no boxes or a box is unusable, and CapacityError when a
    /// new class would exceed the novel capacity. A failed decision changes
    /// nothing.
    DecisionResult decide(const std::string& frame_id, Decision decision, const std::vector<AnnotatedBox>& boxes,
                          double t);

    bool training_wanted() const;

    /// Runs one fine-tuning cycle when one is wanted. Returns a
    /// PARAM_UPDATE when a sync is due afterwards.
    std::optional<Message> run_training_cycle(double t);

    /// PARAM_UPDATE when the head is newer than the last acknowledged
    /// version and the sync period has elapsed.
    std::optional<Message> sync_if_due(double t);

    /// PARAM_UPDATE with the current head, regardless of the sync period.
    Message force_sync(double t);

    HeadParams head() const;
    std::size_t pool_size() const;
    std::size_t pending() const;
    std::uint64_t acknowledged_version() const;
    nlohmann::json status() const;

    /// Called with every recorded event (after it is stored).
    void set_listener(std::function<void(const nlohmann::json&)> listener);

private:
    void record(nlohmann::json event, double t);
    std::optional<Message> maybe_sync(double t);

    StationConfig config_;
    EventStore* store_;
    mutable std::mutex mutex_;
    std::mutex training_mutex_;
    ReviewQueue queue_;
    HeadParams head_;
    SamplePool pool_;
    SyncScheduler scheduler_;
    int cycles_pending_ = 0;
    std::uint64_t cycles_run_ = 0;
    std::size_t rollbacks_ = 0;
    std::size_t feedback_sent_ = 0;
    std::function<void(const nlohmann::json&)> listener_;
};

} // namespace scout

#endif // SCOUT_STATION_HPP
