#include "scout/station.hpp"

#include <algorithm>
#include <sstream>

#include "scout/image.hpp"
#include "scout/param_delta.hpp"

namespace scout {

std::string to_string(ReviewStatus status) {
    switch (status) {
    case ReviewStatus::kPending:
        return "pending";
    case ReviewStatus::kInteresting:
        return "interesting";
    case ReviewStatus::kUninteresting:
        return "uninteresting";
    }
    return "pending";
}

std::string to_string(Decision decision) {
    return decision == Decision::kInteresting ? "interesting" : "uninteresting";
}

Decision decision_from_string(const std::string& text) {
    if (text == "interesting") return Decision::kInteresting;
    if (text == "uninteresting") return Decision::kUninteresting;
    throw InvalidInput("decision must be interesting or uninteresting, got '" + text + "'");
}

bool ReviewQueue::enqueue(ReviewItem item) {
    if (const auto it = index_.find(item.frame_id); it != index_.end()) {
        ReviewItem& known = items_[it->second];
        if (known.status == ReviewStatus::kPending) {
            known.image = std::move(item.image);
            known.score = item.score;
        }
        return false;
    }
    item.status = ReviewStatus::kPending;
    index_.emplace(item.frame_id, items_.size());
    items_.push_back(std::move(item));
    return true;
}

std::optional<ReviewItem> ReviewQueue::next_pending() const {
    for (std::size_t i = first_pending_; i < items_.size(); ++i) {
        if (items_[i].status == ReviewStatus::kPending) return items_[i];
    }
    return std::nullopt;
}

const ReviewItem* ReviewQueue::find(const std::string& frame_id) const {
    const auto it = index_.find(frame_id);
    return it == index_.end() ? nullptr : &items_[it->second];
}

void ReviewQueue::resolve(const std::string& frame_id, ReviewStatus status) {
    const auto it = index_.find(frame_id);
    if (it == index_.end()) throw NotFound("no review item " + frame_id);
    ReviewItem& item = items_[it->second];
    if (item.status != ReviewStatus::kPending) throw ValidationError("frame " + frame_id + " was already decided");
    if (status == ReviewStatus::kPending) throw ValidationError("a decision cannot return an item to pending");
    item.status = status;
    while (first_pending_ < items_.size() && items_[first_pending_].status != ReviewStatus::kPending) {
        ++first_pending_;
    }
}

std::size_t ReviewQueue::pending() const { return count(ReviewStatus::kPending); }

std::size_t ReviewQueue::count(ReviewStatus status) const {
    return static_cast<std::size_t>(
        std::count_if(items_.begin(), items_.end(), [&](const ReviewItem& i) { return i.status == status; }));
}

OracleOperator::OracleOperator(AnnotationMap truth, int shots_per_class)
    : truth_(std::move(truth)), budget_(shots_per_class) {
    if (shots_per_class < 0) throw InvalidInput("shot budget must be non-negative");
}

OracleAnswer OracleOperator::decide(const std::string& frame_id) {
    OracleAnswer answer;
    const auto it = truth_.find(frame_id);
    if (it == truth_.end()) {
        answer.note = "no ground truth for frame";
        return answer;
    }
    const FrameAnnotation& gt = it->second;
    if (!gt.interesting) return answer;
    if (gt.boxes.empty()) {
        answer.note = "interesting frame has no boxes";
        return answer;
    }
    for (const auto& b : gt.boxes) {
        if (shots_given(b.class_name) >= budget_) {
            answer.note = "shot budget exhausted for " + b.class_name;
            return answer;
        }
    }
    answer.decision = Decision::kInteresting;
    for (const auto& b : gt.boxes) {
        ++given_[b.class_name];
        answer.boxes.push_back({b.class_name, b.box});
    }
    return answer;
}

int OracleOperator::shots_given(const std::string& class_name) const {
    const auto it = given_.find(class_name);
    return it == given_.end() ? 0 : it->second;
}

EventStore::EventStore(const std::filesystem::path& path) : path_(path) {
    std::error_code ec;
    if (std::filesystem::exists(path, ec)) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw IoError("cannot read event store " + path.string());
        std::stringstream buffer;
        buffer << in.rdbuf();
        const std::string text = buffer.str();

        std::size_t pos = 0, good_end = 0;
        while (pos < text.size()) {
            const std::size_t nl = text.find('\n', pos);
            const std::size_t end = nl == std::string::npos ? text.size() : nl;
            const std::string line = text.substr(pos, end - pos);
            const bool last = nl == std::string::npos || nl + 1 == text.size();
            if (!line.empty()) {
                nlohmann::json event;
                try {
                    event = nlohmann::json::parse(line);
                } catch (const nlohmann::json::exception&) {
                    if (!last) throw InvalidInput("event store " + path.string() + " is corrupt before its end");
                    recovery_note_ = "truncated a partial trailing line of " + std::to_string(line.size()) + " bytes";
                    break;
                }
                next_seq_ = event.value("seq", next_seq_) + 1;
                last_t_ = std::max(last_t_, event.value("t", last_t_));
                events_.push_back(std::move(event));
            }
            if (nl == std::string::npos) {
                good_end = text.size();
                break;
            }
            pos = nl + 1;
            good_end = pos;
        }
        if (good_end < text.size() || recovery_note_) {
            std::filesystem::resize_file(path, good_end, ec);
            if (ec) throw IoError("cannot truncate event store " + path.string());
        }
        if (good_end > 0 && text[good_end - 1] != '\n') {
            std::ofstream fix(path, std::ios::app);
            fix << '\n';
        }
    }
    out_.open(path, std::ios::app);
    if (!out_) throw IoError("cannot open event store " + path.string());
}

nlohmann::json EventStore::append(nlohmann::json event) {
    const double t = std::max(last_t_, event.value("t", last_t_));
    event["t"] = t;
    event["seq"] = next_seq_;
    out_ << event.dump() << '\n';
    out_.flush();
    if (!out_) throw IoError("failed writing event store " + path_.string());
    ++next_seq_;
    last_t_ = t;
    events_.push_back(event);
    return event;
}

namespace {

Box box_from(const nlohmann::json& j) {
    return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>()};
}

nlohmann::json box_json(const Box& b) { return nlohmann::json::array({b.x_min, b.y_min, b.x_max, b.y_max}); }

} // namespace

StoreReplay replay_store(const std::vector<nlohmann::json>& events) {
    StoreReplay r;
    for (const auto& e : events) {
        const std::string kind = e.at("kind").get<std::string>();
        if (e.contains("head_version")) r.head_version = std::max(r.head_version, e["head_version"].get<std::uint64_t>());
        if (kind == "decision") {
            ++r.decisions;
        } else if (kind == "class") {
            r.class_names.push_back(e.at("name").get<std::string>());
        } else if (kind == "shot") {
            NovelShot s;
            s.class_id = e.at("class_id").get<int>();
            s.image_ref = e.at("image_ref").get<std::string>();
            s.box = box_from(e.at("box"));
            s.source_frame_id = e.at("frame_id").get<std::string>();
            s.pooled.box = s.box;
            const auto& f = e.at("feature");
            s.pooled.vector.resize(static_cast<Eigen::Index>(f.size()));
            for (std::size_t i = 0; i < f.size(); ++i) s.pooled.vector[static_cast<Eigen::Index>(i)] = f[i].get<double>();
            r.shots.push_back(std::move(s));
        }
    }
    return r;
}

Station::Station(StationConfig config, BaseModel base, EventStore* store)
    : config_(std::move(config)), store_(store), head_(std::move(base.head)), scheduler_(config_.sync_period_s) {
    if (config_.novel_ratio < 1) throw InvalidInput("novel ratio must be at least 1");
    if (head_.dimension() != config_.pipeline.dimension()) {
        throw InvalidInput("base head dimension does not match the pooling configuration");
    }
    pool_.base = std::move(base.pool);
    pool_.novel_ratio = config_.novel_ratio;
    pool_.shots_per_class = config_.shots_per_class;
    // The robot starts from the same pretrained head.
    scheduler_.acknowledge(head_.version);
    std::lock_guard lock(mutex_);
    nlohmann::json classes = head_.class_names;
    record({{"kind", "start"}, {"head_version", head_.version}, {"classes", classes}, {"base_pool", pool_.base.size()}},
           0.0);
}

void Station::record(nlohmann::json event, double t) {
    event["t"] = t;
    if (store_) event = store_->append(std::move(event));
    if (listener_) listener_(event);
}

void Station::set_listener(std::function<void(const nlohmann::json&)> listener) {
    std::lock_guard lock(mutex_);
    listener_ = std::move(listener);
}

std::optional<Message> Station::on_message(const Message& msg, double t) {
    std::lock_guard lock(mutex_);
    switch (msg.kind) {
    case MessageKind::kCandidate: {
        ReviewItem item;
        item.frame_id = msg.header.at("frame_id").get<std::string>();
        item.score = msg.header.at("score").get<double>();
        item.image = msg.blob;
        item.received_at = t;
        const bool fresh = queue_.enqueue(std::move(item));
        record({{"kind", "candidate"},
                {"frame_id", msg.header["frame_id"]},
                {"score", msg.header["score"]},
                {"duplicate", !fresh},
                {"pending", queue_.pending()}},
               t);
        return std::nullopt;
    }
    case MessageKind::kHello: {
        const auto robot_version = msg.header.at("head_version").get<std::uint64_t>();
        record({{"kind", "hello"}, {"robot_id", msg.header.at("robot_id")}, {"robot_version", robot_version}}, t);
        if (robot_version >= head_.version) return std::nullopt;
        scheduler_.mark_sent(t);
        record({{"kind", "delta"}, {"head_version", head_.version}, {"forced", true}}, t);
        return make_param_update(snapshot_delta(head_));
    }
    case MessageKind::kAck: {
        const auto version = msg.header.at("version").get<std::uint64_t>();
        scheduler_.acknowledge(version);
        record({{"kind", "ack"}, {"version", version}}, t);
        return std::nullopt;
    }
    default:
        record({{"kind", "unexpected"}, {"message", to_string(msg.kind)}}, t);
        return std::nullopt;
    }
}

std::optional<ReviewItem> Station::next_item() const {
    std::lock_guard lock(mutex_);
    return queue_.next_pending();
}

DecisionResult Station::decide(const std::string& frame_id, Decision decision, const std::vector<AnnotatedBox>& boxes,
                               double t) {
    std::lock_guard lock(mutex_);
    const ReviewItem* item = queue_.find(frame_id);
    if (!item) throw NotFound("no review item " + frame_id);
    if (item->status != ReviewStatus::kPending) throw ValidationError("frame " + frame_id + " was already decided");

    DecisionResult result;
    nlohmann::json box_list = nlohmann::json::array();
    for (const auto& b : boxes) box_list.push_back({{"class", b.class_name}, {"box", box_json(b.box)}});

    if (decision == Decision::kUninteresting) {
        queue_.resolve(frame_id, ReviewStatus::kUninteresting);
        ++feedback_sent_;
        record({{"kind", "decision"}, {"frame_id", frame_id}, {"decision", "uninteresting"}, {"boxes", box_list}}, t);
        result.outbound.push_back(make_feedback_uninteresting(frame_id));
        return result;
    }

    if (boxes.empty()) throw ValidationError("an interesting decision needs at least one box");
    for (const auto& b : boxes) {
        if (b.class_name.empty()) throw ValidationError("every box needs a class name");
        if (!b.box.valid() || b.box.x_min < 0 || b.box.y_min < 0) {
            throw ValidationError("box for " + b.class_name + " is not a valid rectangle");
        }
    }

    Image image;
    try {
        image = decode_image(item->image);
    } catch (const Error& e) {
        throw ValidationError(std::string("candidate image cannot be decoded: ") + e.what());
    }
    const FrameAnalysis frame{extract_features(image, config_.pipeline.backbone), ImageDims{image.width, image.height},
                              {}};
    std::vector<ProposalFeature> pooled;
    for (const auto& b : boxes) {
        try {
            pooled.push_back(pool_box(frame, b.box, config_.pipeline));
        } catch (const InvalidInput& e) {
            throw ValidationError("box for " + b.class_name + " lies outside the image: " + e.what());
        }
    }

    HeadParams next = head_;
    std::vector<int> class_ids;
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const bool known = next.find_class(boxes[i].class_name) >= 0;
        auto [updated, id] = register_novel_class(next, boxes[i].class_name, pooled[i].vector);
        next = std::move(updated);
        class_ids.push_back(id);
        if (!known) result.new_classes.push_back(boxes[i].class_name);
    }

    std::string image_ref;
    if (store_) {
        const auto dir = std::filesystem::path(store_->path().string() + ".images");
        std::filesystem::create_directories(dir);
        image_ref = (dir / (frame_id + ".png")).string();
        write_file(image_ref, item->image);
    }

    queue_.resolve(frame_id, ReviewStatus::kInteresting);
    head_ = std::move(next);
    record({{"kind", "decision"}, {"frame_id", frame_id}, {"decision", "interesting"}, {"boxes", box_list}}, t);
    for (const auto& name : result.new_classes) {
        record({{"kind", "class"}, {"name", name}, {"class_id", head_.find_class(name)}, {"head_version", head_.version}},
               t);
    }
    for (std::size_t i = 0; i < boxes.size(); ++i) {
        NovelShot shot;
        shot.class_id = class_ids[i];
        shot.image_ref = image_ref;
        shot.box = boxes[i].box;
        shot.pooled = pooled[i];
        shot.source_frame_id = frame_id;
        std::vector<double> feature(shot.pooled.vector.data(), shot.pooled.vector.data() + shot.pooled.vector.size());
        record({{"kind", "shot"},
                {"frame_id", frame_id},
                {"class", boxes[i].class_name},
                {"class_id", shot.class_id},
                {"box", box_json(shot.box)},
                {"image_ref", image_ref},
                {"feature", feature},
                {"pool", pool_.novel.size() + 1}},
               t);
        pool_.novel.push_back(std::move(shot));
        ++result.shots_added;
    }
    cycles_pending_ = config_.cycles_per_change;
    result.outbound.push_back(make_feedback_annotation(frame_id, boxes));
    return result;
}

bool Station::training_wanted() const {
    std::lock_guard lock(mutex_);
    return cycles_pending_ > 0 && !pool_.novel.empty();
}

std::optional<Message> Station::run_training_cycle(double t) {
    std::lock_guard training(training_mutex_);
    HeadParams start;
    SamplePool pool;
    std::uint64_t cycle = 0;
    {
        std::lock_guard lock(mutex_);
        if (cycles_pending_ <= 0 || pool_.novel.empty()) return std::nullopt;
        start = head_;
        pool = pool_;
        cycle = cycles_run_++;
        --cycles_pending_;
        record({{"kind", "cycle_start"}, {"cycle", cycle}, {"pool", pool.novel.size()}}, t);
    }

    FineTuneConfig ft = config_.fine_tune;
    ft.step_budget = config_.cycle_steps;
    std::mt19937_64 rng(config_.seed * 1000003ULL + cycle);
    FineTuner tuner(ft);
    std::optional<HeadParams> trained;
    std::string failure;
    try {
        trained = tuner.run(start, pool, rng);
    } catch (const TrainingDiverged& e) {
        failure = e.what();
    }

    std::lock_guard lock(mutex_);
    if (!trained) {
        ++rollbacks_;
        record({{"kind", "rollback"}, {"cycle", cycle}, {"reason", failure}, {"head_version", head_.version}}, t);
        return std::nullopt;
    }
    if (head_.version != start.version) {
        // Classes registered while the cycle ran keep their fresh rows; the
        // trained rows replace the ones the cycle started from.
        HeadParams merged = head_;
        const Eigen::Index n = start.classes();
        merged.class_weights.topRows(n) = trained->class_weights.topRows(n);
        merged.class_weights.row(merged.background_row()) = trained->class_weights.row(trained->background_row());
        merged.box_weights.topRows(4 * n) = trained->box_weights;
        merged.box_bias.head(4 * n) = trained->box_bias;
        merged.version = head_.version + 1;
        trained = std::move(merged);
    }
    head_ = std::move(*trained);
    record({{"kind", "cycle"},
            {"cycle", cycle},
            {"steps", tuner.steps_taken()},
            {"loss", tuner.last_loss()},
            {"pool", pool.novel.size()},
            {"head_version", head_.version}},
           t);
    return maybe_sync(t);
}

std::optional<Message> Station::maybe_sync(double t) {
    if (!scheduler_.sync_due(t, head_.version)) return std::nullopt;
    scheduler_.mark_sent(t);
    record({{"kind", "delta"}, {"head_version", head_.version}, {"forced", false}}, t);
    return make_param_update(snapshot_delta(head_));
}

std::optional<Message> Station::sync_if_due(double t) {
    std::lock_guard lock(mutex_);
    if (head_.version <= scheduler_.acknowledged()) return std::nullopt;
    return maybe_sync(t);
}

Message Station::force_sync(double t) {
    std::lock_guard lock(mutex_);
    scheduler_.mark_sent(t);
    record({{"kind", "delta"}, {"head_version", head_.version}, {"forced", true}}, t);
    return make_param_update(snapshot_delta(head_));
}

HeadParams Station::head() const {
    std::lock_guard lock(mutex_);
    return head_;
}

std::size_t Station::pool_size() const {
    std::lock_guard lock(mutex_);
    return pool_.novel.size();
}

std::size_t Station::pending() const {
    std::lock_guard lock(mutex_);
    return queue_.pending();
}

std::uint64_t Station::acknowledged_version() const {
    std::lock_guard lock(mutex_);
    return scheduler_.acknowledged();
}

nlohmann::json Station::status() const {
    std::lock_guard lock(mutex_);
    std::map<std::string, int> shots;
    for (const auto& s : pool_.novel) ++shots[head_.class_names[static_cast<std::size_t>(s.class_id)]];
    return {{"counts",
             {{"pending", queue_.pending()},
              {"interesting", queue_.count(ReviewStatus::kInteresting)},
              {"uninteresting", queue_.count(ReviewStatus::kUninteresting)},
              {"received", queue_.size()}}},
            {"head_version", head_.version},
            {"acknowledged_version", scheduler_.acknowledged()},
            {"classes", head_.class_names},
            {"shots", shots},
            {"cycles", cycles_run_},
            {"rollbacks", rollbacks_},
            {"feedback_sent", feedback_sent_}};
}

} // namespace scout
