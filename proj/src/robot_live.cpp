#include "scout/robot_live.hpp"

#include <chrono>
#include <deque>
#include <thread>

#include "scout/image.hpp"

namespace scout {

namespace {

class Inbox {
public:
    void push(Message m) {
        std::lock_guard lock(mutex_);
        messages_.push_back(std::move(m));
    }

    std::deque<Message> take() {
        std::lock_guard lock(mutex_);
        std::deque<Message> out;
        out.swap(messages_);
        return out;
    }

private:
    std::mutex mutex_;
    std::deque<Message> messages_;
};

} // namespace

LiveOutcome run_robot_live(RobotNode& robot, const Dataset& mission, const LiveOptions& options) {
    const auto start = std::chrono::steady_clock::now();
    auto now = [&] { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); };

    Inbox inbox;
    LinkClient* link_ptr = nullptr;
    LinkClient link(
        options.station, [&](Message m) { inbox.push(std::move(m)); },
        [&] {
            if (link_ptr) link_ptr->send(encode(robot.hello()));
        });
    link_ptr = &link;
    link.start();

    auto pump = [&] {
        for (auto& msg : inbox.take()) {
            if (auto reply = robot.handle(msg, now())) link.send(encode(*reply));
        }
        if (link.connected()) {
            for (auto& frame : robot.drain_candidates(now())) link.send(std::move(frame));
        }
    };

    LiveOutcome out;
    const auto warm = static_cast<std::size_t>(robot.config().warmup);
    if (mission.size() < warm) throw InvalidInput("mission has fewer frames than the warmup count");
    std::vector<Image> warmup;
    for (std::size_t i = 0; i < warm; ++i) warmup.push_back(load_image(mission.images[i].string()));
    robot.warmup(warmup, now());

    for (std::size_t i = warm; i < mission.size(); ++i) {
        const auto due = start + std::chrono::duration<double>(options.frame_interval_s * static_cast<double>(i - warm));
        std::this_thread::sleep_until(due);
        pump();
        robot.process(Dataset::frame_id(mission.images[i]), load_image(mission.images[i].string()), now());
        ++out.frames;
        pump();
    }

    const double drain_until = now() + options.drain_timeout_s;
    while (robot.buffered() > 0 && now() < drain_until) {
        pump();
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    out.drained = robot.buffered() == 0;
    const double linger_until = now() + options.linger_s;
    while (now() < linger_until) {
        pump();
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    link.stop();
    robot.finish(now(), now());
    return out;
}

} // namespace scout
