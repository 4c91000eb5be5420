#ifndef SCOUT_ROBOT_LIVE_HPP
#define SCOUT_ROBOT_LIVE_HPP

#include "scout/dataset.hpp"
#include "scout/net.hpp"
#include "scout/robot.hpp"

namespace scout {

struct LiveOptions {
    Endpoint station;
    double frame_interval_s = 0.0; // pacing between frames, 0 for as fast as possible
    double drain_timeout_s = 30.0; // wait for the buffer to empty after the stream
    double linger_s = 2.0;         // then keep listening for feedback this long
};

struct LiveOutcome {
    std::size_t frames = 0;
    bool drained = false;
};

/// Runs a mission against a station over TCP. Candidates stay buffered
/// while the station is unreachable and go out once a connection is up.
LiveOutcome run_robot_live(RobotNode& robot, const Dataset& mission, const LiveOptions& options);

} // namespace scout

#endif // SCOUT_ROBOT_LIVE_HPP
