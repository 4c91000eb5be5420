#ifndef SCOUT_STATION_SERVER_HPP
#define SCOUT_STATION_SERVER_HPP

#include <atomic>
#include <chrono>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <vector>

#include "scout/net.hpp"
#include "scout/station.hpp"

namespace scout {

struct StationServerConfig {
    Endpoint http{"127.0.0.1", 8080};  // port 0 picks a free port
    Endpoint robot{"127.0.0.1", 9000}; // port 0 picks a free port
    int io_threads = 2;
    std::chrono::milliseconds idle_poll{20};
};

/// Serves a Station over the network:
///   GET  /queue/next      oldest pending item, image as base64 (204 when empty)
///   POST /decision        {frame_id, decision, boxes: [{class, x_min, y_min, x_max, y_max}]}
///   GET  /mission/status  counts, head version, classes
///   WS   /events          every station event as a JSON text message
/// plus a TCP port for the robot link. A background thread runs training
/// cycles and pushes updates; with an oracle, another answers the queue.
class StationServer {
public:
    StationServer(Station& station, StationServerConfig config, OracleOperator* oracle = nullptr);
    ~StationServer();

    StationServer(const StationServer&) = delete;
    StationServer& operator=(const StationServer&) = delete;

    void start();
    void stop();

    unsigned short http_port() const { return http_port_; }
    unsigned short robot_port() const { return robot_port_; }
    bool robot_connected() const;
    std::size_t event_clients() const;
    /// Seconds since start(); the station's clock.
    double now() const;

    class Impl;

private:
    std::unique_ptr<Impl> impl_;
    unsigned short http_port_ = 0;
    unsigned short robot_port_ = 0;
};

} // namespace scout

#endif // SCOUT_STATION_SERVER_HPP
