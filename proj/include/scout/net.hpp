#ifndef SCOUT_NET_HPP
#define SCOUT_NET_HPP

#include <atomic>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <boost/asio.hpp>

#include "scout/protocol.hpp"

namespace scout {

/// host:port, e.g. "127.0.0.1:9000". Throws InvalidInput otherwise.
struct Endpoint {
    std::string host;
    unsigned short port = 0;
};
Endpoint parse_endpoint(const std::string& text);

/// A TCP connection carrying protocol frames. Reads run continuously and
/// hand each decoded message to on_message; send() may be called from any
/// thread. A frame that fails protocol validation is reported to on_error
/// and skipped; a framing error or socket failure closes the connection.
class FramedConnection : public std::enable_shared_from_this<FramedConnection> {
public:
    using MessageHandler = std::function<void(Message)>;
    using ErrorHandler = std::function<void(const std::string&)>;
    using CloseHandler = std::function<void()>;

    FramedConnection(boost::asio::ip::tcp::socket socket, MessageHandler on_message, ErrorHandler on_error,
                     CloseHandler on_close);

    void start();
    void send(Bytes frame);
    void close();
    bool open() const { return open_.load(); }

private:
    void read_more();
    void write_next();

    boost::asio::ip::tcp::socket socket_;
    boost::asio::strand<boost::asio::any_io_executor> strand_;
    MessageHandler on_message_;
    ErrorHandler on_error_;
    CloseHandler on_close_;
    FrameDecoder decoder_;
    std::array<std::uint8_t, 16384> read_buffer_{};
    std::deque<Bytes> writes_;
    std::atomic<bool> open_{false};
};

/// Client side of the robot link: connects, reconnects after a failure,
/// and calls on_connect each time a connection comes up.
class LinkClient {
public:
    LinkClient(Endpoint endpoint, FramedConnection::MessageHandler on_message, std::function<void()> on_connect,
               FramedConnection::ErrorHandler on_error = {});
    ~LinkClient();

    void start();
    void stop();
    bool connected() const;
    /// False when there is no open connection; the frame is then dropped.
    bool send(Bytes frame);

private:
    void connect();
    void schedule_reconnect();

    Endpoint endpoint_;
    FramedConnection::MessageHandler on_message_;
    std::function<void()> on_connect_;
    FramedConnection::ErrorHandler on_error_;
    boost::asio::io_context io_;
    boost::asio::steady_timer retry_;
    std::optional<boost::asio::executor_work_guard<boost::asio::io_context::executor_type>> work_;
    std::thread thread_;
    mutable std::mutex mutex_;
    std::shared_ptr<FramedConnection> connection_;
    std::atomic<bool> stopping_{false};
};

} // namespace scout

#endif // SCOUT_NET_HPP
