#include "scout/net.hpp"

#include <charconv>

namespace scout {

namespace asio = boost::asio;
using asio::ip::tcp;

Endpoint parse_endpoint(const std::string& text) {
    const auto colon = text.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 == text.size()) {
        throw InvalidInput("endpoint must look like host:port, got '" + text + "'");
    }
    Endpoint e;
    e.host = text.substr(0, colon);
    unsigned value = 0;
    const char* first = text.data() + colon + 1;
    const char* last = text.data() + text.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || value > 65535) throw InvalidInput("bad port in '" + text + "'");
    e.port = static_cast<unsigned short>(value);
    return e;
}

FramedConnection::FramedConnection(tcp::socket socket, MessageHandler on_message, ErrorHandler on_error,
                                   CloseHandler on_close)
    : socket_(std::move(socket)),
      strand_(asio::make_strand(socket_.get_executor())),
      on_message_(std::move(on_message)),
      on_error_(std::move(on_error)),
      on_close_(std::move(on_close)) {}

void FramedConnection::start() {
    open_ = true;
    asio::dispatch(strand_, [self = shared_from_this()] { self->read_more(); });
}

void FramedConnection::read_more() {
    socket_.async_read_some(
        asio::buffer(read_buffer_),
        asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
            if (ec) {
                self->close();
                return;
            }
            self->decoder_.feed(std::span<const std::uint8_t>(self->read_buffer_.data(), n));
            for (;;) {
                std::optional<Message> msg;
                try {
                    msg = self->decoder_.next();
                } catch (const ProtocolError& e) {
                    if (self->on_error_) self->on_error_(e.what());
                    continue;
                } catch (const FramingError& e) {
                    if (self->on_error_) self->on_error_(e.what());
                    self->close();
                    return;
                }
                if (!msg) break;
                if (self->on_message_) self->on_message_(std::move(*msg));
            }
            self->read_more();
        }));
}

void FramedConnection::send(Bytes frame) {
    asio::post(strand_, [self = shared_from_this(), frame = std::move(frame)]() mutable {
        if (!self->open_) return;
        self->writes_.push_back(std::move(frame));
        if (self->writes_.size() == 1) self->write_next();
    });
}

void FramedConnection::write_next() {
    asio::async_write(socket_, asio::buffer(writes_.front()),
                      asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                          if (ec) {
                              self->close();
                              return;
                          }
                          self->writes_.pop_front();
                          if (!self->writes_.empty()) self->write_next();
                      }));
}

void FramedConnection::close() {
    asio::dispatch(strand_, [self = shared_from_this()] {
        if (!self->open_.exchange(false)) return;
        boost::system::error_code ignored;
        self->socket_.shutdown(tcp::socket::shutdown_both, ignored);
        self->socket_.close(ignored);
        self->writes_.clear();
        if (self->on_close_) self->on_close_();
    });
}

LinkClient::LinkClient(Endpoint endpoint, FramedConnection::MessageHandler on_message,
                       std::function<void()> on_connect, FramedConnection::ErrorHandler on_error)
    : endpoint_(std::move(endpoint)),
      on_message_(std::move(on_message)),
      on_connect_(std::move(on_connect)),
      on_error_(std::move(on_error)),
      retry_(io_) {}

LinkClient::~LinkClient() { stop(); }

void LinkClient::start() {
    work_.emplace(io_.get_executor());
    asio::post(io_, [this] { connect(); });
    thread_ = std::thread([this] { io_.run(); });
}

void LinkClient::stop() {
    if (stopping_.exchange(true)) return;
    asio::post(io_, [this] {
        retry_.cancel();
        std::lock_guard lock(mutex_);
        if (connection_) connection_->close();
    });
    work_.reset();
    if (thread_.joinable()) {
        // Give pending writes a moment, then stop the loop.
        std::this_thread::sleep_for(std::chrono::milliseconds(50));
        io_.stop();
        thread_.join();
    }
}

bool LinkClient::connected() const {
    std::lock_guard lock(mutex_);
    return connection_ && connection_->open();
}

bool LinkClient::send(Bytes frame) {
    std::lock_guard lock(mutex_);
    if (!connection_ || !connection_->open()) return false;
    connection_->send(std::move(frame));
    return true;
}

void LinkClient::connect() {
    if (stopping_) return;
    auto socket = std::make_shared<tcp::socket>(io_);
    auto resolver = std::make_shared<tcp::resolver>(io_);
    resolver->async_resolve(
        endpoint_.host, std::to_string(endpoint_.port),
        [this, socket, resolver](boost::system::error_code ec, tcp::resolver::results_type results) {
            if (ec) {
                schedule_reconnect();
                return;
            }
            asio::async_connect(*socket, results, [this, socket](boost::system::error_code ec, const tcp::endpoint&) {
                if (ec) {
                    schedule_reconnect();
                    return;
                }
                socket->set_option(tcp::no_delay(true));
                auto conn = std::make_shared<FramedConnection>(std::move(*socket), on_message_, on_error_,
                                                               [this] { schedule_reconnect(); });
                {
                    std::lock_guard lock(mutex_);
                    connection_ = conn;
                }
                conn->start();
                if (on_connect_) on_connect_();
            });
        });
}

void LinkClient::schedule_reconnect() {
    if (stopping_) return;
    retry_.expires_after(std::chrono::milliseconds(200));
    retry_.async_wait([this](boost::system::error_code ec) {
        if (!ec) connect();
    });
}

} // namespace scout
