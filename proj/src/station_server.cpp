#include "scout/station_server.hpp"

#include <deque>
#include <iostream>

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace scout {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using asio::ip::tcp;

namespace {

class EventSession;

nlohmann::json item_json(const ReviewItem& item) {
    return {{"frame_id", item.frame_id},
            {"score", item.score},
            {"received_at", item.received_at},
            {"status", to_string(item.status)},
            {"image_type", "png"},
            {"image", base64_encode(item.image)}};
}

std::vector<AnnotatedBox> boxes_from_request(const nlohmann::json& body) {
    std::vector<AnnotatedBox> boxes;
    if (!body.contains("boxes")) return boxes;
    for (const auto& b : body.at("boxes")) {
        boxes.push_back({b.at("class").get<std::string>(),
                         Box{b.at("x_min").get<double>(), b.at("y_min").get<double>(), b.at("x_max").get<double>(),
                             b.at("y_max").get<double>()}});
    }
    return boxes;
}

} // namespace

class StationServer::Impl {
public:
    Impl(Station& station, StationServerConfig config, OracleOperator* oracle)
        : station_(station),
          config_(std::move(config)),
          oracle_(oracle),
          io_(std::max(1, config_.io_threads)),
          http_acceptor_(io_),
          robot_acceptor_(io_),
          start_(std::chrono::steady_clock::now()) {}

    double now() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

    std::pair<unsigned short, unsigned short> start();
    void stop();

    void broadcast(const std::string& text);
    void add_client(const std::shared_ptr<EventSession>& s) {
        std::lock_guard lock(clients_mutex_);
        clients_.insert(s);
    }
    void remove_client(const std::shared_ptr<EventSession>& s) {
        std::lock_guard lock(clients_mutex_);
        clients_.erase(s);
    }
    std::size_t clients() const {
        std::lock_guard lock(clients_mutex_);
        return clients_.size();
    }

    bool robot_connected() const {
        std::lock_guard lock(robot_mutex_);
        return robot_ && robot_->open();
    }

    http::response<http::string_body> handle(const http::request<http::string_body>& req);
    Station& station() { return station_; }

private:
    void open_acceptor(tcp::acceptor& acceptor, const Endpoint& at);
    void accept_http();
    void accept_robot();
    void send_to_robot(const Message& msg);
    void trainer_loop();
    void oracle_loop();

    Station& station_;
    StationServerConfig config_;
    OracleOperator* oracle_;
    asio::io_context io_;
    tcp::acceptor http_acceptor_;
    tcp::acceptor robot_acceptor_;
    std::chrono::steady_clock::time_point start_;
    std::vector<std::thread> threads_;
    std::thread trainer_;
    std::thread oracle_thread_;
    std::atomic<bool> running_{false};

    mutable std::mutex robot_mutex_;
    std::shared_ptr<FramedConnection> robot_;
    std::deque<Bytes> robot_backlog_;

    mutable std::mutex clients_mutex_;
    std::set<std::shared_ptr<EventSession>> clients_;
};

namespace {

class EventSession : public std::enable_shared_from_this<EventSession> {
public:
    EventSession(tcp::socket socket, StationServer::Impl& server) : ws_(std::move(socket)), server_(server) {}

    void run(http::request<http::string_body> req) {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
            if (ec) return;
            self->server_.add_client(self);
            self->send(nlohmann::json{{"kind", "status"}, {"status", self->server_.station().status()}}.dump());
            self->read();
        });
    }

    void send(std::string text) {
        asio::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
            self->queue_.push_back(std::move(text));
            if (self->queue_.size() == 1) self->write();
        });
    }

    void close() {
        asio::post(ws_.get_executor(), [self = shared_from_this()] {
            beast::error_code ignored;
            beast::get_lowest_layer(self->ws_).socket().close(ignored);
        });
    }

private:
    void read() {
        ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->server_.remove_client(self);
                return;
            }
            self->buffer_.consume(self->buffer_.size());
            self->read();
        });
    }

    void write() {
        ws_.text(true);
        ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                self->server_.remove_client(self);
                return;
            }
            self->queue_.pop_front();
            if (!self->queue_.empty()) self->write();
        });
    }

    websocket::stream<beast::tcp_stream> ws_;
    StationServer::Impl& server_;
    beast::flat_buffer buffer_;
    std::deque<std::string> queue_;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
    HttpSession(tcp::socket socket, StationServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

    void run() {
        asio::dispatch(stream_.get_executor(), [self = shared_from_this()] { self->read(); });
    }

private:
    void read() {
        req_ = {};
        stream_.expires_after(std::chrono::seconds(30));
        http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
            if (ec) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            if (websocket::is_upgrade(self->req_)) {
                if (self->req_.target() == "/events") {
                    beast::get_lowest_layer(self->stream_).expires_never();
                    std::make_shared<EventSession>(self->stream_.release_socket(), self->server_)
                        ->run(std::move(self->req_));
                }
                return;
            }
            self->respond(self->server_.handle(self->req_));
        });
    }

    void respond(http::response<http::string_body> res) {
        auto shared = std::make_shared<http::response<http::string_body>>(std::move(res));
        http::async_write(stream_, *shared, [self = shared_from_this(), shared](beast::error_code ec, std::size_t) {
            if (ec || !shared->keep_alive()) {
                beast::error_code ignored;
                self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
                return;
            }
            self->read();
        });
    }

    beast::tcp_stream stream_;
    StationServer::Impl& server_;
    beast::flat_buffer buffer_;
    http::request<http::string_body> req_;
};

} // namespace

void StationServer::Impl::broadcast(const std::string& text) {
    std::lock_guard lock(clients_mutex_);
    for (const auto& c : clients_) c->send(text);
}

http::response<http::string_body> StationServer::Impl::handle(const http::request<http::string_body>& req) {
    auto reply = [&](http::status status, const nlohmann::json& body) {
        http::response<http::string_body> res{status, req.version()};
        res.set(http::field::content_type, "application/json");
        res.set(http::field::access_control_allow_origin, "*");
        res.keep_alive(req.keep_alive());
        if (status != http::status::no_content) res.body() = body.dump();
        res.prepare_payload();
        return res;
    };
    auto error = [&](http::status status, const std::string& message) {
        return reply(status, nlohmann::json{{"error", message}});
    };

    const std::string target(req.target());
    if (req.method() == http::verb::options) {
        auto res = reply(http::status::no_content, nullptr);
        res.set(http::field::access_control_allow_methods, "GET, POST, OPTIONS");
        res.set(http::field::access_control_allow_headers, "Content-Type");
        return res;
    }
    if (target == "/queue/next" && req.method() == http::verb::get) {
        const auto item = station_.next_item();
        if (!item) return reply(http::status::no_content, nullptr);
        return reply(http::status::ok, item_json(*item));
    }
    if (target == "/mission/status" && req.method() == http::verb::get) {
        nlohmann::json status = station_.status();
        status["robot_connected"] = robot_connected();
        return reply(http::status::ok, status);
    }
    if (target == "/decision" && req.method() == http::verb::post) {
        try {
            const auto body = nlohmann::json::parse(req.body());
            const std::string frame_id = body.at("frame_id").get<std::string>();
            const Decision decision = decision_from_string(body.at("decision").get<std::string>());
            const auto result = station_.decide(frame_id, decision, boxes_from_request(body), now());
            for (const auto& msg : result.outbound) send_to_robot(msg);
            return reply(http::status::ok, {{"frame_id", frame_id},
                                            {"decision", to_string(decision)},
                                            {"new_classes", result.new_classes},
                                            {"shots_added", result.shots_added}});
        } catch (const nlohmann::json::exception& e) {
            return error(http::status::bad_request, std::string("malformed decision: ") + e.what());
        } catch (const InvalidInput& e) {
            return error(http::status::bad_request, e.what());
        } catch (const NotFound& e) {
            return error(http::status::not_found, e.what());
        } catch (const ValidationError& e) {
            return error(http::status::unprocessable_entity, e.what());
        } catch (const CapacityError& e) {
            return error(http::status::conflict, e.what());
        }
    }
    if (target == "/queue/next" || target == "/mission/status" || target == "/decision") {
        return error(http::status::method_not_allowed, "method not allowed");
    }
    return error(http::status::not_found, "no route " + target);
}

void StationServer::Impl::open_acceptor(tcp::acceptor& acceptor, const Endpoint& at) {
    tcp::resolver resolver(io_);
    const auto results = resolver.resolve(at.host, std::to_string(at.port));
    const tcp::endpoint ep = results.begin()->endpoint();
    acceptor.open(ep.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
}

std::pair<unsigned short, unsigned short> StationServer::Impl::start() {
    try {
        open_acceptor(http_acceptor_, config_.http);
        open_acceptor(robot_acceptor_, config_.robot);
    } catch (const boost::system::system_error& e) {
        throw IoError(std::string("cannot listen: ") + e.what());
    }
    station_.set_listener([this](const nlohmann::json& event) { broadcast(event.dump()); });
    running_ = true;
    accept_http();
    accept_robot();
    for (int i = 0; i < std::max(1, config_.io_threads); ++i) threads_.emplace_back([this] { io_.run(); });
    trainer_ = std::thread([this] { trainer_loop(); });
    if (oracle_) oracle_thread_ = std::thread([this] { oracle_loop(); });
    return {http_acceptor_.local_endpoint().port(), robot_acceptor_.local_endpoint().port()};
}

void StationServer::Impl::stop() {
    if (!running_.exchange(false)) return;
    if (trainer_.joinable()) trainer_.join();
    if (oracle_thread_.joinable()) oracle_thread_.join();
    station_.set_listener({});
    asio::post(io_, [this] {
        beast::error_code ignored;
        http_acceptor_.close(ignored);
        robot_acceptor_.close(ignored);
    });
    {
        std::lock_guard lock(robot_mutex_);
        if (robot_) robot_->close();
    }
    {
        std::lock_guard lock(clients_mutex_);
        for (const auto& c : clients_) c->close();
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
    io_.stop();
    for (auto& t : threads_) t.join();
    threads_.clear();
}

void StationServer::Impl::accept_http() {
    http_acceptor_.async_accept(asio::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        std::make_shared<HttpSession>(std::move(socket), *this)->run();
        accept_http();
    });
}

void StationServer::Impl::accept_robot() {
    robot_acceptor_.async_accept(asio::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
        if (ec) return;
        socket.set_option(tcp::no_delay(true));
        auto conn = std::make_shared<FramedConnection>(
            std::move(socket),
            [this](Message msg) {
                try {
                    if (auto reply = station_.on_message(msg, now())) send_to_robot(*reply);
                } catch (const Error& e) {
                    std::cerr << "station: dropped robot message: " << e.what() << '\n';
                } catch (const nlohmann::json::exception& e) {
                    std::cerr << "station: dropped robot message: " << e.what() << '\n';
                }
            },
            [](const std::string& err) { std::cerr << "station: protocol error from robot: " << err << '\n'; }, [] {});
        std::deque<Bytes> backlog;
        {
            std::lock_guard lock(robot_mutex_);
            if (robot_) robot_->close();
            robot_ = conn;
            backlog.swap(robot_backlog_);
        }
        conn->start();
        for (auto& frame : backlog) conn->send(std::move(frame));
        accept_robot();
    });
}

void StationServer::Impl::send_to_robot(const Message& msg) {
    Bytes frame = encode(msg);
    std::lock_guard lock(robot_mutex_);
    if (robot_ && robot_->open()) {
        robot_->send(std::move(frame));
    } else {
        robot_backlog_.push_back(std::move(frame));
    }
}

void StationServer::Impl::trainer_loop() {
    while (running_) {
        try {
            if (station_.training_wanted()) {
                if (auto update = station_.run_training_cycle(now())) send_to_robot(*update);
                continue;
            }
            if (auto update = station_.sync_if_due(now())) send_to_robot(*update);
        } catch (const IoError& e) {
            std::cerr << "station: " << e.what() << '\n';
            running_ = false;
            return;
        }
        std::this_thread::sleep_for(config_.idle_poll);
    }
}

void StationServer::Impl::oracle_loop() {
    while (running_) {
        const auto item = station_.next_item();
        if (!item) {
            std::this_thread::sleep_for(config_.idle_poll);
            continue;
        }
        const OracleAnswer answer = oracle_->decide(item->frame_id);
        if (!answer.note.empty()) std::cerr << "oracle: " << item->frame_id << ": " << answer.note << '\n';
        DecisionResult result;
        try {
            result = station_.decide(item->frame_id, answer.decision, answer.boxes, now());
        } catch (const Error& e) {
            std::cerr << "oracle: " << item->frame_id << ": " << e.what() << '\n';
            try {
                result = station_.decide(item->frame_id, Decision::kUninteresting, {}, now());
            } catch (const Error&) {
                // Someone else decided the item first.
                continue;
            }
        }
        for (const auto& msg : result.outbound) send_to_robot(msg);
    }
}

StationServer::StationServer(Station& station, StationServerConfig config, OracleOperator* oracle)
    : impl_(std::make_unique<Impl>(station, std::move(config), oracle)) {}

StationServer::~StationServer() { stop(); }

void StationServer::start() { std::tie(http_port_, robot_port_) = impl_->start(); }

void StationServer::stop() {
    if (impl_) impl_->stop();
}

bool StationServer::robot_connected() const { return impl_->robot_connected(); }

std::size_t StationServer::event_clients() const { return impl_->clients(); }

double StationServer::now() const { return impl_->now(); }

} // namespace scout
