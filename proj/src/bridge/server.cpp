#include <chrono>
#include <deque>
#include <map>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "cabinsim/bridge.hpp"

namespace cabinsim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;
using protocol::ClientRole;

Endpoint parse_endpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  if (colon == std::string::npos || colon + 1 == text.size()) {
    throw ParseError("expected host:port, got '" + text + "'");
  }
  Endpoint ep;
  ep.host = text.substr(0, colon);
  if (ep.host.empty()) ep.host = "127.0.0.1";
  try {
    const unsigned long port = std::stoul(text.substr(colon + 1));
    if (port > 65535) throw std::out_of_range("port");
    ep.port = static_cast<std::uint16_t>(port);
  } catch (const std::exception&) {
    throw ParseError("invalid port in '" + text + "'");
  }
  return ep;
}

namespace {

std::chrono::nanoseconds seconds(double s) {
  return std::chrono::duration_cast<std::chrono::nanoseconds>(std::chrono::duration<double>(s));
}

}  // namespace

class Server::Impl {
 public:
  class Connection;
  class TcpConnection;
  class WsConnection;

  Impl(SimulationSession& session, ServerConfig config);
  ~Impl();

  void run();
  void stop(const std::string& reason);

  std::uint16_t tcp_port = 0;
  std::uint16_t ws_port = 0;
  ServerStats stats;

  // Used by connections.
  void on_line(Connection& conn, std::string_view line);
  void on_closed(std::uint64_t id);
  double now() const { return std::chrono::duration<double>(Clock::now() - started_).count(); }
  const ServerConfig& config() const { return config_; }

 private:
  void accept_tcp();
  void accept_ws();
  void schedule_tick();
  void do_tick();
  void heartbeat();
  void dispatch(const std::vector<Outbound>& out);
  void finish();

  asio::io_context io_;
  SimulationSession& session_;
  ServerConfig config_;
  std::optional<tcp::acceptor> tcp_acceptor_;
  std::optional<tcp::acceptor> ws_acceptor_;
  asio::steady_timer tick_timer_;
  asio::steady_timer heartbeat_timer_;
  asio::steady_timer shutdown_timer_;
  std::optional<asio::signal_set> signals_;
  std::map<std::uint64_t, std::shared_ptr<Connection>> connections_;
  std::optional<std::uint64_t> driver_;
  std::uint64_t next_id_ = 1;
  Clock::time_point started_ = Clock::now();
  Clock::time_point loop_start_;
  bool finishing_ = false;
};

// Shared framing, handshake and outbound queue; transports supply I/O.
class Server::Impl::Connection : public std::enable_shared_from_this<Connection> {
 public:
  Connection(Impl& server, std::uint64_t id) : server_(server), id_(id) {
    connected_at_ = last_rx_ = server.now();
  }
  virtual ~Connection() = default;

  virtual void start() = 0;
  virtual void close() = 0;

  void send(const protocol::Payload& payload) {
    if (closed_) return;
    if (outbox_.size() >= server_.config().max_outbound_queue) return;
    outbox_.push_back(protocol::encode({++out_seq_, server_.now(), payload}));
    if (!writing_) {
      writing_ = true;
      write_front();
    }
  }

  void close_after_flush() {
    close_pending_ = true;
    if (!writing_) close();
  }

  std::uint64_t id() const { return id_; }
  std::optional<ClientRole> role;
  protocol::FrameDecoder decoder;
  double connected_at_ = 0.0;
  double last_rx_ = 0.0;

 protected:
  virtual void write_front() = 0;

  void on_written(const boost::system::error_code& ec) {
    if (ec) {
      close();
      return;
    }
    outbox_.pop_front();
    if (outbox_.empty()) {
      writing_ = false;
      if (close_pending_) close();
      return;
    }
    write_front();
  }

  void mark_closed() {
    if (closed_) return;
    closed_ = true;
    server_.on_closed(id_);
  }

  Impl& server_;
  std::uint64_t id_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool close_pending_ = false;
  bool closed_ = false;
  std::uint64_t out_seq_ = 0;
};

class Server::Impl::TcpConnection final : public Connection {
 public:
  TcpConnection(Impl& server, std::uint64_t id, tcp::socket socket)
      : Connection(server, id), socket_(std::move(socket)) {}

  void start() override { read(); }

  void close() override {
    boost::system::error_code ignored;
    socket_.shutdown(tcp::socket::shutdown_both, ignored);
    socket_.close(ignored);
    mark_closed();
  }

 private:
  void read() {
    socket_.async_read_some(asio::buffer(buffer_),
                            [self = shared_from_this(), this](const boost::system::error_code& ec,
                                                              std::size_t n) {
                              if (ec) {
                                close();
                                return;
                              }
                              consume(n);
                              if (!closed_) read();
                            });
  }

  void consume(std::size_t n) {
    std::size_t start = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (buffer_[i] != '\n') continue;
      partial_.append(buffer_.data() + start, i - start);
      if (discarding_) {
        discarding_ = false;
      } else {
        server_.on_line(*this, partial_);
      }
      partial_.clear();
      start = i + 1;
      if (closed_) return;
    }
    partial_.append(buffer_.data() + start, n - start);
    if (partial_.size() > server_.config().max_line_bytes) {
      // Oversized frame: count it once and drop bytes up to the next newline.
      if (!discarding_) server_.on_line(*this, "<oversized>");
      discarding_ = true;
      partial_.clear();
    }
  }

  void write_front() override {
    asio::async_write(socket_, asio::buffer(outbox_.front()),
                      [self = shared_from_this(), this](const boost::system::error_code& ec,
                                                        std::size_t) { on_written(ec); });
  }

  tcp::socket socket_;
  std::array<char, 4096> buffer_{};
  std::string partial_;
  bool discarding_ = false;
};

class Server::Impl::WsConnection final : public Connection {
 public:
  WsConnection(Impl& server, std::uint64_t id, tcp::socket socket)
      : Connection(server, id), ws_(std::move(socket)) {}

  void start() override {
    ws_.text(true);
    ws_.read_message_max(server_.config().max_line_bytes);
    ws_.async_accept([self = shared_from_this(), this](const beast::error_code& ec) {
      if (ec) {
        close();
        return;
      }
      read();
    });
  }

  void close() override {
    if (closed_) return;
    beast::error_code ignored;
    beast::get_lowest_layer(ws_).shutdown(tcp::socket::shutdown_both, ignored);
    beast::get_lowest_layer(ws_).close(ignored);
    mark_closed();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) {
      if (ec == websocket::error::message_too_big) {
        server_.on_line(*this, "<oversized>");
        close();
        return;
      }
      if (ec) {
        close();
        return;
      }
      const std::string message = beast::buffers_to_string(buffer_.data());
      buffer_.consume(buffer_.size());
      std::size_t start = 0;
      do {
        auto end = message.find('\n', start);
        if (end == std::string::npos) end = message.size();
        const std::string_view line(message.data() + start, end - start);
        if (!line.empty() || message.empty()) server_.on_line(*this, line);
        start = end + 1;
      } while (start < message.size() && !closed_);
      if (!closed_) read();
    });
  }

  void write_front() override {
    // Frames go out one JSON object per message, without the newline.
    std::string_view body = outbox_.front();
    if (!body.empty() && body.back() == '\n') body.remove_suffix(1);
    ws_.async_write(asio::buffer(body.data(), body.size()),
                    [self = shared_from_this(), this](const beast::error_code& ec, std::size_t) {
                      on_written(ec);
                    });
  }

  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
};

Server::Impl::Impl(SimulationSession& session, ServerConfig config)
    : session_(session),
      config_(std::move(config)),
      tick_timer_(io_),
      heartbeat_timer_(io_),
      shutdown_timer_(io_) {
  auto bind = [this](const Endpoint& ep) {
    tcp::acceptor acceptor(io_);
    const tcp::endpoint endpoint(asio::ip::make_address(ep.host), ep.port);
    acceptor.open(endpoint.protocol());
    acceptor.set_option(asio::socket_base::reuse_address(true));
    acceptor.bind(endpoint);
    acceptor.listen();
    return acceptor;
  };
  try {
    if (config_.tcp) {
      tcp_acceptor_.emplace(bind(*config_.tcp));
      tcp_port = tcp_acceptor_->local_endpoint().port();
    }
    if (config_.websocket) {
      ws_acceptor_.emplace(bind(*config_.websocket));
      ws_port = ws_acceptor_->local_endpoint().port();
    }
  } catch (const boost::system::system_error& e) {
    throw IoError(std::string("cannot listen: ") + e.what());
  }
  if (config_.handle_signals) {
    signals_.emplace(io_, SIGINT, SIGTERM);
    signals_->async_wait([this](const boost::system::error_code& ec, int) {
      if (!ec) stop("interrupted");
    });
  }
}

Server::Impl::~Impl() {
  for (auto& [id, conn] : std::map(connections_)) conn->close();
  connections_.clear();
}

void Server::Impl::accept_tcp() {
  tcp_acceptor_->async_accept([this](const boost::system::error_code& ec, tcp::socket socket) {
    if (ec) return;
    socket.set_option(tcp::no_delay(true));
    auto conn = std::make_shared<TcpConnection>(*this, next_id_++, std::move(socket));
    connections_[conn->id()] = conn;
    ++stats.connections;
    conn->start();
    accept_tcp();
  });
}

void Server::Impl::accept_ws() {
  ws_acceptor_->async_accept([this](const boost::system::error_code& ec, tcp::socket socket) {
    if (ec) return;
    socket.set_option(tcp::no_delay(true));
    auto conn = std::make_shared<WsConnection>(*this, next_id_++, std::move(socket));
    connections_[conn->id()] = conn;
    ++stats.connections;
    conn->start();
    accept_ws();
  });
}

void Server::Impl::on_line(Connection& conn, std::string_view line) {
  conn.last_rx_ = now();
  if (session_.ended()) return;

  protocol::DecodeResult result = conn.decoder.decode(line);
  if (!result.ok()) {
    ++stats.frames_rejected;
    session_.note("frame_rejected", std::string(protocol::to_string(result.error)));
    return;
  }
  const protocol::Envelope& env = *result.envelope;

  if (!conn.role) {
    const auto* hello = std::get_if<protocol::Hello>(&env.payload);
    if (!hello) {
      ++stats.frames_rejected;
      session_.note("frame_rejected", "handshake_required");
      conn.send(protocol::ErrorMsg{"handshake_required", "first message must be hello"});
      return;
    }
    if (hello->role == ClientRole::DriverIO && driver_) {
      ++stats.role_conflicts;
      session_.note("role_conflict", "second driver_io client rejected");
      conn.send(protocol::ErrorMsg{"role_conflict", "a driver_io client is already connected"});
      conn.close_after_flush();
      return;
    }
    conn.role = hello->role;
    if (hello->role == ClientRole::DriverIO) driver_ = conn.id();
  }
  ++stats.frames_accepted;
  session_.ingest(conn.id(), *conn.role, env, result.raw_payload);
}

void Server::Impl::on_closed(std::uint64_t id) {
  if (driver_ == id) driver_.reset();
  // Defer erasure so a connection never destroys itself mid-callback.
  asio::post(io_, [this, id] { connections_.erase(id); });
}

void Server::Impl::dispatch(const std::vector<Outbound>& out) {
  for (const auto& msg : out) {
    for (auto& [id, conn] : connections_) {
      if (!conn->role) continue;
      const ClientRole role = *conn->role;
      bool wanted = false;
      switch (msg.audience) {
        case Audience::DriverIO: wanted = role == ClientRole::DriverIO; break;
        case Audience::Displays: wanted = role == ClientRole::UI || role == ClientRole::Observer; break;
        case Audience::Everyone: wanted = true; break;
      }
      if (!wanted) continue;
      conn->send(msg.payload);
      if (std::holds_alternative<protocol::ForceFeedback>(msg.payload)) ++stats.force_feedback_sent;
      if (std::holds_alternative<protocol::UiState>(msg.payload)) ++stats.ui_states_sent;
    }
  }
}

void Server::Impl::schedule_tick() {
  if (config_.headless_fast) {
    asio::post(io_, [this] { do_tick(); });
    return;
  }
  const auto next = session_.world().tick + 1;
  tick_timer_.expires_at(loop_start_ + seconds(static_cast<double>(next) * session_.config().sim.dt));
  tick_timer_.async_wait([this](const boost::system::error_code& ec) {
    if (!ec) do_tick();
  });
}

void Server::Impl::do_tick() {
  if (session_.ended()) {
    finish();
    return;
  }
  dispatch(session_.tick());
  ++stats.ticks;
  if (session_.ended()) {
    finish();
    return;
  }
  schedule_tick();
}

void Server::Impl::heartbeat() {
  heartbeat_timer_.expires_after(seconds(config_.heartbeat_interval));
  heartbeat_timer_.async_wait([this](const boost::system::error_code& ec) {
    if (ec) return;
    const double t = now();
    for (auto& [id, conn] : std::map(connections_)) {
      if (!conn->role) {
        if (t - conn->connected_at_ >= config_.handshake_timeout) {
          ++stats.handshake_timeouts;
          session_.note("handshake_timeout", "connection " + std::to_string(id));
          conn->send(protocol::ErrorMsg{"handshake_timeout", "no hello within timeout"});
          conn->close_after_flush();
        }
        continue;
      }
      if (t - conn->last_rx_ >= config_.silence_timeout) {
        session_.note("client_silent", "connection " + std::to_string(id));
        conn->close();
        continue;
      }
      conn->send(protocol::Heartbeat{});
    }
    heartbeat();
  });
}

void Server::Impl::finish() {
  if (finishing_) return;
  finishing_ = true;
  boost::system::error_code ignored;
  if (tcp_acceptor_) tcp_acceptor_->close(ignored);
  if (ws_acceptor_) ws_acceptor_->close(ignored);
  tick_timer_.cancel();
  heartbeat_timer_.cancel();
  if (signals_) signals_->cancel();
  for (auto& [id, conn] : connections_) {
    if (conn->role) conn->close_after_flush();
    else conn->close();
  }
  // Short grace period for queued frames (session_end) to drain.
  shutdown_timer_.expires_after(std::chrono::milliseconds(200));
  shutdown_timer_.async_wait([this](const boost::system::error_code&) {
    for (auto& [id, conn] : std::map(connections_)) conn->close();
    io_.stop();
  });
}

void Server::Impl::stop(const std::string& reason) {
  asio::post(io_, [this, reason] {
    dispatch(session_.end(reason));
    finish();
  });
}

void Server::Impl::run() {
  if (tcp_acceptor_) accept_tcp();
  if (ws_acceptor_) accept_ws();
  heartbeat();
  loop_start_ = Clock::now() - seconds(static_cast<double>(session_.world().tick) * session_.config().sim.dt);
  schedule_tick();
  io_.run();
}

Server::Server(SimulationSession& session, ServerConfig config)
    : impl_(std::make_unique<Impl>(session, std::move(config))) {}
Server::~Server() = default;
void Server::run() { impl_->run(); }
void Server::stop(const std::string& reason) { impl_->stop(reason); }
std::uint16_t Server::tcp_port() const { return impl_->tcp_port; }
std::uint16_t Server::websocket_port() const { return impl_->ws_port; }
const ServerStats& Server::stats() const { return impl_->stats; }

}  // namespace cabinsim
