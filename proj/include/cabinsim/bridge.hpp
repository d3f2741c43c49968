#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "cabinsim/session.hpp"

namespace cabinsim {

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks a free port
};

// Parses "host:port"; throws ParseError.
Endpoint parse_endpoint(const std::string& text);

struct ServerConfig {
  std::optional<Endpoint> tcp = Endpoint{"127.0.0.1", 7654};
  std::optional<Endpoint> websocket = Endpoint{"127.0.0.1", 7655};
  // Run ticks back to back instead of pacing them to wall time.
  bool headless_fast = false;
  double handshake_timeout = 5.0;   // s
  double heartbeat_interval = 1.0;  // s
  double silence_timeout = 5.0;     // s
  std::size_t max_line_bytes = 64 * 1024;
  std::size_t max_outbound_queue = 4096;
  bool handle_signals = false;  // SIGINT/SIGTERM end the session
};

struct ServerStats {
  std::atomic<std::uint64_t> ticks{0};
  std::atomic<std::uint64_t> frames_accepted{0};
  std::atomic<std::uint64_t> frames_rejected{0};
  std::atomic<std::uint64_t> connections{0};
  std::atomic<std::uint64_t> role_conflicts{0};
  std::atomic<std::uint64_t> handshake_timeouts{0};
  std::atomic<std::uint64_t> force_feedback_sent{0};
  std::atomic<std::uint64_t> ui_states_sent{0};
};

// Drives a SimulationSession at a fixed rate and bridges it to network
// clients. One thread runs everything: connection handlers only queue
// decoded frames into the session, which the tick loop consumes.
class Server {
 public:
  Server(SimulationSession& session, ServerConfig config);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Blocks until the session ends or stop() is called.
  void run();
  // Thread-safe; ends the session with the given reason.
  void stop(const std::string& reason = "shutdown");

  // Bound ports, valid after construction (0 if the endpoint is disabled).
  std::uint16_t tcp_port() const;
  std::uint16_t websocket_port() const;

  const ServerStats& stats() const;

 private:
  class Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cabinsim
