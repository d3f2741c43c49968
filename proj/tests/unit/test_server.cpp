#include <doctest.h>

#include <thread>

#include "cabinsim/bridge.hpp"
#include "clients.hpp"
#include "test_support.hpp"

using namespace cabinsim;
using namespace cabinsim::protocol;
using cabinsim::testing::TcpClient;
using cabinsim::testing::TempDir;
using cabinsim::testing::WsClient;

namespace {

ScenarioScript on_demand_script() {
  ScenarioScript s;
  s.id = "server_unit";
  s.route = {{0, 0}, {5000, 0}};
  s.target_speed = 10.0;
  s.policy = {PolicyVariant::OnDemand, 10.0, "Lumo"};
  ScenarioEvent e;
  e.id = "e1";
  e.trigger = TimeTrigger{0.2};
  e.kind = EventKind::PedestrianCrossing;
  e.safety_critical = true;
  e.explanation_text = "pedestrian ahead";
  s.events.push_back(e);
  return s;
}

// A wall-paced server on ephemeral ports, running on its own thread.
struct LiveServer {
  TempDir dir;
  std::optional<SimulationSession> session;
  std::optional<Server> server;
  std::thread thread;

  explicit LiveServer(ServerConfig cfg = {}, bool autopilot = true) {
    SessionConfig sc;
    sc.autopilot = autopilot;
    sc.max_duration = 60.0;
    session.emplace(on_demand_script(), sc, open_session(dir.path(), {}));
    cfg.tcp = Endpoint{"127.0.0.1", 0};
    cfg.websocket = Endpoint{"127.0.0.1", 0};
    server.emplace(*session, cfg);
    thread = std::thread([this] { server->run(); });
  }
  ~LiveServer() {
    server->stop("test_done");
    thread.join();
  }
  std::uint16_t tcp() const { return server->tcp_port(); }
  std::uint16_t ws() const { return server->websocket_port(); }
};

}  // namespace

TEST_SUITE("server") {
  TEST_CASE("UI client receives ui_state at 20 Hz") {
    LiveServer live;
    TcpClient ui(live.tcp());
    ui.send(Hello{ClientRole::UI});
    std::this_thread::sleep_for(std::chrono::milliseconds(2200));
    const auto states = ui.of_type<UiState>();
    REQUIRE(states.size() > 10);
    // Skip the first frame, then measure over the rest.
    const double span = states.back().first - states[1].first;
    const double rate = static_cast<double>(states.size() - 2) / span;
    CHECK(rate >= 16.0);
    CHECK(rate <= 24.0);
    CHECK(ui.of_type<ForceFeedback>().empty());
    CHECK(live.server->stats().force_feedback_sent.load() == 0);  // no driver_io client
  }

  TEST_CASE("second driver_io client is rejected") {
    LiveServer live;
    TcpClient first(live.tcp());
    first.send(Hello{ClientRole::DriverIO});
    REQUIRE(first.wait_for([](const auto& f) { return f.size() > 3; }, 2.0));
    TcpClient second(live.tcp());
    second.send(Hello{ClientRole::DriverIO});
    CHECK(second.wait_closed(3.0));
    const auto errors = second.of_type<ErrorMsg>();
    REQUIRE(errors.size() == 1);
    CHECK(errors[0].second.code == "role_conflict");
    CHECK_FALSE(first.closed());
    CHECK(live.server->stats().role_conflicts.load() == 1);
    CHECK(!first.of_type<ForceFeedback>().empty());
  }

  TEST_CASE("explain button touch reaches the scenario and the explanation is pushed") {
    LiveServer live;
    TcpClient ui(live.tcp());
    ui.send(Hello{ClientRole::UI});
    REQUIRE(ui.wait_for([](const auto& frames) {
      for (const auto& r : frames) {
        if (std::holds_alternative<ScenarioEventMsg>(r.envelope.payload)) return true;
      }
      return false;
    }, 3.0));
    ui.send(TouchEvent{0.8, 0.9, kExplainButton, TouchAction::Tap});
    REQUIRE(ui.wait_for([](const auto& frames) {
      for (const auto& r : frames) {
        if (std::holds_alternative<Explanation>(r.envelope.payload)) return true;
      }
      return false;
    }, 2.0));
    const auto ex = ui.of_type<Explanation>();
    REQUIRE(ex.size() == 1);
    CHECK(ex[0].second.trigger_source == TriggerSource::UserRequest);
    CHECK(ex[0].second.agent_name == "Lumo");
    // Later UI frames carry the explanation for display.
    REQUIRE(ui.wait_for([](const auto& frames) {
      for (const auto& r : frames) {
        const auto* s = std::get_if<UiState>(&r.envelope.payload);
        if (s && s->explanation) return true;
      }
      return false;
    }, 1.0));
  }

  TEST_CASE("driver input over WebSocket moves the car") {
    LiveServer live({}, false);
    WsClient driver(live.ws());
    driver.send(Hello{ClientRole::DriverIO});
    driver.send(ControlInputMsg{0.0, 1.0, 0.0, std::nullopt});
    REQUIRE(driver.wait_for([](const auto& frames) { return frames.size() > 40; }, 3.0));
    CHECK(live.session->last_input().throttle == 1.0);
    CHECK(!driver.of_type<ForceFeedback>().empty());
  }

  TEST_CASE("handshake rules") {
    ServerConfig cfg;
    cfg.handshake_timeout = 0.5;
    cfg.heartbeat_interval = 0.25;
    LiveServer live(cfg);
    TcpClient silent(live.tcp());
    TcpClient rude(live.tcp());
    rude.send(Heartbeat{});
    REQUIRE(rude.wait_for([](const auto& f) { return !f.empty(); }, 2.0));
    CHECK(rude.of_type<ErrorMsg>()[0].second.code == "handshake_required");
    CHECK(silent.wait_closed(3.0));
    CHECK(silent.of_type<ErrorMsg>().at(0).second.code == "handshake_timeout");
  }

  TEST_CASE("silent clients are dropped, heartbeats keep them alive") {
    ServerConfig cfg;
    cfg.heartbeat_interval = 0.1;
    cfg.silence_timeout = 0.6;
    LiveServer live(cfg);
    TcpClient quiet(live.tcp());
    quiet.send(Hello{ClientRole::Observer});
    TcpClient chatty(live.tcp());
    chatty.send(Hello{ClientRole::Observer});
    for (int i = 0; i < 12; ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(100));
      chatty.send(Heartbeat{});
    }
    CHECK(quiet.closed());
    CHECK_FALSE(chatty.closed());
    CHECK(!chatty.of_type<Heartbeat>().empty());
  }

  TEST_CASE("session end is broadcast") {
    auto live = std::make_unique<LiveServer>();
    TcpClient obs(live->tcp());
    obs.send(Hello{ClientRole::Observer});
    REQUIRE(obs.wait_for([](const auto& f) { return !f.empty(); }, 2.0));
    live.reset();
    CHECK(obs.wait_closed(2.0));
    const auto end = obs.of_type<SessionEndMsg>();
    REQUIRE(end.size() == 1);
    CHECK(end[0].second.reason == "test_done");
  }
}
