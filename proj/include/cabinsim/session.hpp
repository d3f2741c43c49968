#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cabinsim/protocol.hpp"
#include "cabinsim/scenario.hpp"
#include "cabinsim/sim.hpp"
#include "cabinsim/telemetry.hpp"

namespace cabinsim {

// Sample-and-hold control input. Inputs pushed between two ticks are
// collapsed to the newest one when the tick reads the latch.
class InputLatch {
 public:
  void push(const ControlInput& input);
  // Newest input since the last call, else the held one; neutral until
  // anything has been received.
  ControlInput latest_input();
  std::uint64_t superseded() const { return superseded_; }

 private:
  std::vector<ControlInput> pending_;
  ControlInput held_;
  std::uint64_t superseded_ = 0;
};

struct InputTraceEntry {
  std::uint64_t tick = 0;  // input applies to the step that produces this tick
  ControlInput input;
};

// Reads a JSONL input trace. Lines are either {"tick", "steering_norm",
// "throttle", "brake"} or vehicle records from a session log.
std::vector<InputTraceEntry> load_input_trace(const std::filesystem::path& path);

enum class GazeMode : std::uint8_t { None, Synthetic, Replay, Live };

struct SessionConfig {
  SimConfig sim;
  std::uint64_t seed = 0;
  bool autopilot = false;
  GazeMode gaze = GazeMode::None;
  // Synthetic gaze; its seed is replaced by the session seed unless set.
  SynthGazeConfig synth;
  bool synth_seed_explicit = false;
  std::filesystem::path gaze_replay;
  std::vector<InputTraceEntry> input_trace;
  std::uint32_t ui_every_ticks = 3;       // 20 Hz at 60 Hz simulation
  double explanation_display_s = 8.0;
  double max_duration = 0.0;  // overrides the script when > 0
};

enum class Audience : std::uint8_t { DriverIO, Displays, Everyone };

struct Outbound {
  Audience audience = Audience::Everyone;
  protocol::Payload payload;
};

// Owns the world, scenario state and telemetry writer. Transport agnostic:
// the server feeds it decoded frames and forwards what tick() returns.
class SimulationSession {
 public:
  SimulationSession(ScenarioScript script, SessionConfig config, SessionWriter writer);

  // Logs the frame, then queues it for the next tick.
  void ingest(std::uint64_t connection, protocol::ClientRole role,
              const protocol::Envelope& envelope, const nlohmann::json& raw_payload);

  void note(const std::string& kind, const std::string& detail);

  // Advances one fixed step. Returns nothing once the session has ended.
  std::vector<Outbound> tick();

  // Writes SessionEnd; idempotent.
  std::vector<Outbound> end(const std::string& reason);

  bool ended() const { return ended_; }
  const std::string& end_reason() const { return end_reason_; }
  const WorldState& world() const { return world_; }
  const ControlInput& last_input() const { return last_input_; }
  const protocol::MusicState& music() const { return music_; }
  const ScenarioSession& scenario() const { return scenario_; }
  const SessionConfig& config() const { return config_; }
  const SessionWriter& writer() const { return writer_; }
  std::uint64_t superseded_inputs() const { return latch_.superseded(); }

 private:
  struct Pending {
    protocol::Payload payload;
  };

  void record(const TelemetryRecord& rec);
  void issue(const ExplanationEvent& explanation, std::vector<Outbound>& out);
  ControlInput choose_input();

  ScenarioSession scenario_;
  SessionConfig config_;
  SessionWriter writer_;
  WorldState world_;
  InputLatch latch_;
  ControlInput last_input_;
  std::deque<Pending> pending_;
  protocol::MusicState music_;
  std::optional<protocol::ActiveExplanation> active_explanation_;
  double explanation_until_ = 0.0;

  std::optional<SynthGazeGenerator> synth_;
  std::vector<GazeSample> replay_gaze_;
  std::size_t replay_index_ = 0;
  std::size_t trace_index_ = 0;

  bool ended_ = false;
  std::string end_reason_;
};

}  // namespace cabinsim
