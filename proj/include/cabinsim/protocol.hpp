#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cabinsim/scenario.hpp"
#include "cabinsim/sim.hpp"
#include "cabinsim/telemetry.hpp"

// Newline-delimited JSON wire protocol shared by the TCP and WebSocket
// endpoints. Every frame is {"type", "seq", "t_mono", "payload"}.
namespace cabinsim::protocol {

enum class ClientRole : std::uint8_t { DriverIO, UI, GazeSource, Observer };

std::string_view to_string(ClientRole role);
std::optional<ClientRole> role_from_string(std::string_view name);

struct Hello {
  ClientRole role = ClientRole::Observer;
  friend bool operator==(const Hello&, const Hello&) = default;
};

struct Heartbeat {
  friend bool operator==(const Heartbeat&, const Heartbeat&) = default;
};

struct ControlInputMsg {
  double steering_norm = 0.0;
  double throttle = 0.0;
  double brake = 0.0;
  std::optional<Gear> gear;
  friend bool operator==(const ControlInputMsg&, const ControlInputMsg&) = default;
};

struct TouchEvent {
  double x_norm = 0.0;
  double y_norm = 0.0;
  std::string target_id;
  TouchAction action = TouchAction::Tap;
  friend bool operator==(const TouchEvent&, const TouchEvent&) = default;
};

struct GazeSampleMsg {
  GazeSample sample;
  friend bool operator==(const GazeSampleMsg&, const GazeSampleMsg&) = default;
};

struct ForceFeedback {
  std::uint64_t tick = 0;
  double torque = 0.0;  // N*m
  friend bool operator==(const ForceFeedback&, const ForceFeedback&) = default;
};

struct ActorView {
  ActorId id = 0;
  ActorKind kind = ActorKind::Car;
  Pose pose;
  friend bool operator==(const ActorView&, const ActorView&) = default;
};

struct ActiveExplanation {
  std::string event_id;
  std::string agent_name;
  std::string text;
  friend bool operator==(const ActiveExplanation&, const ActiveExplanation&) = default;
};

struct MusicState {
  std::string track = "Track 1";
  bool playing = false;
  double volume = 0.5;  // [0, 1]
  friend bool operator==(const MusicState&, const MusicState&) = default;
};

struct UiState {
  std::uint64_t tick = 0;
  double t = 0.0;
  double speed = 0.0;
  Gear gear = Gear::Drive;
  double steering_norm = 0.0;
  double throttle = 0.0;
  double brake = 0.0;
  Pose ego;
  std::vector<DetectedObject> contours;
  std::vector<ActorView> actors;
  std::optional<ActiveExplanation> explanation;
  MusicState music;
  friend bool operator==(const UiState&, const UiState&) = default;
};

struct Explanation {
  std::string event_id;
  double t_issued = 0.0;
  std::string text;
  std::string agent_name;
  std::string modality = "text_and_speech";
  TriggerSource trigger_source = TriggerSource::Proactive;
  friend bool operator==(const Explanation&, const Explanation&) = default;
};

struct RequestExplanation {
  friend bool operator==(const RequestExplanation&, const RequestExplanation&) = default;
};

struct ScenarioEventMsg {
  std::string event_id;
  EventKind kind = EventKind::Custom;
  double t = 0.0;
  bool safety_critical = false;
  friend bool operator==(const ScenarioEventMsg&, const ScenarioEventMsg&) = default;
};

struct SessionEndMsg {
  std::string reason;
  friend bool operator==(const SessionEndMsg&, const SessionEndMsg&) = default;
};

// Center-stack music controls; absent fields are left unchanged.
struct MusicControl {
  std::optional<std::string> track;
  std::optional<bool> playing;
  std::optional<double> volume;
  friend bool operator==(const MusicControl&, const MusicControl&) = default;
};

// Server-to-client rejection notice (role conflict, handshake problems).
struct ErrorMsg {
  std::string code;
  std::string message;
  friend bool operator==(const ErrorMsg&, const ErrorMsg&) = default;
};

using Payload = std::variant<Hello, Heartbeat, ControlInputMsg, TouchEvent, GazeSampleMsg,
                             ForceFeedback, UiState, Explanation, RequestExplanation,
                             ScenarioEventMsg, SessionEndMsg, MusicControl, ErrorMsg>;

struct Envelope {
  std::uint64_t seq = 0;
  double t_mono = 0.0;
  Payload payload;
  friend bool operator==(const Envelope&, const Envelope&) = default;
};

std::string_view type_name(const Payload& payload);
inline std::string_view type_name(const Envelope& e) { return type_name(e.payload); }

// Registered message type names, in Payload order.
const std::vector<std::string_view>& registered_types();

nlohmann::json payload_json(const Payload& payload);

// One UTF-8 JSON object followed by a single '\n'.
std::string encode(const Envelope& envelope);

enum class DecodeError : std::uint8_t { None, MalformedFrame, UnknownType, NonMonotonicSeq };

std::string_view to_string(DecodeError error);

struct DecodeResult {
  std::optional<Envelope> envelope;
  DecodeError error = DecodeError::None;
  std::string detail;
  // Raw payload object, kept for write-ahead logging.
  nlohmann::json raw_payload;
  bool ok() const { return envelope.has_value(); }
};

// Stateless decode; unknown payload fields are ignored.
DecodeResult decode(std::string_view line);

// Per-connection sequence check on top of decode().
class FrameDecoder {
 public:
  DecodeResult decode(std::string_view line);
  std::optional<std::uint64_t> last_seq() const { return last_seq_; }

 private:
  std::optional<std::uint64_t> last_seq_;
};

UiState make_ui_state(const WorldState& world, const ControlInput& input,
                      const std::optional<ActiveExplanation>& explanation, const MusicState& music);

}  // namespace cabinsim::protocol
