#include "cabinsim/protocol.hpp"

#include <algorithm>
#include <cmath>

namespace cabinsim::protocol {

using nlohmann::json;

std::string_view to_string(ClientRole role) {
  switch (role) {
    case ClientRole::DriverIO: return "driver_io";
    case ClientRole::UI: return "ui";
    case ClientRole::GazeSource: return "gaze_source";
    case ClientRole::Observer: return "observer";
  }
  return "observer";
}

std::optional<ClientRole> role_from_string(std::string_view name) {
  if (name == "driver_io") return ClientRole::DriverIO;
  if (name == "ui") return ClientRole::UI;
  if (name == "gaze_source") return ClientRole::GazeSource;
  if (name == "observer") return ClientRole::Observer;
  return std::nullopt;
}

std::string_view to_string(DecodeError error) {
  switch (error) {
    case DecodeError::None: return "none";
    case DecodeError::MalformedFrame: return "malformed_frame";
    case DecodeError::UnknownType: return "unknown_type";
    case DecodeError::NonMonotonicSeq: return "non_monotonic_seq";
  }
  return "none";
}

const std::vector<std::string_view>& registered_types() {
  static const std::vector<std::string_view> names = {
      "hello",   "heartbeat",           "control_input",  "touch_event", "gaze_sample",
      "force_feedback", "ui_state",     "explanation",    "request_explanation",
      "scenario_event", "session_end",  "music_control",  "error"};
  return names;
}

std::string_view type_name(const Payload& payload) { return registered_types()[payload.index()]; }

namespace {

json pose_json(const Pose& p) { return {{"x", p.x}, {"y", p.y}, {"heading", p.heading}}; }

Pose pose_from(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("heading").get<double>()};
}

json contour_json(const DetectedObject& d) {
  json pts = json::array();
  for (const auto& v : d.contour) pts.push_back({v.x, v.y});
  return {{"actor_id", d.actor_id}, {"kind", to_string(d.kind)}, {"points", pts}, {"range", d.range}};
}

template <typename E, typename F>
E enum_from(const json& j, F parse) {
  auto v = parse(j.template get<std::string>());
  if (!v) throw std::invalid_argument("unknown enum value '" + j.template get<std::string>() + "'");
  return *v;
}

DetectedObject contour_from(const json& j) {
  DetectedObject d;
  d.actor_id = j.at("actor_id").get<ActorId>();
  d.kind = enum_from<ActorKind>(j.at("kind"), actor_kind_from_string);
  d.range = j.at("range").get<double>();
  const json& pts = j.at("points");
  if (!pts.is_array() || pts.size() != 4) throw std::invalid_argument("contour needs 4 points");
  for (std::size_t i = 0; i < 4; ++i) d.contour[i] = {pts[i].at(0).get<double>(), pts[i].at(1).get<double>()};
  return d;
}

bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

Payload payload_from(std::string_view type, const json& p) {
  if (type == "hello") return Hello{enum_from<ClientRole>(p.at("role"), role_from_string)};
  if (type == "heartbeat") return Heartbeat{};
  if (type == "control_input") {
    ControlInputMsg m;
    m.steering_norm = p.at("steering_norm").get<double>();
    m.throttle = p.at("throttle").get<double>();
    m.brake = p.at("brake").get<double>();
    if (p.contains("gear")) m.gear = enum_from<Gear>(p["gear"], gear_from_string);
    return m;
  }
  if (type == "touch_event") {
    TouchEvent m;
    m.x_norm = p.at("x_norm").get<double>();
    m.y_norm = p.at("y_norm").get<double>();
    m.target_id = p.at("target_id").get<std::string>();
    m.action = enum_from<TouchAction>(p.at("action"), touch_action_from_string);
    return m;
  }
  if (type == "gaze_sample") return GazeSampleMsg{gaze_from_fields(p)};
  if (type == "force_feedback") {
    return ForceFeedback{p.at("tick").get<std::uint64_t>(), p.at("torque").get<double>()};
  }
  if (type == "ui_state") {
    UiState s;
    s.tick = p.at("tick").get<std::uint64_t>();
    s.t = p.at("t").get<double>();
    s.speed = p.at("speed").get<double>();
    s.gear = enum_from<Gear>(p.at("gear"), gear_from_string);
    s.steering_norm = p.at("steering_norm").get<double>();
    s.throttle = p.at("throttle").get<double>();
    s.brake = p.at("brake").get<double>();
    s.ego = pose_from(p.at("ego"));
    for (const auto& c : p.at("contours")) s.contours.push_back(contour_from(c));
    for (const auto& a : p.at("actors")) {
      s.actors.push_back({a.at("id").get<ActorId>(), enum_from<ActorKind>(a.at("kind"), actor_kind_from_string),
                          pose_from(a.at("pose"))});
    }
    if (p.contains("explanation") && !p["explanation"].is_null()) {
      const json& e = p["explanation"];
      s.explanation = ActiveExplanation{e.at("event_id").get<std::string>(),
                                        e.at("agent_name").get<std::string>(),
                                        e.at("text").get<std::string>()};
    }
    const json& m = p.at("music");
    s.music = {m.at("track").get<std::string>(), m.at("playing").get<bool>(), m.at("volume").get<double>()};
    return s;
  }
  if (type == "explanation") {
    Explanation e;
    e.event_id = p.at("event_id").get<std::string>();
    e.t_issued = p.at("t_issued").get<double>();
    e.text = p.at("text").get<std::string>();
    e.agent_name = p.at("agent_name").get<std::string>();
    e.modality = p.at("modality").get<std::string>();
    e.trigger_source = enum_from<TriggerSource>(p.at("trigger_source"), trigger_source_from_string);
    return e;
  }
  if (type == "request_explanation") return RequestExplanation{};
  if (type == "scenario_event") {
    ScenarioEventMsg m;
    m.event_id = p.at("event_id").get<std::string>();
    m.kind = enum_from<EventKind>(p.at("kind"), event_kind_from_string);
    m.t = p.at("t").get<double>();
    m.safety_critical = p.at("safety_critical").get<bool>();
    return m;
  }
  if (type == "session_end") return SessionEndMsg{p.at("reason").get<std::string>()};
  if (type == "music_control") {
    MusicControl m;
    if (p.contains("track")) m.track = p["track"].get<std::string>();
    if (p.contains("playing")) m.playing = p["playing"].get<bool>();
    if (p.contains("volume")) m.volume = p["volume"].get<double>();
    return m;
  }
  return ErrorMsg{p.at("code").get<std::string>(), p.at("message").get<std::string>()};
}

}  // namespace

json payload_json(const Payload& payload) {
  return std::visit(
      [](const auto& m) -> json {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, Hello>) {
          return {{"role", to_string(m.role)}};
        } else if constexpr (std::is_same_v<T, Heartbeat> || std::is_same_v<T, RequestExplanation>) {
          return json::object();
        } else if constexpr (std::is_same_v<T, ControlInputMsg>) {
          json j = {{"steering_norm", m.steering_norm}, {"throttle", m.throttle}, {"brake", m.brake}};
          if (m.gear) j["gear"] = cabinsim::to_string(*m.gear);
          return j;
        } else if constexpr (std::is_same_v<T, TouchEvent>) {
          return {{"x_norm", m.x_norm},
                  {"y_norm", m.y_norm},
                  {"target_id", m.target_id},
                  {"action", cabinsim::to_string(m.action)}};
        } else if constexpr (std::is_same_v<T, GazeSampleMsg>) {
          return gaze_fields(m.sample);
        } else if constexpr (std::is_same_v<T, ForceFeedback>) {
          return {{"tick", m.tick}, {"torque", m.torque}};
        } else if constexpr (std::is_same_v<T, UiState>) {
          json contours = json::array();
          for (const auto& c : m.contours) contours.push_back(contour_json(c));
          json actors = json::array();
          for (const auto& a : m.actors) {
            actors.push_back({{"id", a.id}, {"kind", cabinsim::to_string(a.kind)}, {"pose", pose_json(a.pose)}});
          }
          json j = {{"tick", m.tick},
                    {"t", m.t},
                    {"speed", m.speed},
                    {"gear", cabinsim::to_string(m.gear)},
                    {"steering_norm", m.steering_norm},
                    {"throttle", m.throttle},
                    {"brake", m.brake},
                    {"ego", pose_json(m.ego)},
                    {"contours", contours},
                    {"actors", actors},
                    {"music", {{"track", m.music.track}, {"playing", m.music.playing}, {"volume", m.music.volume}}}};
          if (m.explanation) {
            j["explanation"] = {{"event_id", m.explanation->event_id},
                                {"agent_name", m.explanation->agent_name},
                                {"text", m.explanation->text}};
          } else {
            j["explanation"] = nullptr;
          }
          return j;
        } else if constexpr (std::is_same_v<T, Explanation>) {
          return {{"event_id", m.event_id},
                  {"t_issued", m.t_issued},
                  {"text", m.text},
                  {"agent_name", m.agent_name},
                  {"modality", m.modality},
                  {"trigger_source", cabinsim::to_string(m.trigger_source)}};
        } else if constexpr (std::is_same_v<T, ScenarioEventMsg>) {
          return {{"event_id", m.event_id},
                  {"kind", cabinsim::to_string(m.kind)},
                  {"t", m.t},
                  {"safety_critical", m.safety_critical}};
        } else if constexpr (std::is_same_v<T, SessionEndMsg>) {
          return {{"reason", m.reason}};
        } else if constexpr (std::is_same_v<T, MusicControl>) {
          json j = json::object();
          if (m.track) j["track"] = *m.track;
          if (m.playing) j["playing"] = *m.playing;
          if (m.volume) j["volume"] = *m.volume;
          return j;
        } else {
          return {{"code", m.code}, {"message", m.message}};
        }
      },
      payload);
}

std::string encode(const Envelope& envelope) {
  json j = {{"type", type_name(envelope.payload)},
            {"seq", envelope.seq},
            {"t_mono", envelope.t_mono},
            {"payload", payload_json(envelope.payload)}};
  // Control characters are escaped by dump(), so the frame stays on one line.
  std::string line = j.dump(-1, ' ', false, json::error_handler_t::replace);
  line += '\n';
  return line;
}

DecodeResult decode(std::string_view line) {
  DecodeResult result;
  while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.remove_suffix(1);

  json j = json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    result.error = DecodeError::MalformedFrame;
    result.detail = "not a JSON object";
    return result;
  }
  const auto type_it = j.find("type");
  const auto seq_it = j.find("seq");
  const auto t_it = j.find("t_mono");
  const auto payload_it = j.find("payload");
  if (type_it == j.end() || !type_it->is_string() || seq_it == j.end() ||
      !seq_it->is_number_unsigned() || t_it == j.end() || !t_it->is_number() ||
      payload_it == j.end() || !payload_it->is_object()) {
    result.error = DecodeError::MalformedFrame;
    result.detail = "missing or mistyped envelope field";
    return result;
  }
  const std::string type = type_it->get<std::string>();
  const auto& names = registered_types();
  if (std::find(names.begin(), names.end(), type) == names.end()) {
    result.error = DecodeError::UnknownType;
    result.detail = "unknown message type";
    return result;
  }
  const double t_mono = t_it->get<double>();
  if (!std::isfinite(t_mono) || !all_finite(*payload_it)) {
    result.error = DecodeError::MalformedFrame;
    result.detail = "non-finite number";
    return result;
  }
  try {
    result.envelope = Envelope{seq_it->get<std::uint64_t>(), t_mono, payload_from(type, *payload_it)};
    result.raw_payload = std::move(*payload_it);
  } catch (const std::exception& e) {
    result.envelope.reset();
    result.error = DecodeError::MalformedFrame;
    result.detail = std::string("bad ") + type + " payload";
  }
  return result;
}

DecodeResult FrameDecoder::decode(std::string_view line) {
  DecodeResult result = protocol::decode(line);
  if (!result.ok()) return result;
  if (last_seq_ && result.envelope->seq <= *last_seq_) {
    result.envelope.reset();
    result.error = DecodeError::NonMonotonicSeq;
    result.detail = "seq did not increase";
    return result;
  }
  last_seq_ = result.envelope->seq;
  return result;
}

UiState make_ui_state(const WorldState& world, const ControlInput& input,
                      const std::optional<ActiveExplanation>& explanation, const MusicState& music) {
  UiState s;
  s.tick = world.tick;
  s.t = world.time;
  s.speed = world.ego.speed;
  s.gear = world.ego.gear;
  s.steering_norm = input.steering_norm;
  s.throttle = input.throttle;
  s.brake = input.brake;
  s.ego = {world.ego.x, world.ego.y, world.ego.heading};
  s.contours = world.detected;
  for (const auto& a : world.actors) {
    if (a.active) s.actors.push_back({a.id, a.kind, a.pose});
  }
  s.explanation = explanation;
  s.music = music;
  return s;
}

}  // namespace cabinsim::protocol
