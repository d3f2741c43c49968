#include <cmath>

#include "cabinsim/telemetry.hpp"

namespace cabinsim {

using nlohmann::json;

std::string_view to_string(TouchAction action) {
  switch (action) {
    case TouchAction::Down: return "down";
    case TouchAction::Up: return "up";
    case TouchAction::Tap: return "tap";
  }
  return "tap";
}

std::optional<TouchAction> touch_action_from_string(std::string_view name) {
  if (name == "down") return TouchAction::Down;
  if (name == "up") return TouchAction::Up;
  if (name == "tap") return TouchAction::Tap;
  return std::nullopt;
}

double record_time(const TelemetryRecord& rec) {
  return std::visit([](const auto& r) { return r.t; }, rec);
}

std::string_view record_type(const TelemetryRecord& rec) {
  static constexpr std::string_view names[] = {"session_header", "gaze",  "touch",
                                               "vehicle",        "event", "explanation",
                                               "inbound",        "note",  "session_end"};
  return names[rec.index()];
}

namespace {

Vec3 vec3(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ParseError("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json input_json(const ControlInput& in) {
  json j = {{"steering_norm", in.steering_norm},
            {"throttle", in.throttle},
            {"brake", in.brake},
            {"t_mono", in.t_mono}};
  if (in.gear_request) j["gear"] = to_string(*in.gear_request);
  return j;
}

ControlInput input_from_json(const json& j) {
  ControlInput in;
  in.steering_norm = j.at("steering_norm").get<double>();
  in.throttle = j.at("throttle").get<double>();
  in.brake = j.at("brake").get<double>();
  in.t_mono = j.value("t_mono", 0.0);
  if (j.contains("gear")) {
    auto gear = gear_from_string(j["gear"].get<std::string>());
    if (!gear) throw ParseError("unknown gear");
    in.gear_request = gear;
  }
  return in;
}

template <typename E, typename F>
E parse_enum(const json& j, F from_string, const char* what) {
  auto value = from_string(j.template get<std::string>());
  if (!value) throw ParseError(std::string("unknown ") + what);
  return *value;
}

}  // namespace

json gaze_fields(const GazeSample& g) {
  return {{"t", g.t},
          {"origin", g.origin},
          {"direction", g.direction},
          {"pupil_l", g.pupil_l},
          {"pupil_r", g.pupil_r},
          {"valid_l", g.valid_l},
          {"valid_r", g.valid_r}};
}

GazeSample gaze_from_fields(const json& j) {
  GazeSample g;
  g.t = j.at("t").get<double>();
  g.origin = vec3(j.at("origin"));
  g.direction = vec3(j.at("direction"));
  g.pupil_l = j.at("pupil_l").get<double>();
  g.pupil_r = j.at("pupil_r").get<double>();
  g.valid_l = j.at("valid_l").get<bool>();
  g.valid_r = j.at("valid_r").get<bool>();
  return g;
}

json vehicle_state_json(const VehicleState& s) {
  return {{"x", s.x},
          {"y", s.y},
          {"heading", s.heading},
          {"speed", s.speed},
          {"steering_angle", s.steering_angle},
          {"gear", to_string(s.gear)}};
}

VehicleState vehicle_state_from_json(const json& j) {
  VehicleState s;
  s.x = j.at("x").get<double>();
  s.y = j.at("y").get<double>();
  s.heading = j.at("heading").get<double>();
  s.speed = j.at("speed").get<double>();
  s.steering_angle = j.at("steering_angle").get<double>();
  s.gear = parse_enum<Gear>(j.at("gear"), gear_from_string, "gear");
  return s;
}

json to_json(const TelemetryRecord& rec) {
  json j = std::visit(
      [](const auto& r) -> json {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, SessionHeader>) {
          return {{"t", r.t},
                  {"schema_version", r.schema_version},
                  {"seed", r.seed},
                  {"scenario_id", r.scenario_id},
                  {"policy", r.policy},
                  {"agent_name", r.agent_name},
                  {"dt", r.dt},
                  {"start_wall_time", r.start_wall_time},
                  {"module_version", r.module_version}};
        } else if constexpr (std::is_same_v<T, GazeSample>) {
          return gaze_fields(r);
        } else if constexpr (std::is_same_v<T, TouchSample>) {
          return {{"t", r.t},
                  {"x_norm", r.x_norm},
                  {"y_norm", r.y_norm},
                  {"target_id", r.target_id},
                  {"action", to_string(r.action)}};
        } else if constexpr (std::is_same_v<T, VehicleSample>) {
          return {{"t", r.t},
                  {"tick", r.tick},
                  {"state", vehicle_state_json(r.state)},
                  {"input", input_json(r.input)}};
        } else if constexpr (std::is_same_v<T, EventMarker>) {
          return {{"t", r.t},
                  {"event_id", r.event_id},
                  {"kind", to_string(r.kind)},
                  {"safety_critical", r.safety_critical},
                  {"explanation_issued", r.explanation_issued}};
        } else if constexpr (std::is_same_v<T, ExplanationRecord>) {
          return {{"t", r.t},
                  {"event_id", r.event_id},
                  {"text", r.text},
                  {"agent_name", r.agent_name},
                  {"trigger_source", to_string(r.trigger_source)}};
        } else if constexpr (std::is_same_v<T, InboundFrame>) {
          return {{"t", r.t},
                  {"connection", r.connection},
                  {"role", r.role},
                  {"type", r.type},
                  {"seq", r.seq},
                  {"payload", r.payload}};
        } else if constexpr (std::is_same_v<T, Note>) {
          return {{"t", r.t}, {"kind", r.kind}, {"detail", r.detail}};
        } else {
          return {{"t", r.t}, {"reason", r.reason}, {"ticks", r.ticks}};
        }
      },
      rec);
  j["rec"] = record_type(rec);
  return j;
}

TelemetryRecord record_from_json(const json& j) {
  try {
    if (!j.is_object()) throw ParseError("record is not a JSON object");
    const std::string type = j.at("rec").get<std::string>();
    const double t = j.at("t").get<double>();
    if (!std::isfinite(t)) throw ParseError("non-finite record time");

    if (type == "session_header") {
      SessionHeader h;
      h.t = t;
      h.schema_version = j.at("schema_version").get<int>();
      h.seed = j.at("seed").get<std::uint64_t>();
      h.scenario_id = j.at("scenario_id").get<std::string>();
      h.policy = j.value("policy", "");
      h.agent_name = j.value("agent_name", "");
      h.dt = j.at("dt").get<double>();
      h.start_wall_time = j.at("start_wall_time").get<std::string>();
      h.module_version = j.at("module_version").get<std::string>();
      return h;
    }
    if (type == "gaze") return gaze_from_fields(j);
    if (type == "touch") {
      TouchSample s;
      s.t = t;
      s.x_norm = j.at("x_norm").get<double>();
      s.y_norm = j.at("y_norm").get<double>();
      s.target_id = j.at("target_id").get<std::string>();
      s.action = parse_enum<TouchAction>(j.at("action"), touch_action_from_string, "touch action");
      return s;
    }
    if (type == "vehicle") {
      VehicleSample v;
      v.t = t;
      v.tick = j.at("tick").get<std::uint64_t>();
      v.state = vehicle_state_from_json(j.at("state"));
      v.input = input_from_json(j.at("input"));
      return v;
    }
    if (type == "event") {
      EventMarker m;
      m.t = t;
      m.event_id = j.at("event_id").get<std::string>();
      m.kind = parse_enum<EventKind>(j.at("kind"), event_kind_from_string, "event kind");
      m.safety_critical = j.at("safety_critical").get<bool>();
      m.explanation_issued = j.at("explanation_issued").get<bool>();
      return m;
    }
    if (type == "explanation") {
      ExplanationRecord e;
      e.t = t;
      e.event_id = j.at("event_id").get<std::string>();
      e.text = j.at("text").get<std::string>();
      e.agent_name = j.at("agent_name").get<std::string>();
      e.trigger_source = parse_enum<TriggerSource>(j.at("trigger_source"),
                                                   trigger_source_from_string, "trigger source");
      return e;
    }
    if (type == "inbound") {
      InboundFrame f;
      f.t = t;
      f.connection = j.at("connection").get<std::uint64_t>();
      f.role = j.at("role").get<std::string>();
      f.type = j.at("type").get<std::string>();
      f.seq = j.at("seq").get<std::uint64_t>();
      f.payload = j.at("payload");
      return f;
    }
    if (type == "note") return Note{t, j.at("kind").get<std::string>(), j.at("detail").get<std::string>()};
    if (type == "session_end") {
      return SessionEnd{t, j.at("reason").get<std::string>(), j.at("ticks").get<std::uint64_t>()};
    }
    throw ParseError("unknown record type '" + type + "'");
  } catch (const json::exception& e) {
    throw ParseError(e.what());
  }
}

}  // namespace cabinsim
