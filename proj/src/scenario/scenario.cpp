#include "cabinsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace cabinsim {

using nlohmann::json;

std::string_view to_string(PolicyVariant variant) {
  switch (variant) {
    case PolicyVariant::NoExplanations: return "no_explanations";
    case PolicyVariant::Proactive: return "proactive";
    case PolicyVariant::OnDemand: return "on_demand";
  }
  return "no_explanations";
}

std::optional<PolicyVariant> policy_variant_from_string(std::string_view name) {
  if (name == "no_explanations") return PolicyVariant::NoExplanations;
  if (name == "proactive") return PolicyVariant::Proactive;
  if (name == "on_demand") return PolicyVariant::OnDemand;
  return std::nullopt;
}

std::string_view to_string(EventKind kind) {
  switch (kind) {
    case EventKind::PedestrianCrossing: return "pedestrian_crossing";
    case EventKind::CutIn: return "cut_in";
    case EventKind::EmergencyStop: return "emergency_stop";
    case EventKind::Custom: return "custom";
  }
  return "custom";
}

std::optional<EventKind> event_kind_from_string(std::string_view name) {
  if (name == "pedestrian_crossing") return EventKind::PedestrianCrossing;
  if (name == "cut_in") return EventKind::CutIn;
  if (name == "emergency_stop") return EventKind::EmergencyStop;
  if (name == "custom") return EventKind::Custom;
  return std::nullopt;
}

std::string_view to_string(TriggerSource source) {
  return source == TriggerSource::Proactive ? "proactive" : "user_request";
}

std::optional<TriggerSource> trigger_source_from_string(std::string_view name) {
  if (name == "proactive") return TriggerSource::Proactive;
  if (name == "user_request") return TriggerSource::UserRequest;
  return std::nullopt;
}

namespace {

// Field access that reports the JSON path of whatever is wrong.
const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object() || !obj.contains(key)) {
    throw ParseError(where + ": missing field '" + key + "'");
  }
  return obj.at(key);
}

double number(const json& value, const std::string& where) {
  if (!value.is_number()) throw ParseError(where + ": expected a number");
  return value.get<double>();
}

std::string text(const json& value, const std::string& where) {
  if (!value.is_string()) throw ParseError(where + ": expected a string");
  return value.get<std::string>();
}

Vec2 point2(const json& value, const std::string& where) {
  if (!value.is_array() || value.size() != 2) throw ParseError(where + ": expected [x, y]");
  return {number(value[0], where), number(value[1], where)};
}

std::vector<Vec2> polyline(const json& value, const std::string& where) {
  if (!value.is_array()) throw ParseError(where + ": expected a waypoint list");
  std::vector<Vec2> out;
  for (std::size_t i = 0; i < value.size(); ++i) {
    out.push_back(point2(value[i], where + "[" + std::to_string(i) + "]"));
  }
  return out;
}

json polyline_json(const std::vector<Vec2>& points) {
  json out = json::array();
  for (const auto& p : points) out.push_back({p.x, p.y});
  return out;
}

ActorKind parse_actor_kind(const json& value, const std::string& where) {
  auto kind = actor_kind_from_string(text(value, where));
  if (!kind) throw ParseError(where + ": unknown actor kind");
  return *kind;
}

EventAction parse_action(const json& value, const std::string& where) {
  const std::string type = text(require(value, "type", where), where + ".type");
  if (type == "spawn_actor") {
    SpawnActor spawn;
    spawn.kind = parse_actor_kind(require(value, "kind", where), where + ".kind");
    spawn.path = polyline(require(value, "path", where), where + ".path");
    spawn.speed = number(require(value, "speed", where), where + ".speed");
    return spawn;
  }
  if (type == "set_target_speed") {
    return SetTargetSpeed{number(require(value, "speed", where), where + ".speed")};
  }
  if (type == "emergency_stop") return ForceEmergencyStop{};
  throw ParseError(where + ".type: unknown action '" + type + "'");
}

json action_json(const EventAction& action) {
  return std::visit(
      [](const auto& a) -> json {
        using T = std::decay_t<decltype(a)>;
        if constexpr (std::is_same_v<T, SpawnActor>) {
          return {{"type", "spawn_actor"},
                  {"kind", to_string(a.kind)},
                  {"path", polyline_json(a.path)},
                  {"speed", a.speed}};
        } else if constexpr (std::is_same_v<T, SetTargetSpeed>) {
          return {{"type", "set_target_speed"}, {"speed", a.speed}};
        } else {
          return {{"type", "emergency_stop"}};
        }
      },
      action);
}

ScenarioEvent parse_event(const json& value, const std::string& where) {
  ScenarioEvent ev;
  ev.id = text(require(value, "id", where), where + ".id");
  const json& trig = require(value, "trigger", where);
  const std::string twhere = where + ".trigger";
  if (trig.contains("at_time")) {
    ev.trigger = TimeTrigger{number(trig.at("at_time"), twhere + ".at_time")};
  } else if (trig.contains("at_position")) {
    ev.trigger = PositionTrigger{point2(trig.at("at_position"), twhere + ".at_position"),
                                 number(require(trig, "radius", twhere), twhere + ".radius")};
  } else {
    throw ParseError(twhere + ": expected 'at_time' or 'at_position'");
  }
  auto kind = event_kind_from_string(text(require(value, "kind", where), where + ".kind"));
  if (!kind) throw ParseError(where + ".kind: unknown event kind");
  ev.kind = *kind;
  if (value.contains("safety_critical")) {
    if (!value["safety_critical"].is_boolean()) {
      throw ParseError(where + ".safety_critical: expected a boolean");
    }
    ev.safety_critical = value["safety_critical"].get<bool>();
  }
  if (value.contains("explanation_text")) {
    ev.explanation_text = text(value["explanation_text"], where + ".explanation_text");
  }
  if (value.contains("actions")) {
    const json& actions = value["actions"];
    if (!actions.is_array()) throw ParseError(where + ".actions: expected a list");
    for (std::size_t i = 0; i < actions.size(); ++i) {
      ev.actions.push_back(parse_action(actions[i], where + ".actions[" + std::to_string(i) + "]"));
    }
  }
  return ev;
}

}  // namespace

void validate_scenario(const ScenarioScript& script) {
  if (script.route.size() < 2) {
    throw ValidationError("route", "route must have at least 2 waypoints");
  }
  if (!(script.target_speed >= 0.0)) {
    throw ValidationError("target_speed", "target_speed must be >= 0");
  }
  if (script.policy.variant == PolicyVariant::OnDemand && !(script.policy.request_window > 0.0)) {
    throw ValidationError("policy.request_window_s", "request_window_s must be > 0 for on_demand");
  }
  std::set<std::string> ids;
  for (std::size_t i = 0; i < script.events.size(); ++i) {
    const auto& ev = script.events[i];
    const std::string where = "events[" + std::to_string(i) + "]";
    if (ev.id.empty()) throw ValidationError(where + ".id", "event id must be non-empty");
    if (!ids.insert(ev.id).second) {
      throw ValidationError(where + ".id", "duplicate event id " + ev.id);
    }
    if (const auto* pos = std::get_if<PositionTrigger>(&ev.trigger); pos && !(pos->radius > 0.0)) {
      throw ValidationError(where + ".trigger.radius", "positional trigger radius must be > 0");
    }
    if (ev.safety_critical && ev.explanation_text.empty()) {
      throw ValidationError(where + ".explanation_text",
                            "missing explanation_text on safety-critical event " + ev.id);
    }
    for (std::size_t a = 0; a < ev.actions.size(); ++a) {
      if (const auto* spawn = std::get_if<SpawnActor>(&ev.actions[a]); spawn && spawn->path.size() < 2) {
        throw ValidationError(where + ".actions[" + std::to_string(a) + "].path",
                              "spawned actor path must have at least 2 waypoints");
      }
    }
  }
  std::set<ActorId> actor_ids;
  for (std::size_t i = 0; i < script.actors.size(); ++i) {
    const std::string where = "actors[" + std::to_string(i) + "]";
    if (!actor_ids.insert(script.actors[i].id).second) {
      throw ValidationError(where + ".id", "duplicate actor id " + std::to_string(script.actors[i].id));
    }
    if (script.actors[i].path.size() < 2) {
      throw ValidationError(where + ".path", "actor path must have at least 2 waypoints");
    }
  }
}

ScenarioScript load_scenario(std::string_view document) {
  json doc;
  try {
    doc = json::parse(document);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed scenario document: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("scenario document must be a JSON object");

  ScenarioScript script;
  script.id = text(require(doc, "id", "scenario"), "id");
  script.route = polyline(require(doc, "route", "scenario"), "route");
  script.target_speed = number(require(doc, "target_speed", "scenario"), "target_speed");
  if (doc.contains("max_duration_s")) {
    script.max_duration = number(doc["max_duration_s"], "max_duration_s");
  }

  const json& pol = require(doc, "policy", "scenario");
  auto variant = policy_variant_from_string(text(require(pol, "variant", "policy"), "policy.variant"));
  if (!variant) throw ParseError("policy.variant: unknown policy variant");
  script.policy.variant = *variant;
  if (pol.contains("request_window_s")) {
    script.policy.request_window = number(pol["request_window_s"], "policy.request_window_s");
  }
  if (pol.contains("agent_name")) {
    script.policy.agent_name = text(pol["agent_name"], "policy.agent_name");
  }

  if (doc.contains("events")) {
    const json& events = doc["events"];
    if (!events.is_array()) throw ParseError("events: expected a list");
    for (std::size_t i = 0; i < events.size(); ++i) {
      script.events.push_back(parse_event(events[i], "events[" + std::to_string(i) + "]"));
    }
  }
  if (doc.contains("actors")) {
    const json& actors = doc["actors"];
    if (!actors.is_array()) throw ParseError("actors: expected a list");
    for (std::size_t i = 0; i < actors.size(); ++i) {
      const std::string where = "actors[" + std::to_string(i) + "]";
      ScenarioActor actor;
      const json& id = require(actors[i], "id", where);
      if (!id.is_number_unsigned()) throw ParseError(where + ".id: expected a non-negative integer");
      actor.id = id.get<ActorId>();
      actor.kind = parse_actor_kind(require(actors[i], "kind", where), where + ".kind");
      actor.path = polyline(require(actors[i], "path", where), where + ".path");
      actor.speed = number(require(actors[i], "speed", where), where + ".speed");
      script.actors.push_back(std::move(actor));
    }
  }

  validate_scenario(script);
  return script;
}

ScenarioScript load_scenario_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_scenario(buf.str());
}

std::string serialize_scenario(const ScenarioScript& script) {
  json doc;
  doc["id"] = script.id;
  doc["route"] = polyline_json(script.route);
  doc["target_speed"] = script.target_speed;
  if (script.max_duration > 0.0) doc["max_duration_s"] = script.max_duration;
  doc["policy"] = {{"variant", to_string(script.policy.variant)},
                   {"request_window_s", script.policy.request_window},
                   {"agent_name", script.policy.agent_name}};
  doc["events"] = json::array();
  for (const auto& ev : script.events) {
    json e;
    e["id"] = ev.id;
    if (const auto* t = std::get_if<TimeTrigger>(&ev.trigger)) {
      e["trigger"] = {{"at_time", t->at_time}};
    } else {
      const auto& p = std::get<PositionTrigger>(ev.trigger);
      e["trigger"] = {{"at_position", {p.at_position.x, p.at_position.y}}, {"radius", p.radius}};
    }
    e["kind"] = to_string(ev.kind);
    e["safety_critical"] = ev.safety_critical;
    e["explanation_text"] = ev.explanation_text;
    e["actions"] = json::array();
    for (const auto& a : ev.actions) e["actions"].push_back(action_json(a));
    doc["events"].push_back(std::move(e));
  }
  doc["actors"] = json::array();
  for (const auto& a : script.actors) {
    doc["actors"].push_back(
        {{"id", a.id}, {"kind", to_string(a.kind)}, {"path", polyline_json(a.path)}, {"speed", a.speed}});
  }
  return doc.dump(2);
}

WorldState initial_world(const ScenarioScript& script, std::uint64_t seed) {
  WorldState world;
  world.seed = seed;
  world.ego.x = script.route[0].x;
  world.ego.y = script.route[0].y;
  world.ego.heading = std::atan2(script.route[1].y - script.route[0].y,
                                 script.route[1].x - script.route[0].x);
  world.autopilot.target_speed = script.target_speed;
  ActorId max_id = 0;
  for (const auto& a : script.actors) {
    world.actors.push_back(make_actor(a.id, a.kind, a.path, a.speed));
    max_id = std::max(max_id, a.id);
  }
  world.next_actor_id = max_id + 1;
  return world;
}

bool trigger_holds(const Trigger& trigger, const WorldState& world) {
  if (const auto* t = std::get_if<TimeTrigger>(&trigger)) return world.time >= t->at_time;
  const auto& p = std::get<PositionTrigger>(trigger);
  return std::hypot(world.ego.x - p.at_position.x, world.ego.y - p.at_position.y) <= p.radius;
}

std::vector<ScenarioEvent> eval_triggers(const WorldState& world, const ScenarioScript& script,
                                         const std::set<std::string>& fired) {
  std::vector<ScenarioEvent> out;
  for (const auto& ev : script.events) {
    if (fired.count(ev.id) == 0 && trigger_holds(ev.trigger, world)) out.push_back(ev);
  }
  std::sort(out.begin(), out.end(),
            [](const ScenarioEvent& a, const ScenarioEvent& b) { return a.id < b.id; });
  return out;
}

std::optional<ExplanationEvent> explanation_policy(const ScenarioEvent& event, double t_event,
                                                   const AgentPolicy& policy,
                                                   std::optional<double> pending_request,
                                                   double now) {
  if (event.explanation_text.empty()) return std::nullopt;
  switch (policy.variant) {
    case PolicyVariant::NoExplanations:
      return std::nullopt;
    case PolicyVariant::Proactive:
      return ExplanationEvent{event.id, t_event, event.explanation_text, "text_and_speech",
                              TriggerSource::Proactive};
    case PolicyVariant::OnDemand:
      if (pending_request && *pending_request >= t_event &&
          *pending_request <= t_event + policy.request_window) {
        return ExplanationEvent{event.id, now, event.explanation_text, "text_and_speech",
                                TriggerSource::UserRequest};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

WorldState apply_event(const WorldState& world, const ScenarioEvent& event) {
  WorldState next = world;
  for (const auto& action : event.actions) {
    std::visit(
        [&next](const auto& a) {
          using T = std::decay_t<decltype(a)>;
          if constexpr (std::is_same_v<T, SpawnActor>) {
            next.actors.push_back(make_actor(next.next_actor_id++, a.kind, a.path, a.speed));
          } else if constexpr (std::is_same_v<T, SetTargetSpeed>) {
            next.autopilot.target_speed = a.speed;
          } else {
            next.autopilot.emergency_stop = true;
          }
        },
        action);
  }
  return next;
}

ScenarioSession::ScenarioSession(ScenarioScript script) : script_(std::move(script)) {
  validate_scenario(script_);
}

std::vector<FiredEvent> ScenarioSession::advance(WorldState& world) {
  std::vector<FiredEvent> out;
  for (auto& ev : eval_triggers(world, script_, fired_ids_)) {
    fired_ids_.insert(ev.id);
    fired_at_[ev.id] = world.time;
    firing_order_.push_back(ev.id);
    world = apply_event(world, ev);

    FiredEvent fired{std::move(ev), world.time, std::nullopt};
    fired.explanation =
        explanation_policy(fired.event, fired.t_event, script_.policy, std::nullopt, world.time);
    if (fired.explanation) explained_.insert(fired.event.id);
    out.push_back(std::move(fired));
  }
  return out;
}

RequestOutcome ScenarioSession::request(double now) {
  RequestOutcome outcome;
  if (script_.policy.variant != PolicyVariant::OnDemand) {
    outcome.dropped_reason = "policy_ignores_requests";
    return outcome;
  }
  bool any_in_window = false;
  // Most recently fired event whose window still covers the request.
  for (auto it = firing_order_.rbegin(); it != firing_order_.rend(); ++it) {
    const double t_event = fired_at_.at(*it);
    if (now < t_event || now > t_event + script_.policy.request_window) continue;
    const auto ev = std::find_if(script_.events.begin(), script_.events.end(),
                                 [&](const ScenarioEvent& e) { return e.id == *it; });
    if (ev->explanation_text.empty()) continue;
    any_in_window = true;
    if (explained_.count(*it) != 0) continue;
    outcome.explanation = explanation_policy(*ev, t_event, script_.policy, now, now);
    if (outcome.explanation) {
      explained_.insert(*it);
      return outcome;
    }
  }
  outcome.dropped_reason = any_in_window ? "already_explained" : "no_event_in_window";
  return outcome;
}

}  // namespace cabinsim
