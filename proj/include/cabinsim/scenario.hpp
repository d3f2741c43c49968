#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "cabinsim/sim.hpp"

namespace cabinsim {

enum class PolicyVariant : std::uint8_t { NoExplanations, Proactive, OnDemand };

std::string_view to_string(PolicyVariant variant);
std::optional<PolicyVariant> policy_variant_from_string(std::string_view name);

inline constexpr double kDefaultRequestWindow = 10.0;

struct AgentPolicy {
  PolicyVariant variant = PolicyVariant::NoExplanations;
  double request_window = kDefaultRequestWindow;  // s, OnDemand only
  std::string agent_name;
  friend bool operator==(const AgentPolicy&, const AgentPolicy&) = default;
};

struct TimeTrigger {
  double at_time = 0.0;
  friend bool operator==(const TimeTrigger&, const TimeTrigger&) = default;
};

struct PositionTrigger {
  Vec2 at_position;
  double radius = 0.0;
  friend bool operator==(const PositionTrigger&, const PositionTrigger&) = default;
};

using Trigger = std::variant<TimeTrigger, PositionTrigger>;

enum class EventKind : std::uint8_t { PedestrianCrossing, CutIn, EmergencyStop, Custom };

std::string_view to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(std::string_view name);

struct SpawnActor {
  ActorKind kind = ActorKind::Pedestrian;
  std::vector<Vec2> path;
  double speed = 0.0;
  friend bool operator==(const SpawnActor&, const SpawnActor&) = default;
};

struct SetTargetSpeed {
  double speed = 0.0;
  friend bool operator==(const SetTargetSpeed&, const SetTargetSpeed&) = default;
};

struct ForceEmergencyStop {
  friend bool operator==(const ForceEmergencyStop&, const ForceEmergencyStop&) = default;
};

using EventAction = std::variant<SpawnActor, SetTargetSpeed, ForceEmergencyStop>;

struct ScenarioEvent {
  std::string id;
  Trigger trigger = TimeTrigger{};
  EventKind kind = EventKind::Custom;
  bool safety_critical = false;
  std::string explanation_text;
  std::vector<EventAction> actions;
  friend bool operator==(const ScenarioEvent&, const ScenarioEvent&) = default;
};

struct ScenarioActor {
  ActorId id = 0;
  ActorKind kind = ActorKind::Car;
  std::vector<Vec2> path;
  double speed = 0.0;
  friend bool operator==(const ScenarioActor&, const ScenarioActor&) = default;
};

struct ScenarioScript {
  std::string id;
  std::vector<Vec2> route;
  double target_speed = 0.0;
  AgentPolicy policy;
  std::vector<ScenarioEvent> events;
  std::vector<ScenarioActor> actors;
  // Optional session length cap; 0 runs until the route is exhausted.
  double max_duration = 0.0;
  friend bool operator==(const ScenarioScript&, const ScenarioScript&) = default;
};

enum class TriggerSource : std::uint8_t { Proactive, UserRequest };

std::string_view to_string(TriggerSource source);
std::optional<TriggerSource> trigger_source_from_string(std::string_view name);

struct ExplanationEvent {
  std::string event_id;
  double t_issued = 0.0;
  std::string text;
  std::string modality = "text_and_speech";
  TriggerSource trigger_source = TriggerSource::Proactive;
  friend bool operator==(const ExplanationEvent&, const ExplanationEvent&) = default;
};

// Parses and validates a scenario JSON document. Throws ParseError or
// ValidationError (naming the offending field).
ScenarioScript load_scenario(std::string_view document);
ScenarioScript load_scenario_file(const std::string& path);

// Validation alone, for scripts built in code.
void validate_scenario(const ScenarioScript& script);

std::string serialize_scenario(const ScenarioScript& script);

// Initial world for a script: ego at the first route waypoint facing the
// second, scripted actors placed, autopilot target speed set.
WorldState initial_world(const ScenarioScript& script, std::uint64_t seed);

bool trigger_holds(const Trigger& trigger, const WorldState& world);

// Unfired events whose condition holds now, ordered by event id.
std::vector<ScenarioEvent> eval_triggers(const WorldState& world, const ScenarioScript& script,
                                         const std::set<std::string>& fired);

std::optional<ExplanationEvent> explanation_policy(const ScenarioEvent& event, double t_event,
                                                   const AgentPolicy& policy,
                                                   std::optional<double> pending_request,
                                                   double now);

WorldState apply_event(const WorldState& world, const ScenarioEvent& event);

struct FiredEvent {
  ScenarioEvent event;
  double t_event = 0.0;
  std::optional<ExplanationEvent> explanation;  // proactive explanation, if any
};

struct RequestOutcome {
  std::optional<ExplanationEvent> explanation;
  // Set when the request was dropped: "no_event_in_window" or "already_explained".
  std::string dropped_reason;
};

// Single-owner session state: which events fired, which were explained.
class ScenarioSession {
 public:
  explicit ScenarioSession(ScenarioScript script);

  const ScenarioScript& script() const { return script_; }

  // Evaluates triggers against the world after a tick, applies fired events
  // to it, and returns them in firing order.
  std::vector<FiredEvent> advance(WorldState& world);

  // Handles an explanation request made at `now`.
  RequestOutcome request(double now);

  const std::map<std::string, double>& fired() const { return fired_at_; }
  const std::set<std::string>& explained() const { return explained_; }

 private:
  ScenarioScript script_;
  std::set<std::string> fired_ids_;
  std::map<std::string, double> fired_at_;
  std::vector<std::string> firing_order_;
  std::set<std::string> explained_;
};

}  // namespace cabinsim
