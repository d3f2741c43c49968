#include <doctest.h>

#include <random>

#include "cabinsim/scenario.hpp"

using namespace cabinsim;

namespace {

ScenarioEvent time_event(std::string id, double at, bool critical = true, std::string text = "because") {
  ScenarioEvent e;
  e.id = std::move(id);
  e.trigger = TimeTrigger{at};
  e.kind = critical ? EventKind::PedestrianCrossing : EventKind::Custom;
  e.safety_critical = critical;
  e.explanation_text = critical ? std::move(text) : "";
  return e;
}

ScenarioScript base_script(PolicyVariant variant = PolicyVariant::Proactive) {
  ScenarioScript s;
  s.id = "unit";
  s.route = {{0, 0}, {1000, 0}};
  s.target_speed = 10.0;
  s.policy.variant = variant;
  s.policy.agent_name = "Agent";
  return s;
}

WorldState at_time(double t) {
  WorldState w;
  w.time = t;
  return w;
}

constexpr const char* kPilotDoc = R"({
  "id": "pilot",
  "route": [[0, 0], [500, 0]],
  "target_speed": 12,
  "policy": {"variant": "on_demand", "request_window_s": 10, "agent_name": "Lumo"},
  "events": [
    {"id": "a", "trigger": {"at_time": 10}, "kind": "pedestrian_crossing", "safety_critical": true,
     "explanation_text": "pedestrian", "actions": [
       {"type": "spawn_actor", "kind": "pedestrian", "path": [[150, -5], [150, 5]], "speed": 1.2}]},
    {"id": "b", "trigger": {"at_position": [200, 0], "radius": 5}, "kind": "cut_in",
     "safety_critical": true, "explanation_text": "cut in", "actions": []},
    {"id": "c", "trigger": {"at_time": 40}, "kind": "custom", "safety_critical": true,
     "explanation_text": "slowing", "actions": [{"type": "set_target_speed", "speed": 5}]},
    {"id": "d", "trigger": {"at_time": 60}, "kind": "emergency_stop", "safety_critical": true,
     "explanation_text": "stopped", "actions": [{"type": "emergency_stop"}]}
  ],
  "actors": [{"id": 3, "kind": "car", "path": [[10, 3.5], [400, 3.5]], "speed": 9}]
})";

}  // namespace

TEST_SUITE("scenario") {
  TEST_CASE("pilot-style script loads with four events") {
    const ScenarioScript s = load_scenario(kPilotDoc);
    CHECK(s.events.size() == 4);
    CHECK(s.policy.variant == PolicyVariant::OnDemand);
    CHECK(s.policy.request_window == 10.0);
    CHECK(s.actors.size() == 1);
  }

  TEST_CASE("bundled templates: one per policy, four safety-critical events, emergency stop last") {
    int variants = 0;
    for (const char* name : {"pilot_nelo", "pilot_coda", "pilot_lumo"}) {
      const ScenarioScript s = load_scenario_file(std::string(CABINSIM_SCENARIO_DIR) + "/" + name + ".json");
      std::vector<const ScenarioEvent*> critical;
      for (const auto& e : s.events) {
        if (e.safety_critical) critical.push_back(&e);
      }
      CHECK(critical.size() == 4);
      CHECK(critical.back()->kind == EventKind::EmergencyStop);
      variants |= 1 << static_cast<int>(s.policy.variant);
    }
    CHECK(variants == 0b111);
  }

  TEST_CASE("zero events is valid") {
    const ScenarioScript s = load_scenario(R"({"id":"x","route":[[0,0],[1,0]],"target_speed":1,
      "policy":{"variant":"no_explanations","agent_name":"Nelo"},"events":[],"actors":[]})");
    CHECK(s.events.empty());
  }

  TEST_CASE("validation errors name the field") {
    auto s = base_script();
    s.events = {time_event("e1", 1.0), time_event("e1", 2.0)};
    try {
      validate_scenario(s);
      FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
      CHECK(std::string(e.what()).find("duplicate event id e1") != std::string::npos);
    }

    auto empty_route = base_script();
    empty_route.route.clear();
    CHECK_THROWS_AS(validate_scenario(empty_route), ValidationError);

    auto silent = base_script();
    silent.events = {time_event("e1", 1.0, true, "")};
    CHECK_THROWS_AS(validate_scenario(silent), ValidationError);

    CHECK_THROWS_AS(load_scenario("{\"id\": "), ParseError);
    CHECK_THROWS_AS(load_scenario(R"({"id":"x","route":[[0,0],[1,0]],"target_speed":1,
      "policy":{"variant":"on_demand","request_window_s":0,"agent_name":"L"},"events":[],"actors":[]})"),
                    ValidationError);
  }

  TEST_CASE("serialize round trip") {
    const ScenarioScript s = load_scenario(kPilotDoc);
    CHECK(load_scenario(serialize_scenario(s)) == s);
    for (const char* name : {"pilot_nelo", "pilot_coda", "pilot_lumo"}) {
      const auto t = load_scenario_file(std::string(CABINSIM_SCENARIO_DIR) + "/" + name + ".json");
      CHECK(load_scenario(serialize_scenario(t)) == t);
    }
  }

  TEST_CASE("time trigger is inclusive") {
    auto s = base_script();
    s.events = {time_event("e", 5.0)};
    CHECK(eval_triggers(at_time(4.983), s, {}).empty());
    CHECK(eval_triggers(at_time(5.0), s, {}).size() == 1);
  }

  TEST_CASE("position trigger") {
    auto s = base_script();
    ScenarioEvent e = time_event("p", 0.0);
    e.trigger = PositionTrigger{{100, 0}, 5.0};
    s.events = {e};
    WorldState w;
    w.ego.x = 96.0;
    CHECK(eval_triggers(w, s, {}).size() == 1);
    w.ego.x = 94.9;
    CHECK(eval_triggers(w, s, {}).empty());
  }

  TEST_CASE("results ordered by id") {
    auto s = base_script();
    s.events = {time_event("z", 1.0), time_event("a", 1.0), time_event("m", 1.0)};
    const auto fired = eval_triggers(at_time(2.0), s, {});
    REQUIRE(fired.size() == 3);
    CHECK(fired[0].id == "a");
    CHECK(fired[1].id == "m");
    CHECK(fired[2].id == "z");
  }

  TEST_CASE("each event fires once over 10^4 ticks") {
    auto s = base_script();
    ScenarioEvent pos = time_event("pos", 0.0);
    pos.trigger = PositionTrigger{{0, 0}, 1000.0};  // holds every tick
    s.events = {time_event("t1", 0.0), time_event("t2", 50.0), pos};
    ScenarioSession session(s);
    WorldState w = initial_world(s, 1);
    std::map<std::string, int> count;
    for (int i = 0; i < 10000; ++i) {
      w = step(w, {}, kDefaultDt);
      for (const auto& f : session.advance(w)) ++count[f.event.id];
    }
    CHECK(count.size() == 3);
    for (const auto& [id, n] : count) CHECK(n == 1);
  }

  TEST_CASE("policy examples") {
    const ScenarioEvent ev = time_event("e", 12.0);
    AgentPolicy nelo{PolicyVariant::NoExplanations, 10.0, "Nelo"};
    AgentPolicy coda{PolicyVariant::Proactive, 10.0, "Coda"};
    AgentPolicy lumo{PolicyVariant::OnDemand, 10.0, "Lumo"};

    CHECK_FALSE(explanation_policy(ev, 12.0, nelo, 13.0, 13.0));
    const auto p = explanation_policy(ev, 12.0, coda, std::nullopt, 12.0);
    REQUIRE(p);
    CHECK(p->t_issued == 12.0);
    CHECK(p->trigger_source == TriggerSource::Proactive);

    CHECK_FALSE(explanation_policy(ev, 30.0, lumo, std::nullopt, 45.0));
    CHECK_FALSE(explanation_policy(ev, 30.0, lumo, 40.5, 40.5));
    const auto r = explanation_policy(ev, 30.0, lumo, 40.0, 40.0);
    REQUIRE(r);
    CHECK(r->trigger_source == TriggerSource::UserRequest);
  }

  TEST_CASE("policy exclusivity over random requests") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 40.0);
    const ScenarioEvent ev = time_event("e", 0.0);
    for (int i = 0; i < 5000; ++i) {
      const double t_event = u(rng);
      const std::optional<double> req =
          (i % 3 == 0) ? std::nullopt : std::optional<double>(t_event + u(rng) - 5.0);
      const double now = req ? std::max(*req, t_event) : t_event;
      for (auto variant : {PolicyVariant::NoExplanations, PolicyVariant::Proactive, PolicyVariant::OnDemand}) {
        const auto out = explanation_policy(ev, t_event, {variant, 10.0, "A"}, req, now);
        switch (variant) {
          case PolicyVariant::NoExplanations:
            CHECK_FALSE(out);
            break;
          case PolicyVariant::Proactive:
            REQUIRE(out);
            CHECK(out->trigger_source == TriggerSource::Proactive);
            break;
          case PolicyVariant::OnDemand: {
            const bool in_window = req && *req >= t_event && *req <= t_event + 10.0;
            CHECK(out.has_value() == in_window);
            if (out) CHECK(out->trigger_source == TriggerSource::UserRequest);
            break;
          }
        }
      }
    }
  }

  TEST_CASE("apply_event effects") {
    const ScenarioScript s = load_scenario(kPilotDoc);
    WorldState w = initial_world(s, 0);
    const std::size_t before = w.actors.size();
    WorldState spawned = apply_event(w, s.events[0]);
    CHECK(spawned.actors.size() == before + 1);
    CHECK(spawned.actors.back().id == 4);  // fresh id past the scripted actor
    CHECK(spawned.actors.back().kind == ActorKind::Pedestrian);

    CHECK(apply_event(w, s.events[1]) == w);
    CHECK(apply_event(w, s.events[2]).autopilot.target_speed == 5.0);
    CHECK(apply_event(w, s.events[3]).autopilot.emergency_stop);
  }

  TEST_CASE("session requests pick the newest unexplained event in window") {
    auto s = base_script(PolicyVariant::OnDemand);
    s.events = {time_event("e1", 1.0), time_event("e2", 3.0), time_event("n", 3.5, false)};
    ScenarioSession session(s);
    WorldState w;
    w.time = 3.5;
    CHECK(session.advance(w).size() == 3);

    auto first = session.request(4.0);
    REQUIRE(first.explanation);
    CHECK(first.explanation->event_id == "e2");
    auto second = session.request(4.0);
    REQUIRE(second.explanation);
    CHECK(second.explanation->event_id == "e1");
    CHECK(session.request(4.0).dropped_reason == "already_explained");
    CHECK(session.request(20.0).dropped_reason == "no_event_in_window");

    ScenarioSession proactive(base_script(PolicyVariant::Proactive));
    CHECK(proactive.request(1.0).dropped_reason == "policy_ignores_requests");
  }
}
