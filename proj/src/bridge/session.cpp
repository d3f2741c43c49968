#include "cabinsim/session.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace cabinsim {

using nlohmann::json;
using protocol::ClientRole;

void InputLatch::push(const ControlInput& input) { pending_.push_back(clamp_input(input)); }

ControlInput InputLatch::latest_input() {
  if (!pending_.empty()) {
    superseded_ += pending_.size() - 1;
    held_ = pending_.back();
    pending_.clear();
  }
  return held_;
}

std::vector<InputTraceEntry> load_input_trace(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open input trace '" + path.string() + "'");
  std::vector<InputTraceEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      if (j.contains("rec")) {
        if (j["rec"] != "vehicle") continue;
        const json& input = j.at("input");
        out.push_back({j.at("tick").get<std::uint64_t>(),
                       clamp_input({input.at("steering_norm").get<double>(),
                                    input.at("throttle").get<double>(),
                                    input.at("brake").get<double>(), 0.0, std::nullopt})});
      } else {
        out.push_back({j.at("tick").get<std::uint64_t>(),
                       clamp_input({j.at("steering_norm").get<double>(), j.at("throttle").get<double>(),
                                    j.at("brake").get<double>(), 0.0, std::nullopt})});
      }
    } catch (const json::exception& e) {
      throw ParseError("input trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const InputTraceEntry& a, const InputTraceEntry& b) { return a.tick < b.tick; });
  return out;
}

namespace {

std::vector<GazeSample> load_gaze_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open gaze replay '" + path.string() + "'");
  std::vector<GazeSample> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object() || j.value("rec", "") != "gaze") continue;
    out.push_back(std::get<GazeSample>(record_from_json(j)));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const GazeSample& a, const GazeSample& b) { return a.t < b.t; });
  return out;
}

}  // namespace

SimulationSession::SimulationSession(ScenarioScript script, SessionConfig config, SessionWriter writer)
    : scenario_(std::move(script)), config_(std::move(config)), writer_(std::move(writer)) {
  world_ = initial_world(scenario_.script(), config_.seed);
  world_.detected = detect_objects(world_, config_.sim.detection_range);
  if (config_.max_duration <= 0.0) config_.max_duration = scenario_.script().max_duration;

  if (config_.gaze == GazeMode::Synthetic) {
    SynthGazeConfig synth = config_.synth;
    if (!config_.synth_seed_explicit) synth.seed = config_.seed;
    synth_.emplace(synth);
  } else if (config_.gaze == GazeMode::Replay) {
    replay_gaze_ = load_gaze_file(config_.gaze_replay);
  }
}

void SimulationSession::record(const TelemetryRecord& rec) { writer_.record(rec); }

void SimulationSession::note(const std::string& kind, const std::string& detail) {
  if (!ended_) record(Note{world_.time, kind, detail});
}

void SimulationSession::ingest(std::uint64_t connection, ClientRole role,
                               const protocol::Envelope& envelope, const json& raw_payload) {
  if (ended_) return;
  const double now = world_.time;

  // Write-ahead: nothing reaches the simulation before it is in the log.
  if (const auto* touch = std::get_if<protocol::TouchEvent>(&envelope.payload)) {
    record(TouchSample{now, std::clamp(touch->x_norm, 0.0, 1.0), std::clamp(touch->y_norm, 0.0, 1.0),
                       touch->target_id, touch->action});
  } else if (const auto* gaze = std::get_if<protocol::GazeSampleMsg>(&envelope.payload)) {
    GazeSample sample = gaze->sample;
    sample.t = now;
    record(sample);
    return;  // gaze goes to telemetry only
  } else {
    record(InboundFrame{now, connection, std::string(protocol::to_string(role)),
                        std::string(protocol::type_name(envelope)), envelope.seq, raw_payload});
  }

  if (std::holds_alternative<protocol::ControlInputMsg>(envelope.payload) ||
      std::holds_alternative<protocol::TouchEvent>(envelope.payload) ||
      std::holds_alternative<protocol::RequestExplanation>(envelope.payload) ||
      std::holds_alternative<protocol::MusicControl>(envelope.payload)) {
    pending_.push_back({envelope.payload});
  }
}

void SimulationSession::issue(const ExplanationEvent& explanation, std::vector<Outbound>& out) {
  const std::string& agent = scenario_.script().policy.agent_name;
  record(ExplanationRecord{world_.time, explanation.event_id, explanation.text, agent,
                           explanation.trigger_source});
  active_explanation_ = protocol::ActiveExplanation{explanation.event_id, agent, explanation.text};
  explanation_until_ = world_.time + config_.explanation_display_s;
  out.push_back({Audience::Everyone,
                 protocol::Explanation{explanation.event_id, explanation.t_issued, explanation.text, agent,
                                       explanation.modality, explanation.trigger_source}});
}

ControlInput SimulationSession::choose_input() {
  if (config_.autopilot) {
    return autopilot(world_, scenario_.script().route, world_.autopilot.target_speed,
                     config_.sim.vehicle);
  }
  if (!config_.input_trace.empty()) {
    const auto& trace = config_.input_trace;
    const std::uint64_t next_tick = world_.tick + 1;
    while (trace_index_ + 1 < trace.size() && trace[trace_index_ + 1].tick <= next_tick) ++trace_index_;
    if (trace[trace_index_].tick <= next_tick) return trace[trace_index_].input;
    return {};
  }
  return latch_.latest_input();
}

std::vector<Outbound> SimulationSession::tick() {
  std::vector<Outbound> out;
  if (ended_) return out;

  // Frames queued since the last tick, in arrival order.
  bool requested = false;
  for (auto& p : pending_) {
    if (const auto* c = std::get_if<protocol::ControlInputMsg>(&p.payload)) {
      latch_.push({c->steering_norm, c->throttle, c->brake, 0.0, c->gear});
    } else if (const auto* t = std::get_if<protocol::TouchEvent>(&p.payload)) {
      if (t->target_id == kExplainButton) requested = true;
    } else if (std::holds_alternative<protocol::RequestExplanation>(p.payload)) {
      requested = true;
    } else if (const auto* m = std::get_if<protocol::MusicControl>(&p.payload)) {
      if (m->track) music_.track = *m->track;
      if (m->playing) music_.playing = *m->playing;
      if (m->volume && std::isfinite(*m->volume)) music_.volume = std::clamp(*m->volume, 0.0, 1.0);
    }
  }
  pending_.clear();

  if (requested) {
    RequestOutcome outcome = scenario_.request(world_.time);
    if (outcome.explanation) {
      issue(*outcome.explanation, out);
    } else {
      record(Note{world_.time, "request_dropped", outcome.dropped_reason});
    }
  }

  ControlInput input;
  try {
    input = choose_input();
  } catch (const RouteExhausted&) {
    auto tail = end("route_complete");
    out.insert(out.end(), tail.begin(), tail.end());
    return out;
  }
  const double previous_steer = world_.ego.steering_angle;
  world_ = step(world_, input, config_.sim.dt, config_.sim);
  last_input_ = clamp_input(input);

  // Gaze up to this tick precedes the tick's own records in the log.
  if (synth_) {
    for (const auto& g : synth_->generate_until(world_.time)) record(g);
  } else if (config_.gaze == GazeMode::Replay) {
    while (replay_index_ < replay_gaze_.size() && replay_gaze_[replay_index_].t <= world_.time) {
      record(replay_gaze_[replay_index_++]);
    }
  }

  for (auto& fired : scenario_.advance(world_)) {
    record(EventMarker{fired.t_event, fired.event.id, fired.event.kind, fired.event.safety_critical,
                       fired.explanation.has_value()});
    out.push_back({Audience::Everyone, protocol::ScenarioEventMsg{fired.event.id, fired.event.kind,
                                                                  fired.t_event,
                                                                  fired.event.safety_critical}});
    if (fired.explanation) issue(*fired.explanation, out);
    if (synth_ && fired.event.safety_critical) synth_->add_stimulus({fired.t_event, std::nullopt});
  }

  record(VehicleSample{world_.time, world_.tick, world_.ego, last_input_});

  const double steering_rate = (world_.ego.steering_angle - previous_steer) / config_.sim.dt;
  out.push_back({Audience::DriverIO,
                 protocol::ForceFeedback{world_.tick, compute_force_feedback(world_.ego, steering_rate)}});

  if (active_explanation_ && world_.time >= explanation_until_) active_explanation_.reset();
  if (config_.ui_every_ticks > 0 && world_.tick % config_.ui_every_ticks == 0) {
    out.push_back({Audience::Displays,
                   protocol::make_ui_state(world_, last_input_, active_explanation_, music_)});
  }

  if (config_.max_duration > 0.0 && world_.time >= config_.max_duration) {
    auto tail = end("duration_reached");
    out.insert(out.end(), tail.begin(), tail.end());
  }
  return out;
}

std::vector<Outbound> SimulationSession::end(const std::string& reason) {
  std::vector<Outbound> out;
  if (ended_) return out;
  record(SessionEnd{world_.time, reason, world_.tick});
  writer_.flush();
  ended_ = true;
  end_reason_ = reason;
  out.push_back({Audience::Everyone, protocol::SessionEndMsg{reason}});
  return out;
}

}  // namespace cabinsim
