#include "cabinsim/sim.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cabinsim {

namespace {

double clamp_finite(double value, double lo, double hi) {
  if (!std::isfinite(value)) return std::clamp(0.0, lo, hi);
  return std::clamp(value, lo, hi);
}

double distance(Vec2 a, Vec2 b) { return std::hypot(b.x - a.x, b.y - a.y); }

double segment_heading(Vec2 from, Vec2 to) { return std::atan2(to.y - from.y, to.x - from.x); }

}  // namespace

std::string_view to_string(Gear gear) {
  switch (gear) {
    case Gear::Park: return "park";
    case Gear::Drive: return "drive";
    case Gear::Reverse: return "reverse";
  }
  return "drive";
}

std::optional<Gear> gear_from_string(std::string_view name) {
  if (name == "park") return Gear::Park;
  if (name == "drive") return Gear::Drive;
  if (name == "reverse") return Gear::Reverse;
  return std::nullopt;
}

std::string_view to_string(ActorKind kind) {
  return kind == ActorKind::Car ? "car" : "pedestrian";
}

std::optional<ActorKind> actor_kind_from_string(std::string_view name) {
  if (name == "car") return ActorKind::Car;
  if (name == "pedestrian") return ActorKind::Pedestrian;
  return std::nullopt;
}

ControlInput clamp_input(ControlInput input) {
  input.steering_norm = clamp_finite(input.steering_norm, -1.0, 1.0);
  input.throttle = clamp_finite(input.throttle, 0.0, 1.0);
  input.brake = clamp_finite(input.brake, 0.0, 1.0);
  if (!std::isfinite(input.t_mono)) input.t_mono = 0.0;
  return input;
}

double normalize_angle(double angle) {
  double wrapped = std::remainder(angle, 2.0 * std::numbers::pi);
  if (wrapped <= -std::numbers::pi) wrapped += 2.0 * std::numbers::pi;
  return wrapped;
}

TrafficActor make_actor(ActorId id, ActorKind kind, std::vector<Vec2> path, double speed) {
  TrafficActor actor;
  actor.id = id;
  actor.kind = kind;
  actor.speed = speed;
  actor.path = std::move(path);
  if (!actor.path.empty()) {
    actor.pose.x = actor.path.front().x;
    actor.pose.y = actor.path.front().y;
  }
  actor.active = actor.path.size() >= 2;
  if (actor.active) actor.pose.heading = segment_heading(actor.path[0], actor.path[1]);
  return actor;
}

VehicleState ego_step(const VehicleState& state, const ControlInput& input, double dt,
                      const VehicleParams& params) {
  VehicleState next = state;
  if (input.gear_request && state.speed == 0.0) next.gear = *input.gear_request;

  const double delta = input.steering_norm * params.max_steer;
  next.steering_angle = delta;

  if (next.gear == Gear::Park) {
    next.speed = 0.0;
    return next;
  }

  const double direction = next.gear == Gear::Reverse ? -1.0 : 1.0;
  const double v = state.speed;
  next.x = state.x + direction * v * std::cos(state.heading) * dt;
  next.y = state.y + direction * v * std::sin(state.heading) * dt;
  next.heading =
      normalize_angle(state.heading + direction * (v / params.wheelbase) * std::tan(delta) * dt);

  const double accel =
      input.throttle * params.max_accel - input.brake * params.max_brake - params.drag * v;
  next.speed = std::clamp(v + accel * dt, 0.0, params.max_speed);
  return next;
}

TrafficActor actor_step(const TrafficActor& actor, double dt) {
  TrafficActor next = actor;
  if (!next.active || next.path.size() < 2) {
    next.active = false;
    return next;
  }

  double remaining = next.speed * dt;
  Vec2 position{next.pose.x, next.pose.y};
  const std::size_t last = next.path.size() - 1;

  while (next.segment < last) {
    const Vec2 target = next.path[next.segment + 1];
    const double to_target = distance(position, target);
    next.pose.heading = segment_heading(next.path[next.segment], target);
    if (remaining < to_target) {
      const double f = remaining / to_target;
      position.x += (target.x - position.x) * f;
      position.y += (target.y - position.y) * f;
      remaining = 0.0;
      break;
    }
    remaining -= to_target;
    position = target;
    ++next.segment;
  }

  next.pose.x = position.x;
  next.pose.y = position.y;
  if (next.segment >= last) {
    next.segment = last - 1;
    next.active = false;
  }
  return next;
}

Vec2 actor_footprint(ActorKind kind) {
  return kind == ActorKind::Car ? Vec2{4.5, 1.8} : Vec2{0.6, 0.6};
}

std::vector<DetectedObject> detect_objects(const WorldState& world, double detection_range) {
  std::vector<DetectedObject> out;
  const Vec2 ego{world.ego.x, world.ego.y};
  for (const auto& actor : world.actors) {
    if (!actor.active) continue;
    const double range = distance(ego, {actor.pose.x, actor.pose.y});
    if (range > detection_range) continue;

    const Vec2 size = actor_footprint(actor.kind);
    const double hl = size.x / 2.0;
    const double hw = size.y / 2.0;
    const double c = std::cos(actor.pose.heading);
    const double s = std::sin(actor.pose.heading);
    const std::array<Vec2, 4> local{{{hl, hw}, {-hl, hw}, {-hl, -hw}, {hl, -hw}}};

    DetectedObject obj;
    obj.actor_id = actor.id;
    obj.kind = actor.kind;
    obj.range = range;
    for (std::size_t i = 0; i < local.size(); ++i) {
      obj.contour[i] = {actor.pose.x + c * local[i].x - s * local[i].y,
                        actor.pose.y + s * local[i].x + c * local[i].y};
    }
    out.push_back(obj);
  }
  std::sort(out.begin(), out.end(), [](const DetectedObject& a, const DetectedObject& b) {
    if (a.range != b.range) return a.range < b.range;
    return a.actor_id < b.actor_id;
  });
  return out;
}

double compute_force_feedback(const VehicleState& state, double steering_rate,
                              const ForceFeedbackParams& params) {
  const double speed_factor = std::min(state.speed / params.reference_speed, 1.0);
  const double torque =
      -(params.centering_gain * state.steering_angle + params.damping_gain * steering_rate) *
      speed_factor;
  return std::clamp(torque, -params.max_torque, params.max_torque);
}

RouteProjection project_onto_route(const std::vector<Vec2>& route, Vec2 p) {
  RouteProjection best;
  double best_dist = std::numeric_limits<double>::infinity();
  double arc_start = 0.0;
  const std::size_t last_segment = route.size() - 2;

  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    const Vec2 a = route[i];
    const Vec2 b = route[i + 1];
    const double dx = b.x - a.x;
    const double dy = b.y - a.y;
    const double len2 = dx * dx + dy * dy;
    const double len = std::sqrt(len2);
    double u = len2 > 0.0 ? ((p.x - a.x) * dx + (p.y - a.y) * dy) / len2 : 0.0;
    const bool beyond = i == last_segment && u > 1.0;
    u = std::clamp(u, 0.0, 1.0);
    const Vec2 q{a.x + u * dx, a.y + u * dy};
    const double d = distance(p, q);
    if (d < best_dist) {
      best_dist = d;
      best.segment = i;
      best.arc_length = arc_start + u * len;
      best.point = q;
      best.past_end = beyond;
    }
    arc_start += len;
  }
  return best;
}

Vec2 point_along_route(const std::vector<Vec2>& route, double arc_length) {
  double remaining = std::max(arc_length, 0.0);
  for (std::size_t i = 0; i + 1 < route.size(); ++i) {
    const double len = distance(route[i], route[i + 1]);
    const bool last = i + 2 == route.size();
    if (remaining <= len || last) {
      if (len == 0.0) return route[i + 1];
      const double f = remaining / len;
      return {route[i].x + (route[i + 1].x - route[i].x) * f,
              route[i].y + (route[i + 1].y - route[i].y) * f};
    }
    remaining -= len;
  }
  return route.back();
}

double pure_pursuit_angle(double alpha, double lookahead, double wheelbase) {
  return std::atan(2.0 * wheelbase * std::sin(alpha) / lookahead);
}

ControlInput autopilot(const WorldState& world, const std::vector<Vec2>& route,
                       double target_speed, const VehicleParams& vehicle,
                       const AutopilotParams& params) {
  const VehicleState& ego = world.ego;
  const RouteProjection proj = project_onto_route(route, {ego.x, ego.y});
  if (proj.past_end) throw RouteExhausted();

  const double lookahead = std::max(params.min_lookahead, params.lookahead_gain * ego.speed);
  const Vec2 target = point_along_route(route, proj.arc_length + lookahead);
  const double alpha =
      normalize_angle(std::atan2(target.y - ego.y, target.x - ego.x) - ego.heading);
  const double delta = pure_pursuit_angle(alpha, lookahead, vehicle.wheelbase);

  ControlInput cmd;
  cmd.steering_norm = std::clamp(delta / vehicle.max_steer, -1.0, 1.0);

  if (world.autopilot.emergency_stop) {
    cmd.brake = 1.0;
    return cmd;
  }
  const double error = target_speed - ego.speed;
  if (error > 0.0) {
    const double feedforward = vehicle.drag * target_speed / vehicle.max_accel;
    cmd.throttle = std::clamp(feedforward + params.throttle_gain * error, 0.0, 1.0);
  } else if (error < 0.0) {
    cmd.brake = std::clamp(-params.brake_gain * error, 0.0, 1.0);
  }
  return cmd;
}

WorldState step(const WorldState& world, const ControlInput& input, double dt,
                const SimConfig& config) {
  WorldState next = world;
  next.tick = world.tick + 1;
  next.time = static_cast<double>(next.tick) * dt;

  ControlInput effective = clamp_input(input);
  if (world.autopilot.emergency_stop) {
    effective.throttle = 0.0;
    effective.brake = 1.0;
  }
  next.ego = ego_step(world.ego, effective, dt, config.vehicle);
  if (next.autopilot.emergency_stop && next.ego.speed == 0.0) next.autopilot.emergency_stop = false;

  for (auto& actor : next.actors) {
    if (actor.active) actor = actor_step(actor, dt);
  }
  next.detected = detect_objects(next, config.detection_range);
  return next;
}

}  // namespace cabinsim
