#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "cabinsim/error.hpp"

namespace cabinsim {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Vec2&, const Vec2&) = default;
};

enum class Gear : std::uint8_t { Park, Drive, Reverse };

std::string_view to_string(Gear gear);
std::optional<Gear> gear_from_string(std::string_view name);

// Kinematic bicycle parameters. Defaults are the reference vehicle.
struct VehicleParams {
  double wheelbase = 2.8;     // m
  double max_steer = 0.6;     // rad, front-wheel angle limit
  double max_accel = 3.0;     // m/s^2 at full throttle
  double max_brake = 8.0;     // m/s^2 at full brake
  double max_speed = 50.0;    // m/s
  double drag = 0.05;         // 1/s, linear speed drag
};

struct VehicleState {
  double x = 0.0;        // m, east
  double y = 0.0;        // m, north
  double heading = 0.0;  // rad, CCW from +x, in (-pi, pi]
  double speed = 0.0;    // m/s, >= 0
  double steering_angle = 0.0;  // rad, front wheel
  Gear gear = Gear::Drive;
  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

struct ControlInput {
  double steering_norm = 0.0;  // [-1, 1]
  double throttle = 0.0;       // [0, 1]
  double brake = 0.0;          // [0, 1]
  double t_mono = 0.0;         // sender monotonic time, s
  // Applied only at standstill.
  std::optional<Gear> gear_request;
  friend bool operator==(const ControlInput&, const ControlInput&) = default;
};

// Ranges are clamped on ingestion, never rejected. NaN maps to neutral.
ControlInput clamp_input(ControlInput input);

enum class ActorKind : std::uint8_t { Car, Pedestrian };

std::string_view to_string(ActorKind kind);
std::optional<ActorKind> actor_kind_from_string(std::string_view name);

struct Pose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  friend bool operator==(const Pose&, const Pose&) = default;
};

using ActorId = std::uint32_t;

struct TrafficActor {
  ActorId id = 0;
  ActorKind kind = ActorKind::Car;
  std::vector<Vec2> path;
  double speed = 0.0;  // commanded, m/s
  Pose pose;
  bool active = false;
  // Index of the path segment the pose currently lies on.
  std::size_t segment = 0;
  friend bool operator==(const TrafficActor&, const TrafficActor&) = default;
};

// Places the actor at the first waypoint facing along the first segment.
// Paths with fewer than two waypoints produce an inactive actor.
TrafficActor make_actor(ActorId id, ActorKind kind, std::vector<Vec2> path, double speed);

struct DetectedObject {
  ActorId actor_id = 0;
  ActorKind kind = ActorKind::Car;
  std::array<Vec2, 4> contour{};  // oriented bounding rectangle, CCW
  double range = 0.0;             // m, center distance from ego
  friend bool operator==(const DetectedObject&, const DetectedObject&) = default;
};

// Commands the scenario layer can leave for the driving loop.
struct AutopilotCommand {
  double target_speed = 0.0;
  // Full brake until the ego is stationary; cleared by step().
  bool emergency_stop = false;
  friend bool operator==(const AutopilotCommand&, const AutopilotCommand&) = default;
};

struct WorldState {
  std::uint64_t tick = 0;
  double time = 0.0;  // always tick * dt, never accumulated
  VehicleState ego;
  std::vector<TrafficActor> actors;
  std::vector<DetectedObject> detected;
  std::uint64_t seed = 0;
  AutopilotCommand autopilot;
  ActorId next_actor_id = 1;
  friend bool operator==(const WorldState&, const WorldState&) = default;
};

inline constexpr double kDefaultDt = 1.0 / 60.0;
inline constexpr double kDefaultDetectionRange = 50.0;

struct SimConfig {
  VehicleParams vehicle;
  double dt = kDefaultDt;
  double detection_range = kDefaultDetectionRange;
};

// Wraps an angle into (-pi, pi].
double normalize_angle(double angle);

VehicleState ego_step(const VehicleState& state, const ControlInput& input, double dt,
                      const VehicleParams& params = {});

TrafficActor actor_step(const TrafficActor& actor, double dt);

// Footprint (length, width) used for contours.
Vec2 actor_footprint(ActorKind kind);

std::vector<DetectedObject> detect_objects(const WorldState& world, double detection_range);

struct ForceFeedbackParams {
  double centering_gain = 4.0;  // N*m/rad
  double damping_gain = 0.5;    // N*m*s/rad
  double reference_speed = 5.0;  // m/s, full effect at and above
  double max_torque = 3.0;       // N*m
};

// Self-centering wheel torque in N*m; opposes the steering angle and rate.
double compute_force_feedback(const VehicleState& state, double steering_rate,
                              const ForceFeedbackParams& params = {});

class RouteExhausted : public Error {
 public:
  RouteExhausted() : Error("ego passed the final route waypoint") {}
};

struct AutopilotParams {
  double min_lookahead = 5.0;    // m
  double lookahead_gain = 1.5;   // s, lookahead = max(min, gain * v)
  double throttle_gain = 0.5;    // per m/s of speed deficit
  double brake_gain = 0.25;      // per m/s of overspeed
};

struct RouteProjection {
  std::size_t segment = 0;
  double arc_length = 0.0;  // distance along the route to the projected point
  Vec2 point;
  bool past_end = false;
};

// Closest point on the polyline; ties go to the lowest segment index.
RouteProjection project_onto_route(const std::vector<Vec2>& route, Vec2 p);

// Point at the given arc length; extrapolates along the last segment past the end.
Vec2 point_along_route(const std::vector<Vec2>& route, double arc_length);

// Pure-pursuit steering plus proportional speed control. Throws RouteExhausted
// once the ego is beyond the final waypoint.
ControlInput autopilot(const WorldState& world, const std::vector<Vec2>& route,
                       double target_speed, const VehicleParams& vehicle = {},
                       const AutopilotParams& params = {});

// Pure-pursuit front-wheel angle for a lookahead point at bearing error alpha.
double pure_pursuit_angle(double alpha, double lookahead, double wheelbase);

WorldState step(const WorldState& world, const ControlInput& input, double dt,
                const SimConfig& config = {});

}  // namespace cabinsim
