#pragma once

#include <atomic>
#include <chrono>
#include <filesystem>
#include <random>
#include <string>

#include "cabinsim/telemetry.hpp"

namespace cabinsim::testing {

// Scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "cabinsim") {
    static std::atomic<int> counter{0};
    const auto stamp = std::chrono::steady_clock::now().time_since_epoch().count();
    path_ = std::filesystem::temp_directory_path() /
            (tag + "_" + std::to_string(stamp) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

// Values that survive a JSON round trip exactly: doubles print with 17
// significant digits, so any finite double qualifies.
class RecordGenerator {
 public:
  explicit RecordGenerator(std::uint64_t seed) : rng_(seed) {}

  // Random record of any non-header kind at time t.
  TelemetryRecord next(double t) {
    switch (pick(7)) {
      case 0: {
        GazeSample g;
        g.t = t;
        g.origin = {u(-1, 1), u(-1, 1), u(-1, 1)};
        const double a = u(-0.3, 0.3), b = u(-0.3, 0.3), n = std::sqrt(a * a + b * b + 1.0);
        g.direction = {a / n, b / n, 1.0 / n};
        g.valid_l = pick(10) != 0;
        g.valid_r = pick(10) != 0;
        g.pupil_l = g.valid_l ? u(2, 6) : 0.0;
        g.pupil_r = g.valid_r ? u(2, 6) : 0.0;
        return g;
      }
      case 1:
        return TouchSample{t, u(0, 1), u(0, 1), pick(2) ? kExplainButton : "music_play",
                           static_cast<TouchAction>(pick(3))};
      case 2: {
        VehicleSample v;
        v.t = t;
        v.tick = static_cast<std::uint64_t>(t * 60.0);
        v.state = {u(-500, 500), u(-500, 500), u(-3.14, 3.14), u(0, 40), u(-0.6, 0.6),
                   static_cast<Gear>(pick(3))};
        v.input = {u(-1, 1), u(0, 1), u(0, 1), u(0, 100), std::nullopt};
        if (pick(4) == 0) v.input.gear_request = static_cast<Gear>(pick(3));
        return v;
      }
      case 3:
        return EventMarker{t, "event_" + std::to_string(pick(100)), static_cast<EventKind>(pick(4)),
                           pick(2) != 0, pick(2) != 0};
      case 4:
        return ExplanationRecord{t, "event_" + std::to_string(pick(100)), "text \"quoted\" é",
                                 "Coda", static_cast<TriggerSource>(pick(2))};
      case 5:
        return InboundFrame{t, pick(10), "driver_io", "control_input", pick(100000),
                            nlohmann::json{{"steering_norm", u(-1, 1)}, {"throttle", u(0, 1)}}};
      default:
        return Note{t, "request_dropped", "no_event_in_window"};
    }
  }

 private:
  double u(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  std::uint64_t pick(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(rng_); }

  std::mt19937_64 rng_;
};

}  // namespace cabinsim::testing
