#include <cmath>
#include <numbers>

#include "cabinsim/telemetry.hpp"

namespace cabinsim {

using nlohmann::json;

namespace {

// Fixation jitter of the synthetic gaze ray, rad.
constexpr double kDirectionJitter = 0.02;
constexpr double kMaxPupil = 10.0;

}  // namespace

SynthGazeConfig synth_config_from_json(const json& j) {
  SynthGazeConfig c;
  try {
    c.baseline = j.value("baseline", c.baseline);
    c.noise_sigma = j.value("noise_sigma", c.noise_sigma);
    c.response_amplitude = j.value("response_amplitude", c.response_amplitude);
    c.response_latency = j.value("response_latency", c.response_latency);
    c.response_duration = j.value("response_duration", c.response_duration);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    c.seed = j.value("seed", c.seed);
    c.blink_probability = j.value("blink_probability", c.blink_probability);
  } catch (const json::exception& e) {
    throw ParseError(std::string("synthetic gaze config: ") + e.what());
  }
  if (!(c.sample_rate > 0.0)) throw ValidationError("sample_rate", "sample_rate must be > 0");
  if (!(c.response_duration > 0.0)) {
    throw ValidationError("response_duration", "response_duration must be > 0");
  }
  if (!(c.noise_sigma >= 0.0)) throw ValidationError("noise_sigma", "noise_sigma must be >= 0");
  if (!(c.blink_probability >= 0.0 && c.blink_probability <= 1.0)) {
    throw ValidationError("blink_probability", "blink_probability must be in [0, 1]");
  }
  return c;
}

json synth_config_json(const SynthGazeConfig& c) {
  return {{"baseline", c.baseline},
          {"noise_sigma", c.noise_sigma},
          {"response_amplitude", c.response_amplitude},
          {"response_latency", c.response_latency},
          {"response_duration", c.response_duration},
          {"sample_rate", c.sample_rate},
          {"seed", c.seed},
          {"blink_probability", c.blink_probability}};
}

double pupil_response(double s, double duration) {
  if (s < 0.0 || s > duration) return 0.0;
  return 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * s / duration));
}

SynthGazeGenerator::SynthGazeGenerator(SynthGazeConfig config)
    : config_(config), rng_(config.seed) {
  if (!(config_.sample_rate > 0.0)) throw ValidationError("sample_rate", "sample_rate must be > 0");
  if (!(config_.response_duration > 0.0)) {
    throw ValidationError("response_duration", "response_duration must be > 0");
  }
}

void SynthGazeGenerator::add_stimulus(GazeStimulus stimulus) { stimuli_.push_back(stimulus); }

double SynthGazeGenerator::next_sample_time() const {
  return static_cast<double>(index_) / config_.sample_rate;
}

GazeSample SynthGazeGenerator::next_sample() {
  GazeSample g;
  g.t = next_sample_time();
  ++index_;

  double pupil = config_.baseline;
  for (const auto& s : stimuli_) {
    const double amplitude = s.amplitude.value_or(config_.response_amplitude);
    pupil += amplitude * pupil_response(g.t - s.t - config_.response_latency,
                                        config_.response_duration);
  }

  // Fixed draw order keeps the stream reproducible for any config.
  std::normal_distribution<double> unit(0.0, 1.0);
  std::bernoulli_distribution blink(config_.blink_probability);
  const bool blinking = blink(rng_);
  const double noise_l = unit(rng_) * config_.noise_sigma;
  const double noise_r = unit(rng_) * config_.noise_sigma;
  const double yaw = unit(rng_) * kDirectionJitter;
  const double pitch = unit(rng_) * kDirectionJitter;

  const double norm = std::sqrt(yaw * yaw + pitch * pitch + 1.0);
  g.direction = {yaw / norm, pitch / norm, 1.0 / norm};

  if (blinking) return g;  // both eyes invalid, pupils 0

  g.pupil_l = pupil + noise_l;
  g.pupil_r = pupil + noise_r;
  g.valid_l = g.pupil_l > 0.0 && g.pupil_l <= kMaxPupil;
  g.valid_r = g.pupil_r > 0.0 && g.pupil_r <= kMaxPupil;
  if (!g.valid_l) g.pupil_l = 0.0;
  if (!g.valid_r) g.pupil_r = 0.0;
  return g;
}

std::vector<GazeSample> SynthGazeGenerator::generate_until(double until) {
  std::vector<GazeSample> out;
  while (next_sample_time() <= until) out.push_back(next_sample());
  return out;
}

std::vector<GazeSample> synth_gaze(const SynthGazeConfig& config,
                                   const std::vector<GazeStimulus>& events, double duration) {
  if (!(duration > 0.0)) throw ValidationError("duration", "duration must be > 0");
  SynthGazeGenerator gen(config);
  for (const auto& e : events) gen.add_stimulus(e);
  std::vector<GazeSample> out;
  while (gen.next_sample_time() < duration) out.push_back(gen.next_sample());
  return out;
}

std::vector<GazeSample> synth_gaze(const SynthGazeConfig& config,
                                   const std::vector<EventMarker>& events, double duration) {
  std::vector<GazeStimulus> stimuli;
  for (const auto& m : events) stimuli.push_back({m.t, std::nullopt});
  return synth_gaze(config, stimuli, duration);
}

}  // namespace cabinsim
