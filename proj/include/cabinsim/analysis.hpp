#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "cabinsim/telemetry.hpp"

namespace cabinsim::analysis {

enum class Eye : std::uint8_t { Left, Right, Mean };

struct PupilSeries {
  std::vector<double> t;                    // s, strictly increasing
  std::vector<std::optional<double>> value;  // mm, nullopt = missing
  Eye source = Eye::Mean;
  friend bool operator==(const PupilSeries&, const PupilSeries&) = default;
};

struct PreprocessParams {
  double max_gap = 0.2;        // s, longer gaps stay missing
  double median_width = 0.15;  // s
  // The median filter is re-applied until the series stops changing.
  int max_median_passes = 64;
};

class EmptyInput : public Error {
 public:
  EmptyInput() : Error("no gaze samples to preprocess") {}
};

class TimeAxisMismatch : public Error {
 public:
  TimeAxisMismatch() : Error("left and right pupil series have different time axes") {}
};

// Raw per-eye series; invalid samples are missing. Samples whose time does
// not advance are skipped.
PupilSeries extract_pupil(const std::vector<GazeSample>& samples, Eye eye);

// Range filter, short-gap interpolation, then a sliding median over each
// valid span. Idempotent.
PupilSeries preprocess_pupil(const PupilSeries& raw, const PreprocessParams& params = {});

struct EyePair {
  PupilSeries left;
  PupilSeries right;
};

EyePair preprocess_pupil(const std::vector<GazeSample>& samples, const PreprocessParams& params = {});

PupilSeries mean_pupil(const PupilSeries& left, const PupilSeries& right);

struct EventWindowStat {
  std::string event_id;
  double t_event = 0.0;
  double baseline_mean = 0.0;
  double window_mean = 0.0;
  double delta = 0.0;
  std::size_t n_baseline = 0;
  std::size_t n_window = 0;
  bool sufficient = false;  // both windows hold at least one sample
};

inline constexpr double kDefaultBaselineS = 2.0;
inline constexpr double kDefaultWindowS = 5.0;

// Baseline over [t0 - baseline_s, t0), window over [t0, t0 + window_s].
std::vector<EventWindowStat> event_window_stats(const PupilSeries& series,
                                                const std::vector<EventMarker>& markers,
                                                double baseline_s = kDefaultBaselineS,
                                                double window_s = kDefaultWindowS);

struct RequestStats {
  std::size_t n_events = 0;     // safety-critical events
  std::size_t n_requested = 0;  // with an explain-button touch in window
  std::size_t n_explained = 0;  // with an explanation record
  double rate = 0.0;
};

bool requested_in_window(const std::vector<TouchSample>& touches, double t_event, double window_s);

RequestStats request_rate(const std::vector<TouchSample>& touches,
                          const std::vector<ExplanationRecord>& explanations,
                          const std::vector<EventMarker>& markers, double window_s);

struct SessionData {
  std::optional<SessionHeader> header;
  std::vector<GazeSample> gaze;
  std::vector<TouchSample> touches;
  std::vector<EventMarker> markers;
  std::vector<ExplanationRecord> explanations;
  std::size_t vehicle_samples = 0;
  std::string replay_warning;  // non-empty when replay stopped at a corrupt line
};

// Throws IoError when the session cannot be read at all.
SessionData load_session(const std::filesystem::path& session);

struct AnalysisOptions {
  double baseline_s = kDefaultBaselineS;
  double window_s = kDefaultWindowS;
  double request_window_s = kDefaultRequestWindow;
  PreprocessParams preprocess;
};

struct ExportSummary {
  std::vector<std::filesystem::path> files;
  std::vector<EventWindowStat> stats;
  RequestStats requests;
};

// Writes pupil_timeseries.csv, events.csv, event_stats.csv and summary.json.
ExportSummary export_timeseries(const SessionData& session, const std::filesystem::path& out_dir,
                                const AnalysisOptions& options = {});

}  // namespace cabinsim::analysis
