#include "cabinsim/analysis.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace fs = std::filesystem;

namespace cabinsim::analysis {

namespace {

constexpr double kMaxPupil = 10.0;

bool in_range(double v) { return v > 0.0 && v <= kMaxPupil; }

double nominal_interval(const std::vector<double>& t) {
  if (t.size() < 2) return 0.0;
  std::vector<double> diffs;
  diffs.reserve(t.size() - 1);
  for (std::size_t i = 1; i < t.size(); ++i) diffs.push_back(t[i] - t[i - 1]);
  auto mid = diffs.begin() + static_cast<std::ptrdiff_t>(diffs.size() / 2);
  std::nth_element(diffs.begin(), mid, diffs.end());
  return *mid;
}

// One centered-median pass. Windows shrink symmetrically at span edges so
// every window has an odd sample count.
bool median_pass(std::vector<std::optional<double>>& value, std::size_t half) {
  const std::vector<std::optional<double>> src = value;
  bool changed = false;
  std::vector<double> window;
  std::size_t i = 0;
  while (i < src.size()) {
    if (!src[i]) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < src.size() && src[end]) ++end;
    for (std::size_t p = i; p < end; ++p) {
      const std::size_t h = std::min({half, p - i, end - 1 - p});
      window.clear();
      for (std::size_t q = p - h; q <= p + h; ++q) window.push_back(*src[q]);
      auto mid = window.begin() + static_cast<std::ptrdiff_t>(h);
      std::nth_element(window.begin(), mid, window.end());
      if (*mid != *src[p]) {
        value[p] = *mid;
        changed = true;
      }
    }
    i = end;
  }
  return changed;
}

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string opt_num(const std::optional<double>& v) { return v ? num(*v) : std::string(); }

// CSV field quoting for free text.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  return out;
}

}  // namespace

PupilSeries extract_pupil(const std::vector<GazeSample>& samples, Eye eye) {
  PupilSeries series;
  series.source = eye;
  for (const auto& g : samples) {
    if (!series.t.empty() && !(g.t > series.t.back())) continue;
    const bool valid = eye == Eye::Right ? g.valid_r : g.valid_l;
    const double v = eye == Eye::Right ? g.pupil_r : g.pupil_l;
    series.t.push_back(g.t);
    series.value.push_back(valid ? std::optional<double>(v) : std::nullopt);
  }
  return series;
}

PupilSeries preprocess_pupil(const PupilSeries& raw, const PreprocessParams& params) {
  if (raw.t.empty()) throw EmptyInput();
  PupilSeries out = raw;
  auto& v = out.value;

  for (auto& x : v) {
    if (x && !in_range(*x)) x.reset();
  }

  // Linear interpolation across short gaps bounded by valid samples.
  std::optional<std::size_t> prev;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i]) continue;
    if (prev && i > *prev + 1 && out.t[i] - out.t[*prev] <= params.max_gap) {
      const double t0 = out.t[*prev];
      const double span = out.t[i] - t0;
      const double a = *v[*prev];
      const double b = *v[i];
      for (std::size_t k = *prev + 1; k < i; ++k) {
        v[k] = a + (b - a) * (out.t[k] - t0) / span;
      }
    }
    prev = i;
  }

  const double dt = nominal_interval(out.t);
  if (dt > 0.0) {
    const auto half = static_cast<std::size_t>(std::floor(params.median_width / 2.0 / dt + 1e-9));
    if (half > 0) {
      for (int pass = 0; pass < params.max_median_passes; ++pass) {
        if (!median_pass(v, half)) break;
      }
    }
  }
  return out;
}

EyePair preprocess_pupil(const std::vector<GazeSample>& samples, const PreprocessParams& params) {
  if (samples.empty()) throw EmptyInput();
  return {preprocess_pupil(extract_pupil(samples, Eye::Left), params),
          preprocess_pupil(extract_pupil(samples, Eye::Right), params)};
}

PupilSeries mean_pupil(const PupilSeries& left, const PupilSeries& right) {
  if (left.t != right.t) throw TimeAxisMismatch();
  PupilSeries out;
  out.source = Eye::Mean;
  out.t = left.t;
  out.value.resize(left.t.size());
  for (std::size_t i = 0; i < left.t.size(); ++i) {
    const auto& l = left.value[i];
    const auto& r = right.value[i];
    if (l && r) {
      out.value[i] = (*l + *r) / 2.0;
    } else if (l) {
      out.value[i] = l;
    } else {
      out.value[i] = r;
    }
  }
  return out;
}

std::vector<EventWindowStat> event_window_stats(const PupilSeries& series,
                                                const std::vector<EventMarker>& markers,
                                                double baseline_s, double window_s) {
  if (!(baseline_s > 0.0) || !(window_s > 0.0)) {
    throw ValidationError("window", "baseline and window lengths must be > 0");
  }
  std::vector<EventMarker> ordered = markers;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const EventMarker& a, const EventMarker& b) { return a.t < b.t; });

  std::vector<EventWindowStat> out;
  for (const auto& m : ordered) {
    EventWindowStat s;
    s.event_id = m.event_id;
    s.t_event = m.t;
    double base_sum = 0.0;
    double win_sum = 0.0;
    for (std::size_t i = 0; i < series.t.size(); ++i) {
      if (!series.value[i]) continue;
      const double t = series.t[i];
      if (t >= m.t - baseline_s && t < m.t) {
        base_sum += *series.value[i];
        ++s.n_baseline;
      } else if (t >= m.t && t <= m.t + window_s) {
        win_sum += *series.value[i];
        ++s.n_window;
      }
    }
    s.sufficient = s.n_baseline > 0 && s.n_window > 0;
    if (s.n_baseline > 0) s.baseline_mean = base_sum / static_cast<double>(s.n_baseline);
    if (s.n_window > 0) s.window_mean = win_sum / static_cast<double>(s.n_window);
    if (s.sufficient) s.delta = s.window_mean - s.baseline_mean;
    out.push_back(std::move(s));
  }
  return out;
}

bool requested_in_window(const std::vector<TouchSample>& touches, double t_event, double window_s) {
  return std::any_of(touches.begin(), touches.end(), [&](const TouchSample& touch) {
    return touch.target_id == kExplainButton && touch.t >= t_event && touch.t <= t_event + window_s;
  });
}

RequestStats request_rate(const std::vector<TouchSample>& touches,
                          const std::vector<ExplanationRecord>& explanations,
                          const std::vector<EventMarker>& markers, double window_s) {
  if (!(window_s > 0.0)) throw ValidationError("request_window_s", "request window must be > 0");
  RequestStats stats;
  for (const auto& m : markers) {
    if (!m.safety_critical) continue;
    ++stats.n_events;
    if (requested_in_window(touches, m.t, window_s)) ++stats.n_requested;
    const bool explained =
        std::any_of(explanations.begin(), explanations.end(),
                    [&](const ExplanationRecord& e) { return e.event_id == m.event_id; });
    if (explained) ++stats.n_explained;
  }
  if (stats.n_events > 0) {
    stats.rate = static_cast<double>(stats.n_requested) / static_cast<double>(stats.n_events);
  }
  return stats;
}

SessionData load_session(const fs::path& session) {
  ReplayResult result = replay(session);
  if (result.error == ReplayError::IoError || result.error == ReplayError::MissingHeader) {
    throw IoError(result.message);
  }
  SessionData data;
  if (result.error == ReplayError::CorruptRecord) data.replay_warning = result.message;
  for (auto& rec : result.records) {
    std::visit(
        [&data](auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, SessionHeader>) {
            data.header = r;
          } else if constexpr (std::is_same_v<T, GazeSample>) {
            data.gaze.push_back(r);
          } else if constexpr (std::is_same_v<T, TouchSample>) {
            data.touches.push_back(r);
          } else if constexpr (std::is_same_v<T, EventMarker>) {
            data.markers.push_back(r);
          } else if constexpr (std::is_same_v<T, ExplanationRecord>) {
            data.explanations.push_back(r);
          } else if constexpr (std::is_same_v<T, VehicleSample>) {
            ++data.vehicle_samples;
          }
        },
        rec);
  }
  return data;
}

ExportSummary export_timeseries(const SessionData& session, const fs::path& out_dir,
                                const AnalysisOptions& options) {
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create '" + out_dir.string() + "': " + ec.message());

  ExportSummary summary;

  PupilSeries left;
  PupilSeries right;
  PupilSeries mean;
  if (!session.gaze.empty()) {
    EyePair eyes = preprocess_pupil(session.gaze, options.preprocess);
    left = std::move(eyes.left);
    right = std::move(eyes.right);
    mean = mean_pupil(left, right);
  }

  {
    const fs::path path = out_dir / "pupil_timeseries.csv";
    auto out = open_output(path);
    out << "t,left,right,mean\n";
    for (std::size_t i = 0; i < mean.t.size(); ++i) {
      out << num(mean.t[i]) << ',' << opt_num(left.value[i]) << ',' << opt_num(right.value[i])
          << ',' << opt_num(mean.value[i]) << '\n';
    }
    summary.files.push_back(path);
  }

  summary.requests =
      request_rate(session.touches, session.explanations, session.markers, options.request_window_s);

  {
    const fs::path path = out_dir / "events.csv";
    auto out = open_output(path);
    out << "t,event_id,kind,safety_critical,requested,explained\n";
    for (const auto& m : session.markers) {
      const bool requested = requested_in_window(session.touches, m.t, options.request_window_s);
      const bool explained =
          std::any_of(session.explanations.begin(), session.explanations.end(),
                      [&](const ExplanationRecord& e) { return e.event_id == m.event_id; });
      out << num(m.t) << ',' << csv_field(m.event_id) << ',' << to_string(m.kind) << ','
          << (m.safety_critical ? 1 : 0) << ',' << (requested ? 1 : 0) << ','
          << (explained ? 1 : 0) << '\n';
    }
    summary.files.push_back(path);
  }

  summary.stats = event_window_stats(mean, session.markers, options.baseline_s, options.window_s);
  {
    const fs::path path = out_dir / "event_stats.csv";
    auto out = open_output(path);
    out << "event_id,t,baseline_mean,window_mean,delta,n_baseline,n_window,sufficient\n";
    for (const auto& s : summary.stats) {
      out << csv_field(s.event_id) << ',' << num(s.t_event) << ','
          << (s.n_baseline ? num(s.baseline_mean) : "") << ','
          << (s.n_window ? num(s.window_mean) : "") << ',' << (s.sufficient ? num(s.delta) : "")
          << ',' << s.n_baseline << ',' << s.n_window << ',' << (s.sufficient ? 1 : 0) << '\n';
    }
    summary.files.push_back(path);
  }

  {
    nlohmann::ordered_json j;
    j["scenario_id"] = session.header ? session.header->scenario_id : "";
    j["policy"] = session.header ? session.header->policy : "";
    j["agent_name"] = session.header ? session.header->agent_name : "";
    j["gaze_samples"] = session.gaze.size();
    j["vehicle_samples"] = session.vehicle_samples;
    j["events"] = session.markers.size();
    j["options"] = {{"baseline_s", options.baseline_s},
                    {"window_s", options.window_s},
                    {"request_window_s", options.request_window_s},
                    {"max_gap_s", options.preprocess.max_gap},
                    {"median_width_s", options.preprocess.median_width}};
    j["requests"] = {{"n_events", summary.requests.n_events},
                     {"n_requested", summary.requests.n_requested},
                     {"n_explained", summary.requests.n_explained},
                     {"rate", summary.requests.rate}};
    auto deltas = nlohmann::ordered_json::array();
    for (const auto& s : summary.stats) {
      deltas.push_back({{"event_id", s.event_id},
                        {"t", s.t_event},
                        {"delta", s.sufficient ? nlohmann::ordered_json(s.delta) : nullptr}});
    }
    j["event_deltas"] = std::move(deltas);
    if (!session.replay_warning.empty()) j["replay_warning"] = session.replay_warning;

    const fs::path path = out_dir / "summary.json";
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    summary.files.push_back(path);
  }
  return summary;
}

}  // namespace cabinsim::analysis
