// Python bindings. Structured values cross the boundary as plain dicts and
// lists; JSON documents are converted through Python's json module.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "cabinsim/alignment.hpp"
#include "cabinsim/analysis.hpp"
#include "cabinsim/session.hpp"

namespace py = pybind11;
using nlohmann::json;
using namespace cabinsim;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& obj) {
  return json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

py::dict vehicle_dict(const VehicleState& s) { return to_py(vehicle_state_json(s)); }

// Missing keys fall back to the rest state.
VehicleState vehicle_from_dict(const py::dict& d) {
  json j = vehicle_state_json(VehicleState{});
  j.update(from_py(d));
  return vehicle_state_from_json(j);
}

py::dict step_vehicle(const py::dict& state, double steering_norm, double throttle, double brake, double dt) {
  ControlInput input{steering_norm, throttle, brake, 0.0, std::nullopt};
  return vehicle_dict(ego_step(vehicle_from_dict(state), clamp_input(input), dt));
}

double force_feedback(double steering_angle, double speed, double steering_rate) {
  VehicleState s;
  s.steering_angle = steering_angle;
  s.speed = speed;
  return compute_force_feedback(s, steering_rate);
}

py::object parse_scenario(const std::string& text) {
  return to_py(json::parse(serialize_scenario(load_scenario(text))));
}

py::dict run_headless(const std::string& scenario_path, const std::string& log_dir, std::uint64_t seed,
                      bool autopilot, const std::string& gaze, double duration, bool gzip) {
  ScenarioScript script = load_scenario_file(scenario_path);
  SessionConfig config;
  config.seed = seed;
  config.autopilot = autopilot;
  config.max_duration = duration;
  if (gaze == "synthetic") {
    config.gaze = GazeMode::Synthetic;
  } else if (gaze != "none") {
    throw ValidationError("gaze", "expected 'synthetic' or 'none'");
  }
  SessionMetadata meta{seed, script.id, std::string(to_string(script.policy.variant)),
                       script.policy.agent_name, config.sim.dt, gzip};
  SessionWriter writer = open_session(log_dir, meta);
  SimulationSession session(std::move(script), std::move(config), std::move(writer));
  {
    py::gil_scoped_release release;
    while (!session.ended()) session.tick();
  }
  py::dict out;
  out["session"] = session.writer().path().string();
  out["ticks"] = session.world().tick;
  out["time"] = session.world().time;
  out["end_reason"] = session.end_reason();
  out["records"] = session.writer().written();
  return out;
}

py::list replay_records(const std::string& path) {
  const ReplayResult r = replay(path);
  if (r.error == ReplayError::IoError || r.error == ReplayError::MissingHeader) throw IoError(r.message);
  py::list out;
  for (const auto& rec : r.records) out.append(to_py(to_json(rec)));
  return out;
}

std::string encode_frame(const py::dict& frame) {
  const protocol::DecodeResult r = protocol::decode(from_py(frame).dump());
  if (!r.ok()) throw ParseError(std::string(protocol::to_string(r.error)) + ": " + r.detail);
  return protocol::encode(*r.envelope);
}

py::object decode_frame(const std::string& line) {
  const protocol::DecodeResult r = protocol::decode(line);
  if (!r.ok()) throw ParseError(std::string(protocol::to_string(r.error)) + ": " + r.detail);
  return to_py(json::parse(protocol::encode(*r.envelope)));
}

py::list synth(const py::dict& config, const std::vector<double>& stimuli, double duration) {
  std::vector<GazeStimulus> events;
  for (double t : stimuli) events.push_back({t, std::nullopt});
  py::list out;
  for (const auto& g : synth_gaze(synth_config_from_json(from_py(config)), events, duration)) {
    out.append(to_py(to_json(TelemetryRecord{g})));
  }
  return out;
}

py::dict align(const std::vector<std::array<double, 3>>& model,
               const std::vector<std::array<double, 3>>& tracked) {
  alignment::PointCorrespondences corr;
  for (const auto& p : model) corr.model_points.emplace_back(p[0], p[1], p[2]);
  for (const auto& p : tracked) corr.tracked_points.emplace_back(p[0], p[1], p[2]);
  const auto result = alignment::estimate_rigid(corr);
  std::vector<std::array<double, 3>> rotation(3);
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rotation[r][c] = result.transform.rotation(r, c);
  }
  const auto& t = result.transform.translation;
  py::dict out;
  out["rotation"] = rotation;
  out["translation"] = std::array<double, 3>{t.x(), t.y(), t.z()};
  out["rms_residual"] = result.report.rms_residual;
  out["max_residual"] = result.report.max_residual;
  out["n_points"] = result.report.n_points;
  return out;
}

py::dict analyze(const std::string& session_dir, const std::string& out_dir, double baseline_s,
                 double window_s, double request_window_s) {
  analysis::AnalysisOptions options;
  options.baseline_s = baseline_s;
  options.window_s = window_s;
  options.request_window_s = request_window_s;
  const auto summary = analysis::export_timeseries(analysis::load_session(session_dir), out_dir, options);
  py::list stats;
  for (const auto& s : summary.stats) {
    py::dict d;
    d["event_id"] = s.event_id;
    d["t_event"] = s.t_event;
    d["baseline_mean"] = s.baseline_mean;
    d["window_mean"] = s.window_mean;
    d["delta"] = s.delta;
    d["sufficient"] = s.sufficient;
    stats.append(d);
  }
  py::list files;
  for (const auto& f : summary.files) files.append(f.string());
  py::dict out;
  out["files"] = files;
  out["events"] = stats;
  out["request_rate"] = summary.requests.rate;
  out["n_events"] = summary.requests.n_events;
  out["n_requested"] = summary.requests.n_requested;
  return out;
}

}  // namespace

PYBIND11_MODULE(_cabinsim, m) {
  m.doc() = "Driving-simulator backbone: dynamics, scenarios, telemetry, alignment and analysis";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<ParseError>(m, "ParseError", PyExc_ValueError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<alignment::AlignmentError>(m, "AlignmentError", PyExc_ValueError);

  m.attr("DT") = kDefaultDt;

  m.def("step_vehicle", &step_vehicle, py::arg("state"), py::arg("steering_norm"), py::arg("throttle"),
        py::arg("brake"), py::arg("dt") = kDefaultDt, "One explicit-Euler step of the ego vehicle.");
  m.def("force_feedback", &force_feedback, py::arg("steering_angle"), py::arg("speed"),
        py::arg("steering_rate") = 0.0, "Self-centering torque in N*m.");
  m.def("parse_scenario", &parse_scenario, py::arg("text"),
        "Validate a scenario document and return its normalized form.");
  m.def("run_headless", &run_headless, py::arg("scenario"), py::arg("log_dir"), py::arg("seed") = 0,
        py::arg("autopilot") = true, py::arg("gaze") = "synthetic", py::arg("duration") = 0.0,
        py::arg("gzip") = false, "Run a scenario without network I/O as fast as possible.");
  m.def("replay", &replay_records, py::arg("path"), "Records of a session log, up to the first corrupt line.");
  m.def("encode_frame", &encode_frame, py::arg("frame"), "Validate a frame dict and encode it as NDJSON.");
  m.def("decode_frame", &decode_frame, py::arg("line"), "Decode one NDJSON frame.");
  m.def("synth_gaze", &synth, py::arg("config"), py::arg("stimuli"), py::arg("duration"),
        "Synthetic gaze records for stimuli at the given times.");
  m.def("align", &align, py::arg("model"), py::arg("tracked"), "Rigid model-to-tracking registration.");
  m.def("analyze", &analyze, py::arg("session"), py::arg("out"), py::arg("baseline_s") = 2.0,
        py::arg("window_s") = 5.0, py::arg("request_window_s") = 10.0,
        "Pupil event statistics and request rate; writes CSV and JSON files to out.");
}
