// cabinsim: headless driving-simulator backbone.
//
//   cabinsim run --scenario <file> --log <dir> [--autopilot] [--seed N]
//                [--headless-fast] [--gaze synthetic|replay:<file>|live]
//   cabinsim synth-gaze --config <file> --events <file> --out <file>
//   cabinsim align --pairs <file>
//   cabinsim analyze --session <dir> --out <dir>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

// Eigen must precede httplib.h, which pulls in <resolv.h> and its _res macro.
#include "cabinsim/alignment.hpp"
#include "cabinsim/analysis.hpp"
#include "cabinsim/bridge.hpp"
#include "cabinsim/session.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace cabinsim;

namespace {

json read_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

std::optional<Endpoint> endpoint_option(const std::string& text) {
  if (text == "off" || text == "none") return std::nullopt;
  return parse_endpoint(text);
}

struct RunOptions {
  std::string scenario;
  std::string log_dir;
  bool autopilot = false;
  std::uint64_t seed = 0;
  bool headless_fast = false;
  std::string gaze = "synthetic";
  std::string listen = "127.0.0.1:7654";
  std::string ws_listen = "127.0.0.1:7655";
  std::string input_trace;
  std::string synth_config;
  double duration = 0.0;
  bool gzip = false;
  int serve_ui = 0;
  std::string ui_dir = "ui/dist";
};

int run_simulation(const RunOptions& opt) {
  ScenarioScript script = load_scenario_file(opt.scenario);

  SessionConfig config;
  config.seed = opt.seed;
  config.autopilot = opt.autopilot;
  config.max_duration = opt.duration;
  if (opt.gaze == "synthetic") {
    config.gaze = GazeMode::Synthetic;
  } else if (opt.gaze == "live") {
    config.gaze = GazeMode::Live;
  } else if (opt.gaze == "none") {
    config.gaze = GazeMode::None;
  } else if (opt.gaze.rfind("replay:", 0) == 0) {
    config.gaze = GazeMode::Replay;
    config.gaze_replay = opt.gaze.substr(7);
  } else {
    throw ParseError("--gaze must be synthetic, live, none or replay:<file>");
  }
  if (!opt.synth_config.empty()) {
    const json j = read_json_file(opt.synth_config);
    config.synth = synth_config_from_json(j);
    config.synth_seed_explicit = j.contains("seed");
  }
  if (!opt.input_trace.empty()) config.input_trace = load_input_trace(opt.input_trace);

  SessionMetadata meta;
  meta.seed = opt.seed;
  meta.scenario_id = script.id;
  meta.policy = std::string(to_string(script.policy.variant));
  meta.agent_name = script.policy.agent_name;
  meta.dt = config.sim.dt;
  meta.gzip = opt.gzip;
  SessionWriter writer = open_session(opt.log_dir, meta);
  const fs::path log_path = writer.path();

  SimulationSession session(std::move(script), std::move(config), std::move(writer));

  ServerConfig server_config;
  server_config.tcp = endpoint_option(opt.listen);
  server_config.websocket = endpoint_option(opt.ws_listen);
  server_config.headless_fast = opt.headless_fast;
  server_config.handle_signals = true;
  Server server(session, server_config);

  std::unique_ptr<httplib::Server> ui_server;
  std::thread ui_thread;
  if (opt.serve_ui > 0) {
    ui_server = std::make_unique<httplib::Server>();
    if (!ui_server->set_mount_point("/", opt.ui_dir)) {
      std::cerr << "warning: UI bundle directory '" << opt.ui_dir << "' not found\n";
    }
    ui_thread = std::thread([&] { ui_server->listen("127.0.0.1", opt.serve_ui); });
  }

  if (!opt.headless_fast) {
    auto port = [](std::uint16_t p) { return p ? std::to_string(p) : std::string("off"); };
    std::cerr << "cabinsim: tcp " << port(server.tcp_port()) << ", websocket " << port(server.websocket_port())
              << ", logging to " << log_path << "\n";
  }
  server.run();

  if (ui_server) {
    ui_server->stop();
    ui_thread.join();
  }

  const json summary = {{"session", log_path.string()},
                        {"ticks", session.world().tick},
                        {"time", session.world().time},
                        {"end_reason", session.end_reason()},
                        {"events_fired", session.scenario().fired().size()},
                        {"records", session.writer().written()},
                        {"rejected_records", session.writer().rejected()},
                        {"frames_accepted", server.stats().frames_accepted.load()},
                        {"frames_rejected", server.stats().frames_rejected.load()}};
  std::cout << summary.dump(2) << "\n";
  return 0;
}

std::vector<GazeStimulus> load_stimuli(const std::string& path) {
  std::vector<GazeStimulus> out;
  if (fs::is_directory(path) || path.ends_with(".jsonl") || path.ends_with(".jsonl.gz")) {
    const ReplayResult r = replay(path);
    if (r.error == ReplayError::IoError || r.error == ReplayError::MissingHeader) throw IoError(r.message);
    for (const auto& rec : r.records) {
      if (const auto* m = std::get_if<EventMarker>(&rec); m && m->safety_critical) {
        out.push_back({m->t, std::nullopt});
      }
    }
    return out;
  }
  json j = read_json_file(path);
  if (j.is_object() && j.contains("events")) j = j["events"];
  if (!j.is_array()) throw ParseError("events file must be a list of {\"t\": ...} objects");
  for (const auto& e : j) {
    GazeStimulus s;
    s.t = e.at("t").get<double>();
    if (e.contains("amplitude")) s.amplitude = e["amplitude"].get<double>();
    out.push_back(s);
  }
  return out;
}

int synth_gaze_command(const std::string& config_path, const std::string& events_path,
                       const std::string& out_path, double duration) {
  const SynthGazeConfig config = synth_config_from_json(read_json_file(config_path));
  const std::vector<GazeStimulus> stimuli = load_stimuli(events_path);
  if (duration <= 0.0) {
    double last = 0.0;
    for (const auto& s : stimuli) last = std::max(last, s.t);
    duration = last + config.response_latency + config.response_duration + 10.0;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write '" + out_path + "'");
  std::size_t n = 0;
  for (const auto& g : synth_gaze(config, stimuli, duration)) {
    out << to_json(TelemetryRecord{g}).dump() << '\n';
    ++n;
  }
  std::cout << json{{"samples", n}, {"duration", duration}, {"out", out_path}}.dump() << "\n";
  return 0;
}

int align_command(const std::string& pairs_path) {
  const json j = read_json_file(pairs_path);
  alignment::PointCorrespondences corr;
  auto points = [](const json& arr, const char* name) {
    if (!arr.is_array()) throw ParseError(std::string("'") + name + "' must be a list of [x,y,z]");
    std::vector<alignment::Point3> out;
    for (const auto& p : arr) {
      if (!p.is_array() || p.size() != 3) throw ParseError(std::string("'") + name + "' entries must be [x,y,z]");
      out.emplace_back(p[0].get<double>(), p[1].get<double>(), p[2].get<double>());
    }
    return out;
  };
  corr.model_points = points(j.at("model"), "model");
  corr.tracked_points = points(j.at("tracked"), "tracked");

  const alignment::AlignmentResult result = alignment::estimate_rigid(corr);
  json rotation = json::array();
  for (int r = 0; r < 3; ++r) {
    rotation.push_back({result.transform.rotation(r, 0), result.transform.rotation(r, 1),
                        result.transform.rotation(r, 2)});
  }
  const auto& t = result.transform.translation;
  const bool precise = result.report.rms_residual <= alignment::kPrecisionThreshold;
  const json out = {{"rotation", rotation},
                    {"translation", {t.x(), t.y(), t.z()}},
                    {"report",
                     {{"rms_residual", result.report.rms_residual},
                      {"max_residual", result.report.max_residual},
                      {"n_points", result.report.n_points}}},
                    {"precision_threshold", alignment::kPrecisionThreshold},
                    {"within_precision", precise}};
  std::cout << out.dump(2) << "\n";
  return precise ? 0 : 2;
}

int analyze_command(const std::string& session_dir, const std::string& out_dir,
                    const analysis::AnalysisOptions& options) {
  const analysis::SessionData data = analysis::load_session(session_dir);
  const analysis::ExportSummary summary = analysis::export_timeseries(data, out_dir, options);
  if (!data.replay_warning.empty()) std::cerr << "warning: " << data.replay_warning << "\n";
  json files = json::array();
  for (const auto& f : summary.files) files.push_back(f.string());
  std::cout << json{{"files", files},
                    {"request_rate", summary.requests.rate},
                    {"events", summary.stats.size()}}
                   .dump(2)
            << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Headless driving-simulator backbone"};
  app.require_subcommand(1);

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario session");
  run_cmd->add_option("--scenario", run.scenario, "Scenario JSON file")->required()->check(CLI::ExistingFile);
  run_cmd->add_option("--log", run.log_dir, "Session log directory")->required();
  run_cmd->add_flag("--autopilot", run.autopilot, "Drive the route automatically");
  run_cmd->add_option("--seed", run.seed, "Simulation seed");
  run_cmd->add_flag("--headless-fast", run.headless_fast, "Run ticks as fast as possible");
  run_cmd->add_option("--gaze", run.gaze, "synthetic | replay:<file> | live | none");
  run_cmd->add_option("--listen", run.listen, "TCP endpoint host:port, or off");
  run_cmd->add_option("--ws-listen", run.ws_listen, "WebSocket endpoint host:port, or off");
  run_cmd->add_option("--input-trace", run.input_trace, "Recorded control inputs (JSONL)")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--synth-config", run.synth_config, "Synthetic gaze config JSON")
      ->check(CLI::ExistingFile);
  run_cmd->add_option("--duration", run.duration, "Stop after this many simulated seconds");
  run_cmd->add_flag("--gzip", run.gzip, "Write session.jsonl.gz");
  run_cmd->add_option("--serve-ui", run.serve_ui, "Serve the cockpit UI bundle on this port");
  run_cmd->add_option("--ui-dir", run.ui_dir, "Cockpit UI bundle directory");

  std::string synth_config, synth_events, synth_out;
  double synth_duration = 0.0;
  auto* synth_cmd = app.add_subcommand("synth-gaze", "Generate a synthetic gaze/pupil stream");
  synth_cmd->add_option("--config", synth_config, "Generator config JSON")->required()->check(CLI::ExistingFile);
  synth_cmd->add_option("--events", synth_events, "Event list JSON or session log")->required()->check(CLI::ExistingPath);
  synth_cmd->add_option("--out", synth_out, "Output JSONL")->required();
  synth_cmd->add_option("--duration", synth_duration, "Stream length (s)");

  std::string pairs;
  auto* align_cmd = app.add_subcommand("align", "Rigidly register cabin model points to tracked points");
  align_cmd->add_option("--pairs", pairs, "Correspondence JSON")->required()->check(CLI::ExistingFile);

  std::string session_dir, analyze_out;
  analysis::AnalysisOptions analyze_opts;
  auto* analyze_cmd = app.add_subcommand("analyze", "Pupil and request analysis of a session");
  analyze_cmd->add_option("--session", session_dir, "Session directory or log file")->required()->check(CLI::ExistingPath);
  analyze_cmd->add_option("--out", analyze_out, "Output directory")->required();
  analyze_cmd->add_option("--baseline-s", analyze_opts.baseline_s, "Pre-event baseline (s)")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--window-s", analyze_opts.window_s, "Post-event window (s)")->check(CLI::PositiveNumber);
  analyze_cmd->add_option("--request-window-s", analyze_opts.request_window_s, "Request window (s)")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run_cmd) return run_simulation(run);
    if (*synth_cmd) return synth_gaze_command(synth_config, synth_events, synth_out, synth_duration);
    if (*align_cmd) return align_command(pairs);
    if (*analyze_cmd) return analyze_command(session_dir, analyze_out, analyze_opts);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << " (field: " << e.field() << ")\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
