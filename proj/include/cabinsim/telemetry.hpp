#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cabinsim/scenario.hpp"
#include "cabinsim/sim.hpp"

namespace cabinsim {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kModuleVersion = "0.3.0";

struct SessionHeader {
  double t = 0.0;
  int schema_version = kSchemaVersion;
  std::uint64_t seed = 0;
  std::string scenario_id;
  std::string policy;      // policy variant name
  std::string agent_name;
  double dt = kDefaultDt;
  std::string start_wall_time;  // ISO-8601 UTC
  std::string module_version = kModuleVersion;
  friend bool operator==(const SessionHeader&, const SessionHeader&) = default;
};

using Vec3 = std::array<double, 3>;

struct GazeSample {
  double t = 0.0;
  Vec3 origin{0.0, 0.0, 0.0};     // m, head frame
  Vec3 direction{0.0, 0.0, 1.0};  // unit
  double pupil_l = 0.0;           // mm
  double pupil_r = 0.0;           // mm
  bool valid_l = false;
  bool valid_r = false;
  friend bool operator==(const GazeSample&, const GazeSample&) = default;
};

enum class TouchAction : std::uint8_t { Down, Up, Tap };

std::string_view to_string(TouchAction action);
std::optional<TouchAction> touch_action_from_string(std::string_view name);

inline constexpr const char* kExplainButton = "explain_button";

struct TouchSample {
  double t = 0.0;
  double x_norm = 0.0;
  double y_norm = 0.0;
  std::string target_id;
  TouchAction action = TouchAction::Tap;
  friend bool operator==(const TouchSample&, const TouchSample&) = default;
};

struct VehicleSample {
  double t = 0.0;
  std::uint64_t tick = 0;
  VehicleState state;
  ControlInput input;
  friend bool operator==(const VehicleSample&, const VehicleSample&) = default;
};

struct EventMarker {
  double t = 0.0;
  std::string event_id;
  EventKind kind = EventKind::Custom;
  bool safety_critical = false;
  bool explanation_issued = false;
  friend bool operator==(const EventMarker&, const EventMarker&) = default;
};

struct ExplanationRecord {
  double t = 0.0;
  std::string event_id;
  std::string text;
  std::string agent_name;
  TriggerSource trigger_source = TriggerSource::Proactive;
  friend bool operator==(const ExplanationRecord&, const ExplanationRecord&) = default;
};

// An accepted inbound protocol frame, logged before it can affect the sim.
struct InboundFrame {
  double t = 0.0;
  std::uint64_t connection = 0;
  std::string role;
  std::string type;
  std::uint64_t seq = 0;
  nlohmann::json payload = nlohmann::json::object();
  friend bool operator==(const InboundFrame&, const InboundFrame&) = default;
};

// Free-form session annotation (dropped requests, rejected frames, ...).
struct Note {
  double t = 0.0;
  std::string kind;
  std::string detail;
  friend bool operator==(const Note&, const Note&) = default;
};

struct SessionEnd {
  double t = 0.0;
  std::string reason;
  std::uint64_t ticks = 0;
  friend bool operator==(const SessionEnd&, const SessionEnd&) = default;
};

using TelemetryRecord = std::variant<SessionHeader, GazeSample, TouchSample, VehicleSample,
                                     EventMarker, ExplanationRecord, InboundFrame, Note, SessionEnd>;

double record_time(const TelemetryRecord& rec);
std::string_view record_type(const TelemetryRecord& rec);

nlohmann::json to_json(const TelemetryRecord& rec);
// Throws ParseError on anything that is not a well-formed record.
TelemetryRecord record_from_json(const nlohmann::json& j);

// Shared by the wire protocol and the session log.
nlohmann::json gaze_fields(const GazeSample& g);
GazeSample gaze_from_fields(const nlohmann::json& j);
nlohmann::json vehicle_state_json(const VehicleState& s);
VehicleState vehicle_state_from_json(const nlohmann::json& j);

class SessionExists : public IoError {
 public:
  using IoError::IoError;
};

struct SessionMetadata {
  std::uint64_t seed = 0;
  std::string scenario_id;
  std::string policy;
  std::string agent_name;
  double dt = kDefaultDt;
  bool gzip = false;  // writes session.jsonl.gz
};

enum class RecordStatus : std::uint8_t { Accepted, RejectedNonMonotonic };

class LineSink;

// Append-only JSON Lines session log. Single owner; movable, not copyable.
class SessionWriter {
 public:
  SessionWriter(SessionWriter&&) noexcept;
  SessionWriter& operator=(SessionWriter&&) noexcept;
  ~SessionWriter();

  // Times more than this far behind the last accepted record are rejected.
  static constexpr double kTimeTolerance = 1e-6;
  static constexpr std::size_t kFlushEvery = 100;

  RecordStatus record(const TelemetryRecord& rec);
  void flush();
  // Flushes and closes; further records throw IoError.
  void close();

  const std::filesystem::path& path() const { return path_; }
  const SessionHeader& header() const { return header_; }
  std::uint64_t written() const { return written_; }
  std::uint64_t rejected() const { return rejected_; }
  double last_time() const { return last_t_; }

 private:
  friend SessionWriter open_session(const std::filesystem::path&, const SessionMetadata&);
  SessionWriter(std::filesystem::path path, std::unique_ptr<LineSink> sink);

  void write_line(const std::string& line);

  std::filesystem::path path_;
  std::unique_ptr<LineSink> sink_;
  SessionHeader header_;
  double last_t_ = 0.0;
  std::uint64_t written_ = 0;
  std::uint64_t rejected_ = 0;
  std::size_t unflushed_ = 0;
  std::chrono::steady_clock::time_point last_flush_;
};

// Creates <directory>/session.jsonl (or .jsonl.gz) with its header line.
// Throws SessionExists if a session file is already there, IoError otherwise.
SessionWriter open_session(const std::filesystem::path& directory, const SessionMetadata& meta);

// Session file inside a directory, whichever suffix exists.
std::filesystem::path session_file(const std::filesystem::path& directory);

enum class ReplayError : std::uint8_t { None, MissingHeader, CorruptRecord, IoError };

struct ReplayResult {
  std::vector<TelemetryRecord> records;
  ReplayError error = ReplayError::None;
  std::size_t error_line = 0;  // 1-based
  std::string message;
  bool ok() const { return error == ReplayError::None; }
};

// Reads records in file order, stopping at the first corrupt line. Records
// before it are kept. Accepts a session file or a directory holding one.
ReplayResult replay(const std::filesystem::path& path);

// Record-by-record reader for large sessions.
class ReplayStream {
 public:
  explicit ReplayStream(const std::filesystem::path& path);
  ReplayStream(ReplayStream&&) noexcept;
  ~ReplayStream();

  // Next record, or nullopt at end of file or on error (see error()).
  std::optional<TelemetryRecord> next();
  ReplayError error() const { return error_; }
  std::size_t line() const { return line_; }
  const std::string& message() const { return message_; }

  class Source;

 private:
  std::unique_ptr<Source> source_;
  std::size_t line_ = 0;
  ReplayError error_ = ReplayError::None;
  std::string message_;
};

// Synthetic pupil/gaze stream. Pupil diameter is a baseline plus a
// raised-cosine bump per stimulus plus seeded Gaussian noise.
struct SynthGazeConfig {
  double baseline = 3.0;            // mm
  double noise_sigma = 0.05;        // mm
  double response_amplitude = 0.4;  // mm
  double response_latency = 0.3;    // s
  double response_duration = 6.0;   // s
  double sample_rate = 100.0;       // Hz
  std::uint64_t seed = 0;
  double blink_probability = 0.02;
};

SynthGazeConfig synth_config_from_json(const nlohmann::json& j);
nlohmann::json synth_config_json(const SynthGazeConfig& c);

struct GazeStimulus {
  double t = 0.0;
  std::optional<double> amplitude;  // overrides config.response_amplitude
};

// Raised-cosine bump on [0, duration], peak 1 at duration / 2.
double pupil_response(double s, double duration);

// Incremental generator: stimuli may be added while sampling, as long as each
// stimulus is added before any sample at or after its onset is produced.
class SynthGazeGenerator {
 public:
  explicit SynthGazeGenerator(SynthGazeConfig config);

  void add_stimulus(GazeStimulus stimulus);
  // All samples with t <= until that have not been produced yet.
  std::vector<GazeSample> generate_until(double until);
  GazeSample next_sample();
  double next_sample_time() const;

 private:
  SynthGazeConfig config_;
  std::vector<GazeStimulus> stimuli_;
  std::mt19937_64 rng_;
  std::uint64_t index_ = 0;
};

std::vector<GazeSample> synth_gaze(const SynthGazeConfig& config,
                                   const std::vector<GazeStimulus>& events, double duration);
std::vector<GazeSample> synth_gaze(const SynthGazeConfig& config,
                                   const std::vector<EventMarker>& events, double duration);

}  // namespace cabinsim
