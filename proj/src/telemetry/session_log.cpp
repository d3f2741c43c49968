#include <ctime>
#include <fstream>

#include <zlib.h>

#include "cabinsim/telemetry.hpp"

namespace fs = std::filesystem;

namespace cabinsim {

using nlohmann::json;

class LineSink {
 public:
  virtual ~LineSink() = default;
  virtual bool write(const std::string& line) = 0;
  virtual bool flush() = 0;
  virtual void close() = 0;
};

namespace {

class FileSink final : public LineSink {
 public:
  explicit FileSink(const fs::path& path) : out_(path, std::ios::binary | std::ios::out) {}
  bool good() const { return static_cast<bool>(out_); }
  bool write(const std::string& line) override {
    out_.write(line.data(), static_cast<std::streamsize>(line.size()));
    return static_cast<bool>(out_);
  }
  bool flush() override { return static_cast<bool>(out_.flush()); }
  void close() override { out_.close(); }

 private:
  std::ofstream out_;
};

class GzipSink final : public LineSink {
 public:
  explicit GzipSink(const fs::path& path) : file_(gzopen(path.c_str(), "wb")) {}
  ~GzipSink() override { close(); }
  bool good() const { return file_ != nullptr; }
  bool write(const std::string& line) override {
    return file_ && gzwrite(file_, line.data(), static_cast<unsigned>(line.size())) ==
                        static_cast<int>(line.size());
  }
  bool flush() override { return file_ && gzflush(file_, Z_SYNC_FLUSH) == Z_OK; }
  void close() override {
    if (file_) gzclose(file_);
    file_ = nullptr;
  }

 private:
  gzFile file_;
};

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool has_gzip_suffix(const fs::path& path) { return path.extension() == ".gz"; }

}  // namespace

SessionWriter::SessionWriter(fs::path path, std::unique_ptr<LineSink> sink)
    : path_(std::move(path)), sink_(std::move(sink)), last_flush_(std::chrono::steady_clock::now()) {}

SessionWriter::SessionWriter(SessionWriter&&) noexcept = default;
SessionWriter& SessionWriter::operator=(SessionWriter&&) noexcept = default;

SessionWriter::~SessionWriter() {
  if (sink_) {
    sink_->flush();
    sink_->close();
  }
}

void SessionWriter::write_line(const std::string& line) {
  if (!sink_) throw IoError("session writer is closed");
  if (!sink_->write(line)) throw IoError("failed writing session log '" + path_.string() + "'");
  ++unflushed_;
  const auto now = std::chrono::steady_clock::now();
  if (unflushed_ >= kFlushEvery || now - last_flush_ >= std::chrono::seconds(1)) flush();
}

RecordStatus SessionWriter::record(const TelemetryRecord& rec) {
  const double t = record_time(rec);
  if (written_ > 0 && t < last_t_ - kTimeTolerance) {
    ++rejected_;
    return RecordStatus::RejectedNonMonotonic;
  }
  write_line(to_json(rec).dump() + '\n');
  if (written_ == 0 || t > last_t_) last_t_ = t;
  ++written_;
  return RecordStatus::Accepted;
}

void SessionWriter::flush() {
  if (!sink_) return;
  if (!sink_->flush()) throw IoError("failed flushing session log '" + path_.string() + "'");
  unflushed_ = 0;
  last_flush_ = std::chrono::steady_clock::now();
}

void SessionWriter::close() {
  if (!sink_) return;
  flush();
  sink_->close();
  sink_.reset();
}

fs::path session_file(const fs::path& directory) {
  const fs::path gz = directory / "session.jsonl.gz";
  if (fs::exists(gz)) return gz;
  return directory / "session.jsonl";
}

SessionWriter open_session(const fs::path& directory, const SessionMetadata& meta) {
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) throw IoError("cannot create session directory '" + directory.string() + "': " + ec.message());

  if (fs::exists(directory / "session.jsonl") || fs::exists(directory / "session.jsonl.gz")) {
    throw SessionExists("session already exists in '" + directory.string() + "'");
  }
  const fs::path path = directory / (meta.gzip ? "session.jsonl.gz" : "session.jsonl");

  std::unique_ptr<LineSink> sink;
  if (meta.gzip) {
    auto gz = std::make_unique<GzipSink>(path);
    if (!gz->good()) throw IoError("cannot create '" + path.string() + "'");
    sink = std::move(gz);
  } else {
    auto file = std::make_unique<FileSink>(path);
    if (!file->good()) throw IoError("cannot create '" + path.string() + "'");
    sink = std::move(file);
  }

  SessionWriter writer(path, std::move(sink));
  SessionHeader& h = writer.header_;
  h.seed = meta.seed;
  h.scenario_id = meta.scenario_id;
  h.policy = meta.policy;
  h.agent_name = meta.agent_name;
  h.dt = meta.dt;
  h.start_wall_time = utc_now_iso8601();
  writer.record(h);
  writer.flush();
  return writer;
}

class ReplayStream::Source {
 public:
  virtual ~Source() = default;
  virtual bool ok() const = 0;
  virtual bool getline(std::string& line) = 0;
};

namespace {

class FileSource final : public ReplayStream::Source {
 public:
  explicit FileSource(const fs::path& path) : in_(path, std::ios::binary) {}
  bool ok() const override { return static_cast<bool>(in_); }
  bool getline(std::string& line) override { return static_cast<bool>(std::getline(in_, line)); }

 private:
  std::ifstream in_;
};

class GzipSource final : public ReplayStream::Source {
 public:
  explicit GzipSource(const fs::path& path) : file_(gzopen(path.c_str(), "rb")) {}
  ~GzipSource() override {
    if (file_) gzclose(file_);
  }
  bool ok() const override { return file_ != nullptr; }
  bool getline(std::string& line) override {
    line.clear();
    char buf[4096];
    while (gzgets(file_, buf, sizeof buf) != nullptr) {
      line += buf;
      if (!line.empty() && line.back() == '\n') {
        line.pop_back();
        return true;
      }
    }
    return !line.empty();
  }

 private:
  gzFile file_;
};

}  // namespace

ReplayStream::ReplayStream(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? session_file(path) : path;
  if (has_gzip_suffix(file)) {
    source_ = std::make_unique<GzipSource>(file);
  } else {
    source_ = std::make_unique<FileSource>(file);
  }
  if (!fs::exists(file) || !source_->ok()) {
    error_ = ReplayError::IoError;
    message_ = "cannot open '" + file.string() + "'";
    source_.reset();
  }
}

ReplayStream::ReplayStream(ReplayStream&&) noexcept = default;
ReplayStream::~ReplayStream() = default;

std::optional<TelemetryRecord> ReplayStream::next() {
  if (!source_ || error_ != ReplayError::None) return std::nullopt;
  std::string text;
  if (!source_->getline(text)) {
    if (line_ == 0) {
      error_ = ReplayError::MissingHeader;
      message_ = "empty session file";
    }
    source_.reset();
    return std::nullopt;
  }
  ++line_;
  TelemetryRecord rec;
  try {
    rec = record_from_json(json::parse(text));
  } catch (const std::exception& e) {
    error_ = ReplayError::CorruptRecord;
    message_ = "corrupt record at line " + std::to_string(line_) + ": " + e.what();
    return std::nullopt;
  }
  if (line_ == 1 && !std::holds_alternative<SessionHeader>(rec)) {
    error_ = ReplayError::MissingHeader;
    message_ = "first record is not a session header";
    return std::nullopt;
  }
  return rec;
}

ReplayResult replay(const fs::path& path) {
  ReplayResult result;
  ReplayStream stream(path);
  while (auto rec = stream.next()) result.records.push_back(std::move(*rec));
  result.error = stream.error();
  result.error_line = stream.error() == ReplayError::CorruptRecord ? stream.line() : 0;
  result.message = stream.message();
  return result;
}

}  // namespace cabinsim
