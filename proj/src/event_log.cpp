#include "mma/event_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mma/error.hpp"

namespace mma {

namespace {

Error io_error(const std::filesystem::path& path, std::string_view what) {
  return Error(ErrorCode::kIo, std::string(what) + " '" + path.string() + "': " + std::strerror(errno));
}

void write_all(int fd, std::string_view data, const std::filesystem::path& path) {
  while (!data.empty()) {
    ssize_t n = ::write(fd, data.data(), data.size());
    if (n < 0) {
      if (errno == EINTR) continue;
      throw io_error(path, "cannot write");
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
}

}  // namespace

std::string event_to_line(const SessionEvent& e) {
  // written by hand to keep the documented key order
  std::string out = "{\"seq\":" + std::to_string(e.seq) + ",\"ts\":" + std::to_string(e.ts) + ",\"kind\":\"";
  out += event_kind_text(e.kind);
  out += "\",\"payload\":" + e.payload.dump() + "}";
  return out;
}

SessionEvent event_from_line(std::string_view line) {
  nlohmann::json j = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw Error(ErrorCode::kInvalidPayload, "log line is not a JSON object");
  SessionEvent e;
  const auto seq = j.find("seq");
  const auto kind = j.find("kind");
  if (seq == j.end() || !seq->is_number_unsigned()) throw Error(ErrorCode::kInvalidPayload, "log line lacks 'seq'");
  if (kind == j.end() || !kind->is_string()) throw Error(ErrorCode::kInvalidPayload, "log line lacks 'kind'");
  auto k = parse_event_kind(kind->get<std::string>());
  if (!k) throw Error(ErrorCode::kInvalidPayload, "unknown event kind '" + kind->get<std::string>() + "'");
  e.seq = seq->get<std::uint64_t>();
  e.kind = *k;
  if (auto ts = j.find("ts"); ts != j.end() && ts->is_number_integer()) e.ts = ts->get<std::int64_t>();
  if (auto p = j.find("payload"); p != j.end()) {
    if (!p->is_object()) throw Error(ErrorCode::kInvalidPayload, "log line 'payload' must be an object");
    e.payload = *p;
  }
  return e;
}

std::string format_log(const std::vector<SessionEvent>& events) {
  std::string out(kLogHeader);
  out += '\n';
  for (const auto& e : events) out += event_to_line(e) + '\n';
  return out;
}

std::vector<SessionEvent> parse_log(std::string_view text, bool tolerate_torn_tail) {
  std::vector<SessionEvent> events;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t nl = text.find('\n', pos);
    bool torn = nl == std::string_view::npos;
    std::string_view line = text.substr(pos, torn ? std::string_view::npos : nl - pos);
    pos = torn ? text.size() : nl + 1;
    ++line_no;
    if (torn && tolerate_torn_tail) break;
    if (line.empty()) continue;
    if (line_no == 1) {
      nlohmann::json h = nlohmann::json::parse(line.begin(), line.end(), nullptr, false);
      if (h.is_discarded() || h.value("format", "") != "mma-log")
        throw Error(ErrorCode::kInvalidPayload, "missing mma-log header line");
      if (h.value("version", 0) != 1)
        throw Error(ErrorCode::kInvalidPayload, "unsupported log version " + h.value("version", nlohmann::json()).dump());
      continue;
    }
    try {
      events.push_back(event_from_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return events;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error(path, "cannot read");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view data) {
  auto tmp = path;
  tmp += ".tmp";
  int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0644);
  if (fd < 0) throw io_error(tmp, "cannot create");
  try {
    write_all(fd, data, tmp);
    if (::fsync(fd) != 0) throw io_error(tmp, "cannot sync");
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error(ErrorCode::kIo, "cannot rename '" + tmp.string() + "': " + ec.message());
}

std::vector<SessionEvent> read_log_file(const std::filesystem::path& path) {
  try {
    return parse_log(read_file(path));
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kIo) throw;
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

LogWriter::LogWriter(const std::filesystem::path& path, std::string_view header) : path_(path) {
  bool fresh = !std::filesystem::exists(path);
  fd_ = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
  if (fd_ < 0) throw io_error(path, "cannot open");
  if (fresh && !header.empty()) append_line(header);
}

LogWriter::~LogWriter() {
  if (fd_ >= 0) ::close(fd_);
}

LogWriter::LogWriter(LogWriter&& other) noexcept : fd_(other.fd_), path_(std::move(other.path_)) { other.fd_ = -1; }

LogWriter& LogWriter::operator=(LogWriter&& other) noexcept {
  if (this != &other) {
    if (fd_ >= 0) ::close(fd_);
    fd_ = other.fd_;
    path_ = std::move(other.path_);
    other.fd_ = -1;
  }
  return *this;
}

void LogWriter::append(const SessionEvent& event) { append_line(event_to_line(event)); }

void LogWriter::append_line(std::string_view line) {
  if (fd_ < 0) throw Error(ErrorCode::kIo, "log writer is not open");
  std::string buf(line);
  buf += '\n';
  write_all(fd_, buf, path_);
  if (::fdatasync(fd_) != 0) throw io_error(path_, "cannot sync");
}

}  // namespace mma
