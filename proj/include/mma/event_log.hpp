#pragma once

// JSONL session logs: a header line, then one event per line.
//   {"format":"mma-log","version":1}
//   {"seq":0,"ts":1699999999999,"kind":"started","payload":{...}}

#include <cstdio>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "mma/session.hpp"

namespace mma {

inline constexpr std::string_view kLogHeader = R"({"format":"mma-log","version":1})";

std::string event_to_line(const SessionEvent& event);
/// Throws InvalidPayload.
SessionEvent event_from_line(std::string_view line);

std::string format_log(const std::vector<SessionEvent>& events);

/// Parses a whole log. A final line without its terminating newline is a torn
/// write and is dropped when `tolerate_torn_tail` is set.
std::vector<SessionEvent> parse_log(std::string_view text, bool tolerate_torn_tail = true);

std::string read_file(const std::filesystem::path& path);  // throws Io
void write_file(const std::filesystem::path& path, std::string_view data);  // throws Io, fsyncs

std::vector<SessionEvent> read_log_file(const std::filesystem::path& path);

/// Append-only writer; every append is flushed to disk before returning.
class LogWriter {
 public:
  LogWriter() = default;
  /// Creates the file with `header` as its first line if it does not exist yet;
  /// an empty header writes nothing.
  explicit LogWriter(const std::filesystem::path& path, std::string_view header = kLogHeader);
  ~LogWriter();
  LogWriter(LogWriter&& other) noexcept;
  LogWriter& operator=(LogWriter&& other) noexcept;
  LogWriter(const LogWriter&) = delete;
  LogWriter& operator=(const LogWriter&) = delete;

  void append(const SessionEvent& event);
  void append_line(std::string_view line);
  bool is_open() const { return fd_ >= 0; }

 private:
  int fd_ = -1;
  std::filesystem::path path_;
};

}  // namespace mma
