#pragma once

#include <filesystem>
#include <fstream>
#include <istream>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "csi/model.hpp"

namespace csi {

class LogFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// One JSON object per line, UTF-8, no trailing newline in the returned string.
std::string to_log_line(const SessionEvent& event);
SessionEvent parse_log_line(std::string_view line);

/// Whole log, one record per line, each line newline-terminated.
std::string format_log(std::span<const SessionEvent> events);

/// Parses a log and checks that sequence numbers start at 1 and are gapless.
std::vector<SessionEvent> read_log(std::istream& in);
std::vector<SessionEvent> read_log_file(const std::filesystem::path& path);
void write_log_file(const std::filesystem::path& path, std::span<const SessionEvent> events);

/// Append-only per-session log file; every record is flushed as written.
class LogWriter {
 public:
  explicit LogWriter(const std::filesystem::path& path);
  void append(const SessionEvent& event);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace csi
