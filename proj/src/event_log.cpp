#include "csi/event_log.hpp"

#include <sstream>

#include "csi/serialize.hpp"

namespace csi {

std::string to_log_line(const SessionEvent& event) { return json(event).dump(); }

SessionEvent parse_log_line(std::string_view line) {
  try {
    return json::parse(line).get<SessionEvent>();
  } catch (const json::exception& e) {
    throw LogFormatError(std::string("malformed event record: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw LogFormatError(std::string("malformed event record: ") + e.what());
  }
}

std::string format_log(std::span<const SessionEvent> events) {
  std::string out;
  for (const auto& e : events) {
    out += to_log_line(e);
    out += '\n';
  }
  return out;
}

std::vector<SessionEvent> read_log(std::istream& in) {
  std::vector<SessionEvent> events;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    SessionEvent event;
    try {
      event = parse_log_line(line);
    } catch (const LogFormatError& e) {
      throw LogFormatError("line " + std::to_string(line_no) + ": " + e.what());
    }
    if (event.sequence_no != events.size() + 1)
      throw LogFormatError("line " + std::to_string(line_no) + ": expected seq " +
                           std::to_string(events.size() + 1) + ", found " +
                           std::to_string(event.sequence_no));
    events.push_back(std::move(event));
  }
  return events;
}

std::vector<SessionEvent> read_log_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open log " + path.string());
  return read_log(in);
}

void write_log_file(const std::filesystem::path& path, std::span<const SessionEvent> events) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write log " + path.string());
  out << format_log(events);
}

LogWriter::LogWriter(const std::filesystem::path& path)
    : path_(path), out_(path, std::ios::binary | std::ios::app) {
  if (!out_) throw std::runtime_error("cannot open log for append: " + path.string());
}

void LogWriter::append(const SessionEvent& event) {
  out_ << to_log_line(event) << '\n';
  out_.flush();
}

}  // namespace csi
