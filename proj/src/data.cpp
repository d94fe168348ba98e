#include "csi/data.hpp"

#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

namespace csi::detail {
const std::map<std::string_view, std::string_view>& embedded_files();
}

namespace csi::data {

namespace {

std::vector<std::string> split_lines(std::string_view contents) {
  std::vector<std::string> out;
  std::istringstream in{std::string(contents)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t'))
      line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    out.push_back(std::move(line));
  }
  return out;
}

}  // namespace

const std::vector<std::string>& lines(std::string_view name) {
  static std::mutex mutex;
  static std::map<std::string, std::vector<std::string>, std::less<>> cache;
  std::lock_guard lock(mutex);
  if (auto it = cache.find(name); it != cache.end()) return it->second;
  const auto& files = detail::embedded_files();
  auto file = files.find(name);
  if (file == files.end()) throw std::out_of_range("no shipped data file: " + std::string(name));
  return cache.emplace(std::string(name), split_lines(file->second)).first->second;
}

}  // namespace csi::data
