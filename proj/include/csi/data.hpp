#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace csi::data {

/// Non-empty, non-comment lines of a shipped data file (data/<name>.txt),
/// compiled into the library. Throws std::out_of_range for unknown names.
const std::vector<std::string>& lines(std::string_view name);

}  // namespace csi::data
