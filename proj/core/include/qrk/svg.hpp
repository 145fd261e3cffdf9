#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "qrk/harness.hpp"

namespace qrk::svg {

enum class Axis { Iteration, Runtime };

inline constexpr double kLogFloor = 1e-16;

/// Self-contained SVG line chart of mean error per curve. Values below
/// kLogFloor are clamped on a log axis. Without-replacement curves are
/// dashed. Throws EmptyCurves and IoError.
std::string render(const std::vector<harness::AggregateCurve>& curves, Axis axis, bool log_y,
                   const std::string& title = "");

void emit_svg(const std::vector<harness::AggregateCurve>& curves, Axis axis, bool log_y,
              const std::filesystem::path& path, const std::string& title = "");

}  // namespace qrk::svg
