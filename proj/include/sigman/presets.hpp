#pragma once

#include "sigman/config.hpp"

#include <string>
#include <vector>

namespace sigman {

inline constexpr double kT2NonMarkovianUs = 22.1;
inline constexpr double kT2MarkovianUs = 0.81;
inline constexpr double kFig4DriveMhz = 2.09;
inline constexpr double kFig6DriveMhz = 0.3;

std::vector<std::string> preset_names();
/// Throws ParameterError for an unknown name.
RunConfig preset(const std::string& name);

}  // namespace sigman
