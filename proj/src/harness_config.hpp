#pragma once

// Internal: JSON conversion of config pieces shared by harness.cpp and report.cpp.

#include "json_util.hpp"
#include "mmfusion/harness.hpp"

namespace mmf::detail {

json config_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const json& j);
std::string hex16(std::uint64_t v);

}  // namespace mmf::detail
