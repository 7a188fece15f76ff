#pragma once

#include "json_util.hpp"
#include "mmfusion/nn.hpp"

namespace mmf::detail {

json spec_to_json(const nn::ModelSpec& spec);
nn::ModelSpec spec_from_json(const json& j);
json head_to_json(const nn::Head& head);
nn::Head head_from_json(const json& j);

}  // namespace mmf::detail
