#pragma once

#include <string>

#include "hmimo/simulate.hpp"

namespace hmimo {

// Parses a flat JSON object, fills unspecified keys with defaults, converts
// dBm quantities to mW and validates. Unknown or malformed keys raise kParse
// naming the key; invariant violations raise kInvalidArgument.
// `full_scale` switches the default metamaterial count from 64 to 512.
SimConfig parse_config(const std::string& json_text, bool full_scale = false);
SimConfig load_config(const std::string& path, bool full_scale = false);

// Every resolved key, including defaults, as pretty-printed JSON.
std::string config_to_json(const SimConfig& config);

// Recognized configuration keys, sorted.
const std::vector<std::string>& config_keys();

}  // namespace hmimo
