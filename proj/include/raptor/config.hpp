#pragma once

#include <string>
#include <vector>

#include "raptor/optimizer.hpp"

namespace raptor {

// Flat key=value configuration mapping onto RegistrationConfig.
// Unknown keys are rejected with a diagnostic listing the valid keys.

const std::vector<std::string>& valid_config_keys();

void apply_config_entry(RegistrationConfig& cfg, const std::string& key, const std::string& value);

// One `key = value` entry per line; '#' starts a comment; blank lines ignored.
void load_config_file(RegistrationConfig& cfg, const std::string& path);

// Serialized echo of every key, in valid_config_keys() order.
std::vector<std::pair<std::string, std::string>> config_entries(const RegistrationConfig& cfg);

} // namespace raptor
