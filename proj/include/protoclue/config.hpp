#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "protoclue/engine.hpp"

namespace protoclue {

/// Sets one manifest field from its textual form. Keys match the long CLI
/// flag names with '-' replaced by '_' (k, bank_capacity, mu1, lr, ...).
/// Throws ConfigError for unknown keys or malformed values.
void apply_setting(RunManifest& manifest, const std::string& key, const std::string& value);

/// Reads "key = value" lines; '#' starts a comment, blank lines are ignored.
void apply_config_file(RunManifest& manifest, const std::filesystem::path& path);

/// Every key apply_setting understands.
const std::vector<std::string>& config_keys();

/// Comma-separated numbers, e.g. "1,2,3".
std::vector<double> parse_value_list(const std::string& text);

}  // namespace protoclue
