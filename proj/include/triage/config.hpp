#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace triage::config {

// Flat "key = value" text; '#' starts a comment line. Later duplicates win.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text, std::string_view source = "config");
// One "key = value" line per entry in key order.
std::string render_key_values(const KeyValues& kv);

// Typed conversions; throw ConfigError naming the key.
std::size_t to_size(std::string_view key, std::string_view value);
std::uint64_t to_u64(std::string_view key, std::string_view value);
double to_double(std::string_view key, std::string_view value);
bool to_bool(std::string_view key, std::string_view value);
std::vector<std::size_t> to_size_list(std::string_view key, std::string_view value);

std::string from_double(double v);
std::string from_size_list(const std::vector<std::size_t>& v);

}  // namespace triage::config
