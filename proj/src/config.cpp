#include "triage/config.hpp"

#include <charconv>

#include "triage/error.hpp"
#include "triage/io.hpp"

namespace triage::config {

KeyValues parse_key_values(std::string_view text, std::string_view source) {
  KeyValues kv;
  std::size_t lineno = 0;
  for (auto raw : io::split(text, '\n')) {
    ++lineno;
    const auto line = io::trim(raw);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ParseError(std::string(source) + " line " + std::to_string(lineno) + ": expected 'key = value'");
    }
    const auto key = io::trim(line.substr(0, eq));
    if (key.empty()) throw ParseError(std::string(source) + " line " + std::to_string(lineno) + ": empty key");
    kv[std::string(key)] = std::string(io::trim(line.substr(eq + 1)));
  }
  return kv;
}

std::string render_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view key, std::string_view value, const char* what) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (value.empty() || ec != std::errc{} || ptr != value.data() + value.size()) {
    throw ConfigError("config key '" + std::string(key) + "': '" + std::string(value) + "' is not " + what);
  }
  return out;
}

}  // namespace

std::size_t to_size(std::string_view key, std::string_view value) {
  return parse_number<std::size_t>(key, io::trim(value), "a non-negative integer");
}

std::uint64_t to_u64(std::string_view key, std::string_view value) {
  return parse_number<std::uint64_t>(key, io::trim(value), "a non-negative integer");
}

double to_double(std::string_view key, std::string_view value) {
  return parse_number<double>(key, io::trim(value), "a number");
}

bool to_bool(std::string_view key, std::string_view value) {
  const auto v = io::trim(value);
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  throw ConfigError("config key '" + std::string(key) + "': '" + std::string(v) + "' is not a boolean");
}

std::vector<std::size_t> to_size_list(std::string_view key, std::string_view value) {
  std::vector<std::size_t> out;
  for (auto part : io::split(io::trim(value), ',')) out.push_back(to_size(key, part));
  return out;
}

// Shortest text that parses back to the same double.
std::string from_double(double v) {
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string from_size_list(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

}  // namespace triage::config
