#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace triage::io {

std::ifstream open_input(const std::filesystem::path& path, bool binary = false);
std::ofstream open_output(const std::filesystem::path& path, bool binary = false);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

// Splits on every occurrence of sep; "a\t\tb" yields three fields.
std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

// Strips a trailing '\r' so CRLF files parse like LF files.
inline std::string_view chomp(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  return line;
}

// FNV-1a, 64-bit.
class Fnv1a {
 public:
  void update(std::string_view bytes);
  void update_u64(std::uint64_t v);
  std::uint64_t digest() const { return state_; }

 private:
  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace triage::io
