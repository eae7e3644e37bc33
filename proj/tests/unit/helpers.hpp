#pragma once

#include <filesystem>
#include <random>
#include <sstream>
#include <string>

#include "triage/kg.hpp"

namespace testing {

// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("triage-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline triage::kg::KnowledgeGraph graph_from(const std::string& concepts, const std::string& edges) {
  std::istringstream c(concepts), e(edges);
  return triage::kg::parse_graph(c, e);
}

// Star: center "c" of type hub, leaves l0..l{n-1} of type leaf.
inline triage::kg::KnowledgeGraph star(int leaves) {
  std::string c = "c\tcenter\thub\n", e;
  for (int i = 0; i < leaves; ++i) {
    c += "l" + std::to_string(i) + "\tleaf\tleaf\n";
    e += "c\tl" + std::to_string(i) + "\n";
  }
  return graph_from(c, e);
}

inline triage::kg::KnowledgeGraph triangle() {
  return graph_from("A\ta\tt1\nB\tb\tt1\nC\tc\tt2\n", "A\tB\nB\tC\nA\tC\n");
}

// Two disjoint cliques of `size` nodes each, one semantic type.
inline triage::kg::KnowledgeGraph two_cliques(int size) {
  std::string c, e;
  for (int q = 0; q < 2; ++q) {
    for (int i = 0; i < size; ++i) {
      c += "q" + std::to_string(q) + "n" + std::to_string(i) + "\tx\tt\n";
      for (int j = i + 1; j < size; ++j) {
        e += "q" + std::to_string(q) + "n" + std::to_string(i) + "\tq" + std::to_string(q) + "n" +
             std::to_string(j) + "\n";
      }
    }
  }
  return graph_from(c, e);
}

}  // namespace testing
