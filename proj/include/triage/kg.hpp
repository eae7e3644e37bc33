#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "triage/rng.hpp"

namespace triage::kg {

using ConceptIndex = std::uint32_t;
using TypeIndex = std::uint32_t;

struct SemanticType {
  TypeIndex id = 0;
  std::string name;
};

struct Concept {
  std::string id;
  std::string name;
  TypeIndex type = 0;
};

// Immutable typed concept graph. Edges are undirected, deduplicated and
// free of self-loops; adjacency lists are sorted by concept index.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;

  std::size_t concept_count() const { return concepts_.size(); }
  std::size_t edge_count() const { return edge_count_; }
  std::size_t type_count() const { return types_.size(); }

  const Concept& concept_at(ConceptIndex v) const;
  const SemanticType& type_at(TypeIndex t) const { return types_.at(t); }
  std::span<const SemanticType> types() const { return types_; }

  std::span<const ConceptIndex> neighbors(ConceptIndex v) const;
  std::size_t degree(ConceptIndex v) const { return neighbors(v).size(); }
  bool has_edge(ConceptIndex a, ConceptIndex b) const;

  std::optional<ConceptIndex> find(std::string_view concept_id) const;
  // Throws LookupError for unknown ids.
  ConceptIndex index_of(std::string_view concept_id) const;

 private:
  friend class GraphBuilder;

  std::vector<Concept> concepts_;
  std::vector<SemanticType> types_;
  std::vector<std::vector<ConceptIndex>> adjacency_;
  std::unordered_map<std::string, ConceptIndex> by_id_;
  std::size_t edge_count_ = 0;
};

// Accumulates concepts and edges, then validates everything in build().
// Semantic types are numbered in order of first appearance.
class GraphBuilder {
 public:
  ConceptIndex add_concept(std::string id, std::string name, const std::string& type_name);
  // Endpoints may be declared later; they are resolved in build().
  void add_edge(std::string a, std::string b, std::size_t line = 0);
  KnowledgeGraph build();

 private:
  struct PendingEdge {
    std::string a, b;
    std::size_t line;
  };
  KnowledgeGraph graph_;
  std::unordered_map<std::string, TypeIndex> type_ids_;
  std::vector<PendingEdge> edges_;
};

// concepts: concept_id<TAB>name<TAB>semantic_type_name
// edges:    concept_id<TAB>concept_id
KnowledgeGraph parse_graph(std::istream& concepts, std::istream& edges);
KnowledgeGraph load_graph(const std::filesystem::path& concepts_path,
                          const std::filesystem::path& edges_path);

// Frequency of each semantic type among the direct neighbors of v, divided by
// degree(v). All zeros for an isolated concept.
std::vector<double> signature(const KnowledgeGraph& g, ConceptIndex v);

double linf_distance(std::span<const double> a, std::span<const double> b);

// { u != v : linf(sig(u), sig(v)) <= r }, ascending. Exact linear scan.
std::vector<ConceptIndex> structural_neighbors(const KnowledgeGraph& g, ConceptIndex v, double r);

enum class Execution { serial, parallel };

// Signatures plus the structural neighbor list of every concept at a fixed
// radius. Building the lists is the O(|V|^2 |C|) hot loop; the parallel and
// serial builds produce identical lists.
class StructuralIndex {
 public:
  struct Options {
    Execution execution = Execution::parallel;
    // Prune candidates by binary search on the highest-variance signature
    // coordinate before the exact L-infinity test.
    bool projection_index = false;
  };

  StructuralIndex(const KnowledgeGraph& g, double radius);
  StructuralIndex(const KnowledgeGraph& g, double radius, Options options);

  double radius() const { return radius_; }
  std::size_t size() const { return neighbors_.size(); }
  std::span<const double> signature(ConceptIndex v) const;
  std::span<const ConceptIndex> neighbors(ConceptIndex v) const { return neighbors_.at(v); }

 private:
  std::size_t dims_ = 0;
  double radius_ = 0.0;
  std::vector<double> signatures_;  // row-major |V| x |C|
  std::vector<std::vector<ConceptIndex>> neighbors_;
};

using Path = std::vector<ConceptIndex>;

// Homophily walk: each successor uniform over the current node's neighbors.
// Returns at most length + 1 nodes; stops early at a degree-0 node.
Path h_walk(const KnowledgeGraph& g, ConceptIndex start, std::size_t length, Rng& rng);

// Structural walk: each successor uniform over structural_neighbors(current, r).
// Stops early when the candidate set is empty.
Path s_walk(const KnowledgeGraph& g, ConceptIndex start, std::size_t length, double r, Rng& rng);
Path s_walk(const StructuralIndex& index, ConceptIndex start, std::size_t length, Rng& rng);

struct WalkConfig {
  std::size_t walks_per_node = 10;
  std::size_t walk_length = 40;
  double s_path_radius = 0.1;
  std::uint64_t seed = 1;

  void validate() const;
};

enum class Strategy : char { homophily = 'H', structural = 'S' };

struct TaggedPath {
  Strategy strategy = Strategy::homophily;
  Path nodes;

  bool operator==(const TaggedPath&) const = default;
};

struct WalkCorpus {
  std::vector<TaggedPath> paths;

  bool operator==(const WalkCorpus&) const = default;
};

// Seed of the stream used for walk `walk` rooted at `start`.
std::uint64_t walk_seed(std::uint64_t seed, ConceptIndex start, std::size_t walk, Strategy s);

// gamma H-paths then gamma S-paths per concept. Order is all H paths (by
// concept, then walk index) followed by all S paths in the same order, and
// does not depend on the execution mode.
WalkCorpus generate_corpus(const KnowledgeGraph& g, const WalkConfig& cfg,
                           Execution execution = Execution::parallel);

// One path per line: "H c1 c2 ..." / "S c1 c2 ..." using concept ids.
void write_corpus(const WalkCorpus& corpus, const KnowledgeGraph& g, std::ostream& out);
void save_corpus(const WalkCorpus& corpus, const KnowledgeGraph& g,
                 const std::filesystem::path& path);

}  // namespace triage::kg
