#include "triage/kg.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "triage/error.hpp"
#include "triage/io.hpp"

namespace triage::kg {

const Concept& KnowledgeGraph::concept_at(ConceptIndex v) const {
  if (v >= concepts_.size()) throw LookupError("concept index " + std::to_string(v) + " out of range");
  return concepts_[v];
}

std::span<const ConceptIndex> KnowledgeGraph::neighbors(ConceptIndex v) const {
  if (v >= adjacency_.size()) throw LookupError("concept index " + std::to_string(v) + " out of range");
  return adjacency_[v];
}

bool KnowledgeGraph::has_edge(ConceptIndex a, ConceptIndex b) const {
  const auto adj = neighbors(a);
  return std::binary_search(adj.begin(), adj.end(), b);
}

std::optional<ConceptIndex> KnowledgeGraph::find(std::string_view concept_id) const {
  auto it = by_id_.find(std::string(concept_id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

ConceptIndex KnowledgeGraph::index_of(std::string_view concept_id) const {
  if (auto v = find(concept_id)) return *v;
  throw LookupError("unknown concept '" + std::string(concept_id) + "'");
}

ConceptIndex GraphBuilder::add_concept(std::string id, std::string name, const std::string& type_name) {
  if (id.empty()) throw ValidationError("empty concept id");
  // Walk corpora are whitespace-separated, so ids must not contain spaces.
  if (id.find_first_of(" \t\r\n\v\f") != std::string::npos) {
    throw ValidationError("concept id '" + id + "' contains whitespace");
  }
  auto& g = graph_;
  if (g.by_id_.count(id)) throw ValidationError("duplicate concept '" + id + "'");
  auto [it, inserted] = type_ids_.try_emplace(type_name, static_cast<TypeIndex>(g.types_.size()));
  if (inserted) g.types_.push_back({it->second, type_name});
  const auto index = static_cast<ConceptIndex>(g.concepts_.size());
  g.by_id_.emplace(id, index);
  g.concepts_.push_back({std::move(id), std::move(name), it->second});
  return index;
}

void GraphBuilder::add_edge(std::string a, std::string b, std::size_t line) {
  edges_.push_back({std::move(a), std::move(b), line});
}

KnowledgeGraph GraphBuilder::build() {
  auto& g = graph_;
  g.adjacency_.assign(g.concepts_.size(), {});
  for (const auto& e : edges_) {
    const std::string where = e.line ? " (edges line " + std::to_string(e.line) + ")" : "";
    auto a = g.find(e.a);
    if (!a) throw ReferentialError("edge references unknown concept '" + e.a + "'" + where);
    auto b = g.find(e.b);
    if (!b) throw ReferentialError("edge references unknown concept '" + e.b + "'" + where);
    if (*a == *b) throw ValidationError("self-loop on concept '" + e.a + "'" + where);
    g.adjacency_[*a].push_back(*b);
    g.adjacency_[*b].push_back(*a);
  }
  std::size_t endpoints = 0;
  for (auto& adj : g.adjacency_) {
    std::sort(adj.begin(), adj.end());
    adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    endpoints += adj.size();
  }
  g.edge_count_ = endpoints / 2;
  edges_.clear();
  type_ids_.clear();
  return std::exchange(graph_, KnowledgeGraph{});
}

KnowledgeGraph parse_graph(std::istream& concepts, std::istream& edges) {
  GraphBuilder builder;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(concepts, line)) {
    ++lineno;
    const auto text = io::chomp(line);
    if (io::trim(text).empty()) continue;
    const auto fields = io::split(text, '\t');
    if (fields.size() != 3 || fields[0].empty() || fields[2].empty()) {
      throw ParseError("concepts line " + std::to_string(lineno) +
                       ": expected concept_id<TAB>name<TAB>semantic_type");
    }
    try {
      builder.add_concept(std::string(fields[0]), std::string(fields[1]), std::string(fields[2]));
    } catch (const ValidationError& e) {
      throw ValidationError("concepts line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  lineno = 0;
  while (std::getline(edges, line)) {
    ++lineno;
    const auto text = io::chomp(line);
    if (io::trim(text).empty()) continue;
    const auto fields = io::split(text, '\t');
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("edges line " + std::to_string(lineno) + ": expected concept_id<TAB>concept_id");
    }
    builder.add_edge(std::string(fields[0]), std::string(fields[1]), lineno);
  }
  return builder.build();
}

KnowledgeGraph load_graph(const std::filesystem::path& concepts_path,
                          const std::filesystem::path& edges_path) {
  auto concepts = io::open_input(concepts_path);
  auto edges = io::open_input(edges_path);
  return parse_graph(concepts, edges);
}

namespace {

void fill_signature(const KnowledgeGraph& g, ConceptIndex v, std::span<double> out) {
  std::fill(out.begin(), out.end(), 0.0);
  const auto adj = g.neighbors(v);
  if (adj.empty()) return;
  for (ConceptIndex u : adj) out[g.concept_at(u).type] += 1.0;
  const double deg = static_cast<double>(adj.size());
  for (double& x : out) x /= deg;
}

}  // namespace

std::vector<double> signature(const KnowledgeGraph& g, ConceptIndex v) {
  std::vector<double> sig(g.type_count());
  fill_signature(g, v, sig);
  return sig;
}

double linf_distance(std::span<const double> a, std::span<const double> b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

std::vector<ConceptIndex> structural_neighbors(const KnowledgeGraph& g, ConceptIndex v, double r) {
  if (r < 0.0) throw ValidationError("radius must be non-negative");
  const auto sv = signature(g, v);
  std::vector<double> su(g.type_count());
  std::vector<ConceptIndex> out;
  for (ConceptIndex u = 0; u < g.concept_count(); ++u) {
    if (u == v) continue;
    fill_signature(g, u, su);
    if (linf_distance(su, sv) <= r) out.push_back(u);
  }
  return out;
}

StructuralIndex::StructuralIndex(const KnowledgeGraph& g, double radius)
    : StructuralIndex(g, radius, Options{}) {}

StructuralIndex::StructuralIndex(const KnowledgeGraph& g, double radius, Options options)
    : dims_(g.type_count()), radius_(radius) {
  if (radius < 0.0) throw ValidationError("radius must be non-negative");
  const std::size_t n = g.concept_count();
  signatures_.assign(n * dims_, 0.0);
  for (ConceptIndex v = 0; v < n; ++v) {
    fill_signature(g, v, std::span<double>(signatures_).subspan(v * dims_, dims_));
  }
  neighbors_.assign(n, {});

  // Optional pruning order: concepts sorted by their value on the coordinate
  // with the largest spread.
  std::vector<ConceptIndex> order;
  std::vector<double> keys;
  std::size_t axis = 0;
  if (options.projection_index && dims_ > 0 && n > 0) {
    double best = -1.0;
    for (std::size_t c = 0; c < dims_; ++c) {
      double mean = 0.0, sq = 0.0;
      for (std::size_t v = 0; v < n; ++v) mean += signatures_[v * dims_ + c];
      mean /= static_cast<double>(n);
      for (std::size_t v = 0; v < n; ++v) {
        const double d = signatures_[v * dims_ + c] - mean;
        sq += d * d;
      }
      if (sq > best) best = sq, axis = c;
    }
    order.resize(n);
    std::iota(order.begin(), order.end(), ConceptIndex{0});
    std::stable_sort(order.begin(), order.end(), [&](ConceptIndex a, ConceptIndex b) {
      return signatures_[a * dims_ + axis] < signatures_[b * dims_ + axis];
    });
    keys.resize(n);
    for (std::size_t i = 0; i < n; ++i) keys[i] = signatures_[order[i] * dims_ + axis];
  }

  auto build_one = [&](ConceptIndex v) {
    const auto sv = signature(v);
    auto& out = neighbors_[v];
    if (order.empty()) {
      for (ConceptIndex u = 0; u < n; ++u) {
        if (u != v && linf_distance(signature(u), sv) <= radius_) out.push_back(u);
      }
      return;
    }
    const double center = sv[axis];
    const double slack = 1e-12;
    auto lo = std::lower_bound(keys.begin(), keys.end(), center - radius_ - slack);
    auto hi = std::upper_bound(keys.begin(), keys.end(), center + radius_ + slack);
    for (auto it = lo; it != hi; ++it) {
      const ConceptIndex u = order[static_cast<std::size_t>(it - keys.begin())];
      if (u != v && linf_distance(signature(u), sv) <= radius_) out.push_back(u);
    }
    std::sort(out.begin(), out.end());
  };

  const auto count = static_cast<std::int64_t>(n);
  if (options.execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 16)
    for (std::int64_t v = 0; v < count; ++v) build_one(static_cast<ConceptIndex>(v));
  } else {
    for (std::int64_t v = 0; v < count; ++v) build_one(static_cast<ConceptIndex>(v));
  }
}

std::span<const double> StructuralIndex::signature(ConceptIndex v) const {
  return std::span<const double>(signatures_).subspan(static_cast<std::size_t>(v) * dims_, dims_);
}

Path h_walk(const KnowledgeGraph& g, ConceptIndex start, std::size_t length, Rng& rng) {
  Path path{start};
  path.reserve(length + 1);
  ConceptIndex current = start;
  for (std::size_t step = 0; step < length; ++step) {
    const auto adj = g.neighbors(current);
    if (adj.empty()) break;
    current = adj[rng.below(adj.size())];
    path.push_back(current);
  }
  return path;
}

Path s_walk(const KnowledgeGraph& g, ConceptIndex start, std::size_t length, double r, Rng& rng) {
  g.neighbors(start);  // range check
  Path path{start};
  ConceptIndex current = start;
  for (std::size_t step = 0; step < length; ++step) {
    const auto candidates = structural_neighbors(g, current, r);
    if (candidates.empty()) break;
    current = candidates[rng.below(candidates.size())];
    path.push_back(current);
  }
  return path;
}

Path s_walk(const StructuralIndex& index, ConceptIndex start, std::size_t length, Rng& rng) {
  Path path{start};
  path.reserve(length + 1);
  ConceptIndex current = start;
  for (std::size_t step = 0; step < length; ++step) {
    const auto candidates = index.neighbors(current);
    if (candidates.empty()) break;
    current = candidates[rng.below(candidates.size())];
    path.push_back(current);
  }
  return path;
}

void WalkConfig::validate() const {
  if (walks_per_node < 1) throw ConfigError("walks_per_node must be >= 1");
  if (walk_length < 1) throw ConfigError("walk_length must be >= 1");
  if (!(s_path_radius >= 0.0)) throw ConfigError("s_path_radius must be >= 0");
}

std::uint64_t walk_seed(std::uint64_t seed, ConceptIndex start, std::size_t walk, Strategy s) {
  return derive_seed(seed, start, walk, static_cast<std::uint64_t>(s));
}

WalkCorpus generate_corpus(const KnowledgeGraph& g, const WalkConfig& cfg, Execution execution) {
  cfg.validate();
  const std::size_t n = g.concept_count();
  const std::size_t gamma = cfg.walks_per_node;
  const StructuralIndex index(g, cfg.s_path_radius, {.execution = execution});

  WalkCorpus corpus;
  corpus.paths.resize(2 * gamma * n);
  auto fill = [&](ConceptIndex v) {
    for (std::size_t w = 0; w < gamma; ++w) {
      Rng h_rng(walk_seed(cfg.seed, v, w, Strategy::homophily));
      corpus.paths[v * gamma + w] = {Strategy::homophily, h_walk(g, v, cfg.walk_length, h_rng)};
      Rng s_rng(walk_seed(cfg.seed, v, w, Strategy::structural));
      corpus.paths[(n + v) * gamma + w] = {Strategy::structural,
                                           s_walk(index, v, cfg.walk_length, s_rng)};
    }
  };
  const auto count = static_cast<std::int64_t>(n);
  if (execution == Execution::parallel) {
#pragma omp parallel for schedule(dynamic, 8)
    for (std::int64_t v = 0; v < count; ++v) fill(static_cast<ConceptIndex>(v));
  } else {
    for (std::int64_t v = 0; v < count; ++v) fill(static_cast<ConceptIndex>(v));
  }
  return corpus;
}

void write_corpus(const WalkCorpus& corpus, const KnowledgeGraph& g, std::ostream& out) {
  for (const auto& p : corpus.paths) {
    out << static_cast<char>(p.strategy);
    for (ConceptIndex v : p.nodes) out << ' ' << g.concept_at(v).id;
    out << '\n';
  }
}

void save_corpus(const WalkCorpus& corpus, const KnowledgeGraph& g, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  write_corpus(corpus, g, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

}  // namespace triage::kg
