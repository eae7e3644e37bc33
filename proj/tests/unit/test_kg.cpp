#include <boost/math/distributions/chi_squared.hpp>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/error.hpp"
#include "triage/kg.hpp"

using namespace triage;
using namespace triage::kg;
using testing::graph_from;

namespace {

// Brute-force structural neighbors straight from the definition.
std::vector<ConceptIndex> brute_neighbors(const KnowledgeGraph& g, ConceptIndex v, double r) {
  std::vector<std::vector<double>> sig(g.concept_count(), std::vector<double>(g.type_count(), 0.0));
  for (ConceptIndex u = 0; u < g.concept_count(); ++u) {
    for (ConceptIndex w = 0; w < g.concept_count(); ++w) {
      if (g.has_edge(u, w)) sig[u][g.concept_at(w).type] += 1.0;
    }
    double deg = 0;
    for (double x : sig[u]) deg += x;
    if (deg > 0) {
      for (double& x : sig[u]) x /= deg;
    }
  }
  std::vector<ConceptIndex> out;
  for (ConceptIndex u = 0; u < g.concept_count(); ++u) {
    if (u == v) continue;
    double d = 0;
    for (std::size_t c = 0; c < g.type_count(); ++c) d = std::max(d, std::abs(sig[u][c] - sig[v][c]));
    if (d <= r) out.push_back(u);
  }
  return out;
}

KnowledgeGraph random_graph(Rng& rng, std::size_t n, std::size_t types, double p) {
  std::string c, e;
  for (std::size_t i = 0; i < n; ++i) c += "v" + std::to_string(i) + "\tn\tt" + std::to_string(rng.below(types)) + "\n";
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (rng.bernoulli(p)) e += "v" + std::to_string(i) + "\tv" + std::to_string(j) + "\n";
    }
  }
  return graph_from(c, e);
}

}  // namespace

TEST_CASE("load: three concepts, two edges, two types") {
  const auto g = graph_from("A\ta\tt1\nB\tb\tt1\nC\tc\tt2\n", "A\tB\nB\tC\n");
  CHECK(g.concept_count() == 3);
  CHECK(g.edge_count() == 2);
  CHECK(g.type_count() == 2);
  CHECK(g.type_at(0).name == "t1");
  CHECK(g.type_at(1).name == "t2");
  CHECK(g.has_edge(g.index_of("B"), g.index_of("A")));
  CHECK_FALSE(g.has_edge(g.index_of("A"), g.index_of("C")));
}

TEST_CASE("load: duplicate edges collapse in either direction") {
  const auto g = graph_from("A\ta\tt1\nB\tb\tt1\nC\tc\tt2\n", "A\tB\nB\tC\nA\tB\nB\tA\n");
  CHECK(g.edge_count() == 2);
  CHECK(g.degree(g.index_of("A")) == 1);
}

TEST_CASE("load: errors") {
  const std::string concepts = "A\ta\tt1\nB\tb\tt1\n";
  SUBCASE("unknown endpoint names the concept") {
    try {
      graph_from(concepts, "A\tX\n");
      FAIL("expected ReferentialError");
    } catch (const ReferentialError& e) {
      CHECK(std::string(e.what()).find("'X'") != std::string::npos);
    }
  }
  SUBCASE("self-loop") { CHECK_THROWS_AS(graph_from(concepts, "A\tA\n"), ValidationError); }
  SUBCASE("malformed line reports its number") {
    try {
      graph_from("A\ta\tt1\nB\tb\n", "");
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
    CHECK_THROWS_AS(graph_from(concepts, "A\tB\tC\n"), ParseError);
  }
  SUBCASE("duplicate concept") { CHECK_THROWS_AS(graph_from("A\ta\tt\nA\tb\tt\n", ""), ValidationError); }
  SUBCASE("whitespace in id") { CHECK_THROWS_AS(graph_from("A B\ta\tt\n", ""), ValidationError); }
  SUBCASE("unknown id lookup") {
    const auto g = graph_from(concepts, "");
    CHECK_THROWS_AS(g.index_of("Z"), LookupError);
    CHECK_THROWS_AS(signature(g, 9), LookupError);
  }
  SUBCASE("missing file") { CHECK_THROWS_AS(load_graph("/nonexistent/c.tsv", "/nonexistent/e.tsv"), IoError); }
}

TEST_CASE("load: CRLF and blank lines") {
  const auto g = graph_from("A\ta\tt1\r\n\r\nB\tb\tt1\r\n", "A\tB\r\n\n");
  CHECK(g.concept_count() == 2);
  CHECK(g.edge_count() == 1);
}

TEST_CASE("signature examples") {
  // Leaves typed t1 declared first so t1 is coordinate 0.
  const auto star =
      graph_from("l0\tx\tt1\nl1\tx\tt1\nl2\tx\tt1\nl3\tx\tt1\nc\tx\tt2\n", "c\tl0\nc\tl1\nc\tl2\nc\tl3\n");
  CHECK(signature(star, star.index_of("c")) == std::vector<double>{1.0, 0.0});

  const auto mixed = graph_from("a\tx\tt1\nb\tx\tt1\nd\tx\tt2\nv\tx\tt1\n", "v\ta\nv\tb\nv\td\n");
  const auto s = signature(mixed, mixed.index_of("v"));
  CHECK(s[0] == doctest::Approx(2.0 / 3.0));
  CHECK(s[1] == doctest::Approx(1.0 / 3.0));

  const auto iso = graph_from("a\tx\tt1\nb\tx\tt2\n", "");
  CHECK(signature(iso, 0) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("signature entries sum to 0 or 1") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_graph(rng, 30, 4, 0.1);
    for (ConceptIndex v = 0; v < g.concept_count(); ++v) {
      double sum = 0;
      for (double x : signature(g, v)) {
        CHECK(x >= 0.0);
        sum += x;
      }
      CHECK((std::abs(sum) < 1e-9 || std::abs(sum - 1.0) < 1e-9));
    }
  }
}

TEST_CASE("h_walk examples") {
  const auto g = testing::star(4);
  Rng rng(1);
  const auto leaf = g.index_of("l2");
  const auto center = g.index_of("c");
  for (int i = 0; i < 20; ++i) {
    const auto p = h_walk(g, leaf, 2, rng);
    REQUIRE(p.size() == 3);
    CHECK(p[0] == leaf);
    CHECK(p[1] == center);
    CHECK(p[2] != center);
  }
  const auto iso = graph_from("a\tx\tt\nb\tx\tt\n", "");
  CHECK(h_walk(iso, 0, 5, rng) == Path{0});
  CHECK_THROWS_AS(h_walk(iso, 7, 5, rng), LookupError);
}

TEST_CASE("h_walk successor on a triangle is uniform") {
  const auto g = testing::triangle();
  const auto a = g.index_of("A"), b = g.index_of("B");
  Rng rng(2024);
  int hits = 0;
  const int trials = 10000;
  for (int i = 0; i < trials; ++i) hits += h_walk(g, a, 1, rng)[1] == b;
  CHECK(std::abs(hits / double(trials) - 0.5) < 0.02);
}

TEST_CASE("h_walk successor passes chi-square uniformity") {
  Rng rng(99);
  const auto g = random_graph(rng, 40, 3, 0.08);
  ConceptIndex start = 0;
  for (ConceptIndex v = 0; v < g.concept_count(); ++v) {
    if (g.degree(v) >= 3 && g.degree(v) <= 5) start = v;
  }
  REQUIRE(g.degree(start) >= 3);
  std::map<ConceptIndex, int> counts;
  const int samples = 100000;
  for (int i = 0; i < samples; ++i) ++counts[h_walk(g, start, 1, rng)[1]];
  const double expected = samples / double(g.degree(start));
  double chi2 = 0;
  for (auto u : g.neighbors(start)) chi2 += std::pow(counts[u] - expected, 2) / expected;
  CHECK(counts.size() == g.degree(start));
  boost::math::chi_squared dist(static_cast<double>(g.degree(start) - 1));
  CHECK(boost::math::cdf(boost::math::complement(dist, chi2)) > 0.01);
}

TEST_CASE("structural neighbor examples") {
  const auto g = testing::star(4);
  const auto l0 = g.index_of("l0"), l1 = g.index_of("l1"), c = g.index_of("c");
  const auto n0 = structural_neighbors(g, l0, 0.0);
  CHECK(std::find(n0.begin(), n0.end(), l1) != n0.end());
  CHECK(std::find(n0.begin(), n0.end(), l0) == n0.end());
  CHECK(std::find(n0.begin(), n0.end(), c) == n0.end());

  const std::vector<double> a{1.0, 0.0}, b{2.0 / 3.0, 1.0 / 3.0};
  CHECK(linf_distance(a, b) == doctest::Approx(1.0 / 3.0));
  CHECK(linf_distance(a, b) > 0.1);

  const auto all = structural_neighbors(g, c, 1.0);
  CHECK(all.size() == g.concept_count() - 1);
  CHECK_THROWS_AS(structural_neighbors(g, c, -0.5), ValidationError);
}

TEST_CASE("structural neighbors and index agree with brute force") {
  Rng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_graph(rng, 10 + rng.below(50), 1 + rng.below(5), 0.05 + 0.2 * rng.uniform01());
    const double r = 0.5 * rng.uniform01();
    const StructuralIndex serial(g, r, {Execution::serial, false});
    const StructuralIndex parallel(g, r, {Execution::parallel, false});
    const StructuralIndex projected(g, r, {Execution::parallel, true});
    for (ConceptIndex v = 0; v < g.concept_count(); ++v) {
      const auto expected = brute_neighbors(g, v, r);
      CHECK(structural_neighbors(g, v, r) == expected);
      const auto s = serial.neighbors(v);
      const auto p = parallel.neighbors(v);
      const auto q = projected.neighbors(v);
      CHECK(std::vector<ConceptIndex>(s.begin(), s.end()) == expected);
      CHECK(std::vector<ConceptIndex>(p.begin(), p.end()) == expected);
      CHECK(std::vector<ConceptIndex>(q.begin(), q.end()) == expected);
    }
  }
}

TEST_CASE("s_walk examples") {
  const auto g = testing::star(4);
  const auto c = g.index_of("c");
  Rng rng(8);
  for (int i = 0; i < 20; ++i) {
    const auto p = s_walk(g, g.index_of("l0"), 3, 0.0, rng);
    REQUIRE(p.size() == 4);
    for (auto v : p) CHECK(v != c);
  }
  // The center is structurally unique at r = 0.
  CHECK(s_walk(g, c, 5, 0.0, rng) == Path{c});

  // Two disjoint uniform cliques look identical structurally.
  const auto cliques = testing::two_cliques(4);
  std::set<char> seen;
  for (int i = 0; i < 200; ++i) {
    for (auto v : s_walk(cliques, cliques.index_of("q0n0"), 10, 0.0, rng)) seen.insert(cliques.concept_at(v).id[1]);
  }
  CHECK(seen == std::set<char>{'0', '1'});
}

TEST_CASE("s_walk via index matches the graph version") {
  Rng rng(12);
  const auto g = random_graph(rng, 40, 3, 0.1);
  const StructuralIndex index(g, 0.2);
  for (ConceptIndex v = 0; v < g.concept_count(); ++v) {
    Rng a(v), b(v);
    CHECK(s_walk(g, v, 15, 0.2, a) == s_walk(index, v, 15, b));
  }
}

TEST_CASE("corpus size, order and determinism") {
  const auto g = graph_from("a\tx\tt1\nb\tx\tt1\nc\tx\tt2\nd\tx\tt2\ne\tx\tt1\n",
                            "a\tb\nb\tc\nc\td\nd\te\ne\ta\n");
  WalkConfig cfg;
  cfg.walks_per_node = 2;
  cfg.walk_length = 6;
  cfg.s_path_radius = 1.0;
  cfg.seed = 4;
  const auto corpus = generate_corpus(g, cfg);
  REQUIRE(corpus.paths.size() == 20);
  for (std::size_t i = 0; i < 10; ++i) {
    CHECK(corpus.paths[i].strategy == Strategy::homophily);
    CHECK(corpus.paths[i].nodes.front() == i / 2);
    CHECK(corpus.paths[i].nodes.size() == 7);
  }
  for (std::size_t i = 10; i < 20; ++i) CHECK(corpus.paths[i].strategy == Strategy::structural);
  CHECK(generate_corpus(g, cfg, Execution::serial) == corpus);

  std::ostringstream a, b;
  write_corpus(corpus, g, a);
  write_corpus(generate_corpus(g, cfg), g, b);
  CHECK(a.str() == b.str());
  CHECK(a.str().rfind("H a ", 0) == 0);

  cfg.seed = 5;
  CHECK_FALSE(generate_corpus(g, cfg) == corpus);
}

TEST_CASE("triangle corpus: H paths of four nodes along edges") {
  const auto g = testing::triangle();
  WalkConfig cfg;
  cfg.walks_per_node = 1;
  cfg.walk_length = 3;
  const auto corpus = generate_corpus(g, cfg);
  CHECK(corpus.paths.size() == 6);
  for (const auto& p : corpus.paths) {
    if (p.strategy != Strategy::homophily) continue;
    REQUIRE(p.nodes.size() == 4);
    for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) CHECK(g.has_edge(p.nodes[i], p.nodes[i + 1]));
  }
}

TEST_CASE("walk properties on random graphs") {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_graph(rng, 5 + rng.below(60), 1 + rng.below(4), 0.1);
    WalkConfig cfg;
    cfg.walks_per_node = 3;
    cfg.walk_length = 8;
    cfg.s_path_radius = 0.3 * rng.uniform01();
    cfg.seed = trial;
    const auto corpus = generate_corpus(g, cfg);
    CHECK(corpus.paths.size() == 2 * 3 * g.concept_count());
    for (const auto& p : corpus.paths) {
      CHECK(p.nodes.size() <= cfg.walk_length + 1);
      for (std::size_t i = 0; i + 1 < p.nodes.size(); ++i) {
        const auto u = p.nodes[i], v = p.nodes[i + 1];
        if (p.strategy == Strategy::homophily) {
          CHECK(g.has_edge(u, v));
        } else {
          CHECK(u != v);
          CHECK(linf_distance(signature(g, u), signature(g, v)) <= cfg.s_path_radius);
        }
      }
    }
  }
}

TEST_CASE("walk config validation") {
  WalkConfig cfg;
  cfg.walk_length = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.walks_per_node = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.s_path_radius = -1;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
