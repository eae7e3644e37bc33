#include <cmath>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/embed.hpp"
#include "triage/error.hpp"

using namespace triage;
using namespace triage::embed;

namespace {

EmbeddingMatrix parse_text(const std::string& s) {
  std::istringstream in(s);
  return read_word_vectors(in, VectorFormat::text);
}

TokenCorpus repeated(const std::vector<std::vector<std::string>>& sentences, int times) {
  TokenCorpus c;
  for (int t = 0; t < times; ++t) {
    for (const auto& s : sentences) c.add_sentence(s);
  }
  return c;
}

// Reference skip-gram written from the documented protocol with plain loops
// and a linear-scan unigram table.
struct ReferenceSkipGram {
  std::vector<std::vector<double>> in, out;
  std::vector<double> epoch_loss;

  ReferenceSkipGram(const TokenCorpus& c, const SkipGramConfig& cfg) {
    const std::size_t V = c.keys.size(), D = cfg.dim;
    in.assign(V, std::vector<double>(D));
    out.assign(V, std::vector<double>(D, 0.0));
    Rng init(derive_seed(cfg.seed, 1));
    for (auto& row : in) {
      for (auto& x : row) x = init.uniform(-0.5 / D, 0.5 / D);
    }
    std::vector<double> cdf;
    double total = 0;
    for (auto n : c.counts) cdf.push_back(total += std::pow(double(n), 0.75));
    for (auto& x : cdf) x /= total;
    cdf.back() = 1.0;
    auto draw = [&](Rng& rng) {
      const double u = rng.uniform01();
      std::size_t i = 0;
      while (i + 1 < cdf.size() && cdf[i] <= u) ++i;
      return static_cast<std::uint32_t>(i);
    };

    std::uint64_t pairs_per_epoch = 0;
    for (const auto& s : c.sentences) {
      for (std::size_t i = 0; i < s.size(); ++i) {
        for (std::size_t j = 0; j < s.size(); ++j) {
          if (j != i && (i > j ? i - j : j - i) <= cfg.window) ++pairs_per_epoch;
        }
      }
    }
    const double total_pairs = double(pairs_per_epoch * cfg.epochs);
    Rng neg(derive_seed(cfg.seed, 2));
    std::uint64_t done = 0;
    for (std::size_t e = 0; e < cfg.epochs; ++e) {
      double loss = 0;
      for (const auto& s : c.sentences) {
        for (std::size_t i = 0; i < s.size(); ++i) {
          for (std::size_t j = 0; j < s.size(); ++j) {
            if (j == i || (i > j ? i - j : j - i) > cfg.window) continue;
            const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - double(done) / total_pairs);
            auto& u = in[s[i]];
            std::vector<double> grad(D, 0.0);
            for (std::size_t k = 0; k <= cfg.negatives; ++k) {
              std::uint32_t target = s[j];
              double label = 1;
              if (k > 0) {
                target = draw(neg);
                if (target == s[j]) continue;
                label = 0;
              }
              auto& v = out[target];
              double dot = 0;
              for (std::size_t d = 0; d < D; ++d) dot += u[d] * v[d];
              const double p = 1.0 / (1.0 + std::exp(-dot));
              loss += label > 0 ? -std::log(p) : -std::log(1 - p);
              const double g = (label - p) * lr;
              for (std::size_t d = 0; d < D; ++d) grad[d] += g * v[d];
              for (std::size_t d = 0; d < D; ++d) v[d] += g * u[d];
            }
            for (std::size_t d = 0; d < D; ++d) u[d] += grad[d];
            ++done;
          }
        }
      }
      epoch_loss.push_back(loss / double(pairs_per_epoch));
    }
  }
};

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

TEST_CASE("text word vectors: basic parse and lookup") {
  const auto m = parse_text("2 3\na 1 0 0\nb 0 1 0\n");
  CHECK(m.size() == 2);
  CHECK(m.dim() == 3);
  CHECK(lookup(m, "a", OovPolicy::error) == std::vector<float>{1, 0, 0});
  CHECK(lookup(m, "zzz", OovPolicy::zero) == std::vector<float>{0, 0, 0});
  CHECK_THROWS_AS(lookup(m, "zzz", OovPolicy::error), LookupError);
}

TEST_CASE("text word vectors: format errors") {
  try {
    parse_text("2 3\na 1 0 0\nb 0 1\n");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("'b'") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_text("2 3\na 1 0 0\na 0 1 0\n"), FormatError);
  CHECK_THROWS_AS(parse_text("3 3\na 1 0 0\nb 0 1 0\n"), FormatError);
  CHECK_THROWS_AS(parse_text("1 3\na 1 0 0\nb 0 1 0\n"), FormatError);
  CHECK_THROWS_AS(parse_text("0 3\n"), FormatError);
  CHECK_THROWS_AS(parse_text("x y\n"), FormatError);
  CHECK_THROWS_AS(parse_text(""), FormatError);
  CHECK_THROWS_AS(parse_text("1 2\na 1 nope\n"), FormatError);
}

TEST_CASE("word vectors round trip in both formats") {
  testing::TempDir dir("embed");
  Rng rng(3);
  EmbeddingMatrix m(5);
  for (int i = 0; i < 20; ++i) {
    std::vector<float> v(5);
    for (auto& x : v) x = static_cast<float>(rng.normal());
    m.add("tok" + std::to_string(i), v);
  }
  for (auto format : {VectorFormat::text, VectorFormat::binary}) {
    const auto path = dir / (format == VectorFormat::text ? "v.txt" : "v.bin");
    save_embeddings(m, path, format);
    CHECK(detect_format(path) == format);
    const auto back = load_word_vectors(path, format);
    CHECK(back == m);
  }
  EmbeddingMatrix one(2);
  one.add("only", std::vector<float>{0.25f, -1.5f});
  save_embeddings(one, dir / "one.txt");
  CHECK(load_word_vectors(dir / "one.txt", VectorFormat::text) == one);
  CHECK_THROWS_AS(save_embeddings(EmbeddingMatrix(3), dir / "empty.txt"), FormatError);
}

TEST_CASE("binary layout is header, token, space, little-endian float32") {
  EmbeddingMatrix m(2);
  m.add("ab", std::vector<float>{1.0f, -2.0f});
  std::ostringstream out;
  write_embeddings(m, out, VectorFormat::binary);
  const std::string bytes = out.str();
  const std::string expected = std::string("1 2\nab ") + std::string("\x00\x00\x80\x3f", 4) +
                               std::string("\x00\x00\x00\xc0", 4) + "\n";
  CHECK(bytes == expected);
  std::istringstream in(bytes.substr(0, bytes.size() - 1));  // no trailing newline
  CHECK(read_word_vectors(in, VectorFormat::binary) == m);
  std::istringstream cut(bytes.substr(0, 10));
  CHECK_THROWS_AS(read_word_vectors(cut, VectorFormat::binary), FormatError);
}

TEST_CASE("walk corpus parsing and strategy filter") {
  std::istringstream in("H a b c\nS c a\n\nH b\n");
  const auto all = read_walk_corpus(in);
  CHECK(all.sentences.size() == 3);
  CHECK(all.keys == std::vector<std::string>{"a", "b", "c"});
  CHECK(all.counts == std::vector<std::uint64_t>{2, 2, 2});
  std::istringstream again("H a b c\nS c a\n\nH b\n");
  const auto h_only = read_walk_corpus(again, {true, false});
  CHECK(h_only.sentences.size() == 2);
  std::istringstream bad("X a b\n");
  CHECK_THROWS_AS(read_walk_corpus(bad), ParseError);
}

TEST_CASE("negative sampler follows count^0.75") {
  const std::vector<std::uint64_t> counts{1, 5, 20, 100};
  const NegativeSampler sampler(counts);
  double z = 0;
  for (auto c : counts) z += std::pow(double(c), 0.75);
  std::vector<int> hits(counts.size(), 0);
  Rng rng(1);
  const int draws = 1000000;
  for (int i = 0; i < draws; ++i) ++hits[sampler.draw(rng)];
  for (std::size_t i = 0; i < counts.size(); ++i) {
    const double p = std::pow(double(counts[i]), 0.75) / z;
    CHECK(sampler.probability(static_cast<std::uint32_t>(i)) == doctest::Approx(p));
    CHECK(std::abs(hits[i] / double(draws) - p) / p < 0.02);
  }
}

TEST_CASE("skip-gram matches the loop-level reference") {
  const auto corpus = repeated({{"a", "b", "c", "a"}, {"d", "b"}, {"c", "d", "e", "a", "b"}}, 30);
  SkipGramConfig cfg;
  cfg.dim = 6;
  cfg.window = 2;
  cfg.negatives = 3;
  cfg.epochs = 3;
  cfg.seed = 77;
  const auto got = train_skipgram(corpus, cfg);
  const ReferenceSkipGram ref(corpus, cfg);
  REQUIRE(got.epoch_loss.size() == ref.epoch_loss.size());
  for (std::size_t e = 0; e < ref.epoch_loss.size(); ++e) {
    CHECK(got.epoch_loss[e] == doctest::Approx(ref.epoch_loss[e]).epsilon(1e-9));
  }
  for (std::size_t id = 0; id < corpus.keys.size(); ++id) {
    const auto row = got.vectors.row(id);
    const auto ctx = got.contexts.row(id);
    for (std::size_t d = 0; d < cfg.dim; ++d) {
      CHECK(row[d] == doctest::Approx(ref.in[id][d]).epsilon(1e-5));
      CHECK(ctx[d] == doctest::Approx(ref.out[id][d]).epsilon(1e-5));
    }
  }
  CHECK(got.deterministic);
}

TEST_CASE("skip-gram on a repeated pair learns the pair") {
  const auto corpus = repeated({{"A", "B"}}, 1000);
  SkipGramConfig cfg;
  cfg.dim = 8;
  cfg.seed = 2;
  const auto r = train_skipgram(corpus, cfg);
  const auto a = r.vectors.row(*r.vectors.find("A"));
  const auto b = r.contexts.row(*r.contexts.find("B"));
  double dot = 0;
  for (std::size_t d = 0; d < cfg.dim; ++d) dot += double(a[d]) * b[d];
  CHECK(sigmoid(dot) > 0.9);
}

TEST_CASE("skip-gram separates disconnected pairs") {
  const auto corpus = repeated({{"A", "B", "A", "B", "A", "B"}, {"X", "Y", "X", "Y", "X", "Y"}}, 200);
  SkipGramConfig cfg;
  cfg.dim = 16;
  cfg.window = 2;
  cfg.seed = 9;
  const auto r = train_skipgram(corpus, cfg);
  auto row = [&](const char* k) { return r.vectors.row(*r.vectors.find(k)); };
  CHECK(cosine(row("A"), row("B")) - cosine(row("A"), row("X")) > 0.2);
}

TEST_CASE("skip-gram loss decreases and runs are reproducible") {
  const auto g = testing::two_cliques(8);
  kg::WalkConfig wc;
  wc.walks_per_node = 10;
  wc.walk_length = 20;
  const auto walks = kg::generate_corpus(g, wc);
  const auto corpus = corpus_from_walks(walks, g, {true, false});
  SkipGramConfig cfg;
  cfg.dim = 16;
  cfg.epochs = 10;
  const auto a = train_skipgram(corpus, cfg);
  const auto b = train_skipgram(corpus, cfg);
  CHECK(a.vectors == b.vectors);
  CHECK(a.epoch_loss == b.epoch_loss);
  for (std::size_t e = 2; e + 1 < a.epoch_loss.size(); ++e) CHECK(a.epoch_loss[e + 1] <= a.epoch_loss[e] * 1.05);
  CHECK(a.epoch_loss.back() < a.epoch_loss.front());
}

TEST_CASE("hogwild mode trains and marks itself non-deterministic") {
  const auto corpus = repeated({{"a", "b", "c"}, {"c", "d"}}, 50);
  SkipGramConfig cfg;
  cfg.dim = 4;
  cfg.hogwild = true;
  const auto r = train_skipgram(corpus, cfg);
  CHECK_FALSE(r.deterministic);
  CHECK(r.vectors.size() == 4);
}

TEST_CASE("skip-gram input errors") {
  SkipGramConfig cfg;
  CHECK_THROWS_AS(train_skipgram(TokenCorpus{}, cfg), DataError);
  cfg.dim = 0;
  CHECK_THROWS_AS(train_skipgram(repeated({{"a", "b"}}, 1), cfg), ConfigError);
  cfg = {};
  cfg.window = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = {};
  cfg.negatives = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("embedding matrix rejects bad rows") {
  EmbeddingMatrix m(2);
  m.add("a", std::vector<float>{1, 2});
  CHECK_THROWS_AS(m.add("a", std::vector<float>{1, 2}), FormatError);
  CHECK_THROWS_AS(m.add("b", std::vector<float>{1}), FormatError);
  CHECK(m.find("b") == std::nullopt);
  CHECK_THROWS_AS(m.row(5), LookupError);
}
