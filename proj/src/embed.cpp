#include "triage/embed.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <sstream>

#include <omp.h>

#include "triage/error.hpp"
#include "triage/io.hpp"

namespace triage::embed {

EmbeddingMatrix::EmbeddingMatrix(std::size_t dim) : dim_(dim) {}

std::size_t EmbeddingMatrix::add(std::string key, std::span<const float> values) {
  if (values.size() != dim_) {
    throw FormatError("vector for '" + key + "' has " + std::to_string(values.size()) +
                      " values, expected " + std::to_string(dim_));
  }
  const std::size_t id = keys_.size();
  if (!index_.try_emplace(key, id).second) throw FormatError("duplicate token '" + key + "'");
  keys_.push_back(std::move(key));
  data_.insert(data_.end(), values.begin(), values.end());
  return id;
}

std::optional<std::size_t> EmbeddingMatrix::find(std::string_view key) const {
  auto it = index_.find(std::string(key));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::span<const float> EmbeddingMatrix::row(std::size_t id) const {
  if (id >= keys_.size()) throw LookupError("embedding row " + std::to_string(id) + " out of range");
  return std::span<const float>(data_).subspan(id * dim_, dim_);
}

std::span<float> EmbeddingMatrix::row(std::size_t id) {
  if (id >= keys_.size()) throw LookupError("embedding row " + std::to_string(id) + " out of range");
  return std::span<float>(data_).subspan(id * dim_, dim_);
}

std::vector<float> lookup(const EmbeddingMatrix& m, std::string_view key, OovPolicy policy) {
  if (auto id = m.find(key)) {
    auto r = m.row(*id);
    return {r.begin(), r.end()};
  }
  if (policy == OovPolicy::error) throw LookupError("no vector for '" + std::string(key) + "'");
  return std::vector<float>(m.dim(), 0.0f);
}

namespace {

std::pair<std::size_t, std::size_t> read_header(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing 'count dim' header");
  std::istringstream hs(line);
  long long count = -1, dim = -1;
  std::string extra;
  if (!(hs >> count >> dim) || (hs >> extra) || count < 0 || dim <= 0) {
    throw FormatError("bad header '" + std::string(io::chomp(line)) + "', expected 'count dim'");
  }
  if (count == 0) throw FormatError("empty vocabulary");
  return {static_cast<std::size_t>(count), static_cast<std::size_t>(dim)};
}

float parse_float(std::string_view s, const std::string& token) {
  float value = 0.0f;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size()) {
    throw FormatError("bad value '" + std::string(s) + "' in vector for '" + token + "'");
  }
  return value;
}

EmbeddingMatrix read_text(std::istream& in) {
  const auto [count, dim] = read_header(in);
  EmbeddingMatrix m(dim);
  std::vector<float> values;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string_view> fields;
    std::string_view rest = line;
    while (true) {
      rest = io::trim(rest);
      if (rest.empty()) break;
      const auto end = rest.find_first_of(" \t\r");
      fields.push_back(rest.substr(0, end));
      if (end == std::string_view::npos) break;
      rest.remove_prefix(end);
    }
    if (fields.empty()) continue;
    std::string token(fields[0]);
    if (fields.size() - 1 != dim) {
      throw FormatError("vector for '" + token + "' has " + std::to_string(fields.size() - 1) +
                        " values, expected " + std::to_string(dim));
    }
    values.clear();
    for (std::size_t i = 1; i < fields.size(); ++i) values.push_back(parse_float(fields[i], token));
    if (m.size() == count) throw FormatError("more entries than the header count " + std::to_string(count));
    m.add(std::move(token), values);
  }
  if (m.size() != count) {
    throw FormatError("header declares " + std::to_string(count) + " entries, found " +
                      std::to_string(m.size()));
  }
  return m;
}

float load_le_float(const unsigned char* p) {
  std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
                       static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
  return std::bit_cast<float>(bits);
}

void store_le_float(float f, unsigned char* p) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) p[i] = static_cast<unsigned char>(bits >> (8 * i));
}

EmbeddingMatrix read_binary(std::istream& in) {
  const auto [count, dim] = read_header(in);
  EmbeddingMatrix m(dim);
  std::vector<unsigned char> raw(dim * 4);
  std::vector<float> values(dim);
  for (std::size_t n = 0; n < count; ++n) {
    int c;
    while ((c = in.get()) == '\n' || c == ' ' || c == '\r') {
    }
    if (c == EOF) {
      throw FormatError("header declares " + std::to_string(count) + " entries, found " +
                        std::to_string(n));
    }
    std::string token(1, static_cast<char>(c));
    while ((c = in.get()) != EOF && c != ' ') token.push_back(static_cast<char>(c));
    if (c == EOF) throw FormatError("truncated entry for '" + token + "'");
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size())) {
      throw FormatError("vector for '" + token + "' is truncated, expected " + std::to_string(dim) +
                        " float32 values");
    }
    for (std::size_t i = 0; i < dim; ++i) values[i] = load_le_float(&raw[4 * i]);
    m.add(std::move(token), values);
  }
  return m;
}

}  // namespace

EmbeddingMatrix read_word_vectors(std::istream& in, VectorFormat format) {
  return format == VectorFormat::text ? read_text(in) : read_binary(in);
}

EmbeddingMatrix load_word_vectors(const std::filesystem::path& path, VectorFormat format) {
  auto in = io::open_input(path, true);
  return read_word_vectors(in, format);
}

void write_embeddings(const EmbeddingMatrix& m, std::ostream& out, VectorFormat format) {
  if (m.empty()) throw FormatError("refusing to write an empty vocabulary");
  out << m.size() << ' ' << m.dim() << '\n';
  if (format == VectorFormat::binary) {
    std::vector<unsigned char> raw(m.dim() * 4);
    for (std::size_t id = 0; id < m.size(); ++id) {
      const auto r = m.row(id);
      for (std::size_t i = 0; i < r.size(); ++i) store_le_float(r[i], &raw[4 * i]);
      out << m.key(id) << ' ';
      out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
      out << '\n';
    }
    return;
  }
  char buf[64];
  for (std::size_t id = 0; id < m.size(); ++id) {
    out << m.key(id);
    for (float v : m.row(id)) {
      // Shortest representation that parses back to the same float.
      auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
      out << ' ';
      out.write(buf, ptr - buf);
    }
    out << '\n';
  }
}

void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path, VectorFormat format) {
  if (m.empty()) throw FormatError("refusing to write an empty vocabulary");
  auto out = io::open_output(path, true);
  write_embeddings(m, out, format);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

VectorFormat detect_format(const std::filesystem::path& path) {
  auto in = io::open_input(path, true);
  std::string header;
  std::getline(in, header);
  std::string token;
  int c;
  while ((c = in.get()) != EOF && c != ' ') token.push_back(static_cast<char>(c));
  for (int i = 0; i < 64 && (c = in.get()) != EOF; ++i) {
    if (c == '\n') break;
    if (c < 0x20 && c != '\t' && c != '\r') return VectorFormat::binary;
    if (c >= 0x7f) return VectorFormat::binary;
  }
  return VectorFormat::text;
}

std::uint32_t TokenCorpus::intern(std::string_view key) {
  auto [it, inserted] = index_.try_emplace(std::string(key), static_cast<std::uint32_t>(keys.size()));
  if (inserted) {
    keys.emplace_back(key);
    counts.push_back(0);
  }
  return it->second;
}

void TokenCorpus::add_sentence(std::span<const std::string> tokens) {
  std::vector<std::uint32_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) {
    const auto id = intern(t);
    ++counts[id];
    ids.push_back(id);
  }
  sentences.push_back(std::move(ids));
}

TokenCorpus corpus_from_walks(const kg::WalkCorpus& walks, const kg::KnowledgeGraph& g,
                              StrategyFilter filter) {
  TokenCorpus corpus;
  std::vector<std::string> tokens;
  for (const auto& p : walks.paths) {
    if (p.strategy == kg::Strategy::homophily ? !filter.homophily : !filter.structural) continue;
    tokens.clear();
    for (auto v : p.nodes) tokens.push_back(g.concept_at(v).id);
    corpus.add_sentence(tokens);
  }
  return corpus;
}

TokenCorpus read_walk_corpus(std::istream& in, StrategyFilter filter) {
  TokenCorpus corpus;
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::string> tokens;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag != "H" && tag != "S") {
      throw ParseError("walk corpus line " + std::to_string(lineno) + ": expected tag H or S, got '" +
                       tag + "'");
    }
    tokens.clear();
    for (std::string t; ls >> t;) tokens.push_back(std::move(t));
    if (tokens.empty()) throw ParseError("walk corpus line " + std::to_string(lineno) + ": empty path");
    if (tag == "H" ? !filter.homophily : !filter.structural) continue;
    corpus.add_sentence(tokens);
  }
  return corpus;
}

TokenCorpus load_walk_corpus(const std::filesystem::path& path, StrategyFilter filter) {
  auto in = io::open_input(path);
  return read_walk_corpus(in, filter);
}

void SkipGramConfig::validate() const {
  if (dim < 1) throw ConfigError("skip-gram dim must be >= 1");
  if (window < 1) throw ConfigError("skip-gram window must be >= 1");
  if (negatives < 1) throw ConfigError("skip-gram negatives must be >= 1");
  if (!(learning_rate > 0.0)) throw ConfigError("skip-gram learning_rate must be > 0");
}

NegativeSampler::NegativeSampler(std::span<const std::uint64_t> counts, double power) {
  cdf_.reserve(counts.size());
  double total = 0.0;
  for (auto c : counts) {
    total += std::pow(static_cast<double>(c), power);
    cdf_.push_back(total);
  }
  if (total <= 0.0) throw DataError("negative sampler needs at least one positive count");
  for (double& x : cdf_) x /= total;
  cdf_.back() = 1.0;
}

std::uint32_t NegativeSampler::draw(Rng& rng) const {
  const double u = rng.uniform01();
  const auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
  return static_cast<std::uint32_t>(std::min<std::size_t>(it - cdf_.begin(), cdf_.size() - 1));
}

double NegativeSampler::probability(std::uint32_t id) const {
  return id == 0 ? cdf_.at(0) : cdf_.at(id) - cdf_.at(id - 1);
}

namespace {

// -log(sigmoid(x)), stable for large |x|.
double softplus_neg(double x) { return x > 0 ? std::log1p(std::exp(-x)) : -x + std::log1p(std::exp(x)); }

double sigmoid(double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); }

struct Trainer {
  const TokenCorpus& corpus;
  const SkipGramConfig& cfg;
  const NegativeSampler& sampler;
  std::vector<double>& in_vec;
  std::vector<double>& out_vec;
  std::uint64_t total_pairs;

  // Processes one sentence; returns (loss, pairs).
  std::pair<double, std::uint64_t> sentence(const std::vector<std::uint32_t>& s, std::uint64_t done,
                                            Rng& rng, std::vector<double>& grad) const {
    const std::size_t dim = cfg.dim;
    double loss = 0.0;
    std::uint64_t pairs = 0;
    const auto len = static_cast<std::int64_t>(s.size());
    const auto win = static_cast<std::int64_t>(cfg.window);
    for (std::int64_t i = 0; i < len; ++i) {
      const std::uint32_t center = s[static_cast<std::size_t>(i)];
      double* u = &in_vec[center * dim];
      for (std::int64_t j = std::max<std::int64_t>(0, i - win); j <= std::min(len - 1, i + win); ++j) {
        if (j == i) continue;
        const std::uint32_t context = s[static_cast<std::size_t>(j)];
        const double progress = static_cast<double>(done + pairs) / static_cast<double>(total_pairs);
        const double lr = cfg.learning_rate * std::max(1e-4, 1.0 - progress);
        std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t k = 0; k <= cfg.negatives; ++k) {
          std::uint32_t target = context;
          double label = 1.0;
          if (k > 0) {
            target = sampler.draw(rng);
            if (target == context) continue;
            label = 0.0;
          }
          double* v = &out_vec[target * dim];
          double score = 0.0;
          for (std::size_t d = 0; d < dim; ++d) score += u[d] * v[d];
          loss += label > 0 ? softplus_neg(score) : softplus_neg(-score);
          const double g = (label - sigmoid(score)) * lr;
          for (std::size_t d = 0; d < dim; ++d) grad[d] += g * v[d];
          for (std::size_t d = 0; d < dim; ++d) v[d] += g * u[d];
        }
        for (std::size_t d = 0; d < dim; ++d) u[d] += grad[d];
        ++pairs;
      }
    }
    return {loss, pairs};
  }
};

std::uint64_t pairs_in(const std::vector<std::uint32_t>& s, std::size_t window) {
  std::uint64_t total = 0;
  const auto len = static_cast<std::int64_t>(s.size());
  const auto win = static_cast<std::int64_t>(window);
  for (std::int64_t i = 0; i < len; ++i) {
    total += static_cast<std::uint64_t>(std::min(len - 1, i + win) - std::max<std::int64_t>(0, i - win));
  }
  return total;
}

}  // namespace

SkipGramResult train_skipgram(const TokenCorpus& corpus, const SkipGramConfig& cfg) {
  cfg.validate();
  if (corpus.sentences.empty() || corpus.keys.empty()) throw DataError("empty corpus");
  for (const auto& s : corpus.sentences) {
    if (s.empty()) throw DataError("corpus contains an empty path");
  }
  const std::size_t vocab = corpus.keys.size();
  const std::size_t dim = cfg.dim;

  std::vector<double> in_vec(vocab * dim);
  std::vector<double> out_vec(vocab * dim, 0.0);
  Rng init(derive_seed(cfg.seed, 1));
  const double half = 0.5 / static_cast<double>(dim);
  for (double& x : in_vec) x = init.uniform(-half, half);

  const NegativeSampler sampler(corpus.counts);
  std::vector<std::uint64_t> offsets(corpus.sentences.size() + 1, 0);
  for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
    offsets[i + 1] = offsets[i] + pairs_in(corpus.sentences[i], cfg.window);
  }
  const std::uint64_t epoch_pairs = offsets.back();
  const std::uint64_t total_pairs = std::max<std::uint64_t>(1, epoch_pairs * cfg.epochs);

  Trainer trainer{corpus, cfg, sampler, in_vec, out_vec, total_pairs};
  SkipGramResult result;
  result.deterministic = !cfg.hogwild;
  Rng neg_rng(derive_seed(cfg.seed, 2));
  std::vector<double> grad(dim);

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss = 0.0;
    const std::uint64_t base = epoch * epoch_pairs;
    if (!cfg.hogwild) {
      for (std::size_t i = 0; i < corpus.sentences.size(); ++i) {
        loss += trainer.sentence(corpus.sentences[i], base + offsets[i], neg_rng, grad).first;
      }
    } else {
      const auto count = static_cast<std::int64_t>(corpus.sentences.size());
#pragma omp parallel reduction(+ : loss)
      {
        Rng rng(derive_seed(cfg.seed, 3, epoch, static_cast<std::uint64_t>(omp_get_thread_num())));
        std::vector<double> local_grad(dim);
#pragma omp for schedule(static)
        for (std::int64_t i = 0; i < count; ++i) {
          const auto idx = static_cast<std::size_t>(i);
          loss += trainer.sentence(corpus.sentences[idx], base + offsets[idx], rng, local_grad).first;
        }
      }
    }
    result.epoch_loss.push_back(epoch_pairs ? loss / static_cast<double>(epoch_pairs) : 0.0);
  }

  auto to_matrix = [&](const std::vector<double>& table) {
    EmbeddingMatrix m(dim);
    std::vector<float> row(dim);
    for (std::size_t id = 0; id < vocab; ++id) {
      for (std::size_t d = 0; d < dim; ++d) row[d] = static_cast<float>(table[id * dim + d]);
      m.add(corpus.keys[id], row);
    }
    return m;
  };
  result.vectors = to_matrix(in_vec);
  result.contexts = to_matrix(out_vec);
  return result;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

}  // namespace triage::embed
