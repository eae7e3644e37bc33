#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "triage/kg.hpp"
#include "triage/rng.hpp"

namespace triage::embed {

// Dense key -> vector table. Rows are stored as 32-bit floats, matching the
// word2vec distribution formats.
class EmbeddingMatrix {
 public:
  EmbeddingMatrix() = default;
  explicit EmbeddingMatrix(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return keys_.size(); }
  bool empty() const { return keys_.empty(); }

  // Throws FormatError on duplicate key or wrong vector length.
  std::size_t add(std::string key, std::span<const float> values);

  std::optional<std::size_t> find(std::string_view key) const;
  const std::string& key(std::size_t id) const { return keys_.at(id); }
  std::span<const std::string> keys() const { return keys_; }
  std::span<const float> row(std::size_t id) const;
  std::span<float> row(std::size_t id);

  bool operator==(const EmbeddingMatrix& other) const {
    return dim_ == other.dim_ && keys_ == other.keys_ && data_ == other.data_;
  }

 private:
  std::size_t dim_ = 0;
  std::vector<std::string> keys_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> data_;
};

enum class OovPolicy { zero, error };

std::vector<float> lookup(const EmbeddingMatrix& m, std::string_view key, OovPolicy policy);

enum class VectorFormat { text, binary };

// word2vec formats. Text: "count dim" header then "token v1 ... vdim" lines.
// Binary: the same header line, then per entry the token, one space, dim
// little-endian float32 values and a newline.
EmbeddingMatrix read_word_vectors(std::istream& in, VectorFormat format);
EmbeddingMatrix load_word_vectors(const std::filesystem::path& path, VectorFormat format);
void write_embeddings(const EmbeddingMatrix& m, std::ostream& out, VectorFormat format);
void save_embeddings(const EmbeddingMatrix& m, const std::filesystem::path& path,
                     VectorFormat format = VectorFormat::text);

// Guesses the format from the first entry: binary files contain bytes that
// are not printable after the first token.
VectorFormat detect_format(const std::filesystem::path& path);

// Integer-coded sentences for the skip-gram trainer. Keys are numbered in
// order of first appearance.
struct TokenCorpus {
  std::vector<std::string> keys;
  std::vector<std::uint64_t> counts;
  std::vector<std::vector<std::uint32_t>> sentences;

  std::uint32_t intern(std::string_view key);
  void add_sentence(std::span<const std::string> tokens);

 private:
  std::unordered_map<std::string, std::uint32_t> index_;
};

struct StrategyFilter {
  bool homophily = true;
  bool structural = true;
};

TokenCorpus corpus_from_walks(const kg::WalkCorpus& walks, const kg::KnowledgeGraph& g,
                              StrategyFilter filter = {});
// Parses the "H id id ..." / "S id id ..." walk file format.
TokenCorpus read_walk_corpus(std::istream& in, StrategyFilter filter = {});
TokenCorpus load_walk_corpus(const std::filesystem::path& path, StrategyFilter filter = {});

struct SkipGramConfig {
  std::size_t dim = 108;
  std::size_t window = 5;
  std::size_t negatives = 5;
  std::size_t epochs = 5;
  double learning_rate = 0.025;
  std::uint64_t seed = 1;
  // Unsynchronized multi-threaded updates. Output is no longer reproducible.
  bool hogwild = false;

  void validate() const;
};

// Draws ids with probability proportional to count^power.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const std::uint64_t> counts, double power = 0.75);
  std::uint32_t draw(Rng& rng) const;
  double probability(std::uint32_t id) const;
  std::size_t size() const { return cdf_.size(); }

 private:
  std::vector<double> cdf_;
};

struct SkipGramResult {
  EmbeddingMatrix vectors;   // input side; the published embedding
  EmbeddingMatrix contexts;  // output side
  // Mean negative-sampling loss per (center, context) pair, one per epoch.
  std::vector<double> epoch_loss;
  bool deterministic = true;
};

// Skip-gram with negative sampling. Reproducibility contract (serial mode):
//  - input vectors, id-major, uniform in [-0.5/dim, 0.5/dim) drawn from
//    Rng(derive_seed(seed, 1)); output vectors start at zero;
//  - negatives come from Rng(derive_seed(seed, 2)) in processing order;
//  - sentences in corpus order, centers left to right, contexts from
//    i - window to i + window; a negative equal to the context is skipped;
//  - learning rate lr0 * max(1e-4, 1 - done / total) per pair.
SkipGramResult train_skipgram(const TokenCorpus& corpus, const SkipGramConfig& cfg);

double cosine(std::span<const float> a, std::span<const float> b);

}  // namespace triage::embed
