#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "triage/config.hpp"
#include "triage/embed.hpp"
#include "triage/eval.hpp"
#include "triage/nn/gradcheck.hpp"
#include "triage/nn/layers.hpp"
#include "triage/nn/tensor.hpp"
#include "triage/rng.hpp"
#include "triage/text.hpp"

namespace triage::kmcnn {

inline constexpr std::size_t kKnowledgeDim = 108;
inline constexpr std::size_t kWordDim = 200;
inline constexpr std::size_t kDeskFilters = 64;

enum class Variant { plain_cnn, mcnn, kcnn, kmcnn };
enum class OptimizerKind { adam, sgd };
enum class Activation { relu, tanh };

std::string_view variant_name(Variant v);     // "plain_cnn", ...
std::string_view variant_display(Variant v);  // "CNN", "MCNN", "KCNN", "KMCNN"
Variant parse_variant(std::string_view s);

struct ModelConfig {
  std::size_t n = text::kDefaultSequenceLength;
  std::size_t dw = kWordDim;
  std::size_t dk = kKnowledgeDim;  // 0 disables the knowledge block
  std::size_t channels = 2;
  std::vector<std::size_t> filter_widths{1, 2, 3};
  std::size_t filters = 2048;
  // false: `filters` kernels per width. true: `filters` kernels in total,
  // split evenly across widths.
  bool filters_total = false;
  std::size_t hidden_dim = 100;
  double drop_rate = 0.5;
  double learning_rate = 1e-5;
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  OptimizerKind optimizer = OptimizerKind::adam;
  Activation activation = Activation::relu;
  std::uint64_t seed = 1;

  std::size_t k() const { return dw + dk; }
  std::size_t filters_per_width() const;
  std::size_t feature_width() const { return filter_widths.size() * filters_per_width(); }
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Every key understood by apply_key / to_key_values.
const std::vector<std::string>& model_config_keys();
// Returns false for keys that are not model keys; throws ConfigError on bad values.
bool apply_key(ModelConfig& cfg, std::string_view key, std::string_view value);
config::KeyValues to_key_values(const ModelConfig& cfg);
ModelConfig model_config_from(const config::KeyValues& kv, ModelConfig base = {});

// plain_cnn: 1 channel, no knowledge; mcnn: 2 channels, no knowledge;
// kcnn: 1 channel + knowledge; kmcnn: 2 channels + knowledge. Knowledge-on
// variants set dk = knowledge_dim.
ModelConfig ablation_variant(ModelConfig cfg, Variant variant, std::size_t knowledge_dim = kKnowledgeDim);

// Embedding rows re-indexed by vocabulary id / lexicon concept id so that
// building a document's input is pure indexing. Row 0 (padding) and the
// OOV row are zero, as are tokens or concepts missing from the tables.
struct InputTables {
  std::vector<nn::Tensor> words;  // per channel, |vocab| x dw
  nn::Tensor knowledge;           // (concepts + 1) x dk
  std::uint64_t hash = 0;         // over the aligned contents
};

InputTables align_tables(const text::Vocabulary& vocab, const text::ConceptLexicon& lex,
                         const embed::EmbeddingMatrix& channel1, const embed::EmbeddingMatrix& channel2,
                         const embed::EmbeddingMatrix& knowledge, const ModelConfig& cfg);

// One n x k matrix per channel: row i = word_c(token i) ++ knowledge(concept i).
std::vector<nn::Tensor> build_inputs(const text::EncodedDocument& doc, const InputTables& tables,
                                     const ModelConfig& cfg);
std::vector<nn::Tensor> build_inputs(const text::EncodedDocument& doc, const text::Vocabulary& vocab,
                                     const text::ConceptLexicon& lex, const embed::EmbeddingMatrix& channel1,
                                     const embed::EmbeddingMatrix& channel2,
                                     const embed::EmbeddingMatrix& knowledge, const ModelConfig& cfg);

class Model {
 public:
  // Forward activations needed by backward().
  struct Cache {
    const std::vector<nn::Tensor>* inputs = nullptr;
    std::vector<nn::Tensor> averaged;  // per width, pre-activation (n-h+1) x M
    std::vector<std::vector<std::size_t>> argmax;
    nn::Tensor features;
    nn::Tensor hidden_pre;
    nn::Tensor dropout_mask;
    nn::Tensor logits;
    nn::Tensor probabilities;

    // Argmax positions plus the sign of every activation input that feeds
    // the output; equal patterns mean the forward pass is on one smooth piece.
    std::vector<std::int64_t> pattern() const;
  };

  explicit Model(ModelConfig cfg);

  const ModelConfig& config() const { return cfg_; }
  std::vector<nn::Parameter*> parameters();
  std::vector<const nn::Parameter*> parameters() const;
  void zero_grad();

  // Class probabilities (negative, positive). In train mode the dropout mask
  // is drawn from rng unless fixed_mask is given.
  nn::Tensor forward(const std::vector<nn::Tensor>& inputs, nn::Mode mode, Rng* rng, Cache& cache,
                     const nn::Tensor* fixed_mask = nullptr) const;
  nn::Tensor forward(const std::vector<nn::Tensor>& inputs) const;

  // Accumulates parameter gradients of -log p(target); returns the loss.
  double backward(const Cache& cache, std::size_t target);

  // Positive-class probability in eval mode.
  double positive_score(const std::vector<nn::Tensor>& inputs) const;

 private:
  ModelConfig cfg_;
  std::vector<nn::Parameter> conv_filters_;
  std::vector<nn::Parameter> conv_bias_;
  nn::Parameter hidden_weight_, hidden_bias_, output_weight_, output_bias_;
};

struct CheckpointMeta {
  std::uint64_t vocab_hash = 0;
  std::uint64_t lexicon_hash = 0;
  std::uint64_t tables_hash = 0;

  bool operator==(const CheckpointMeta&) const = default;
};

struct Checkpoint {
  Model model;
  CheckpointMeta meta;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// "KMC1", u32 version, u64 length + config text, three u64 hashes, u32
// tensor count, then per tensor: u32 name length, name, u32 rank, u64 dims,
// little-endian float64 values. All integers little-endian.
void write_checkpoint(const Checkpoint& c, std::ostream& out);
Checkpoint read_checkpoint(std::istream& in);
void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

struct Example {
  std::string pmid;
  text::EncodedDocument doc;
  std::optional<text::Label> label;
};

std::vector<Example> encode_examples(std::span<const text::Document> docs, const text::Vocabulary& vocab,
                                     const text::ConceptLexicon& lex, std::size_t n);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  eval::Metrics validation;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<EpochRecord> history;
  std::size_t best_epoch = 0;  // 0 = initialization
};

// Mini-batch training; keeps the parameters of the epoch with the best
// validation F1 (the later epoch on ties).
TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  const ModelConfig& cfg, const InputTables& tables, CheckpointMeta meta = {});

// epoch,train_loss,val_precision,val_recall,val_f1
std::string history_csv(std::span<const EpochRecord> history);

std::vector<eval::Prediction> predict(const Model& model, std::span<const Example> examples,
                                      const InputTables& tables);
// Checks vocabulary and lexicon hashes against the checkpoint first.
std::vector<eval::Prediction> predict(const Checkpoint& checkpoint, std::span<const text::Document> docs,
                                      const text::Vocabulary& vocab, const text::ConceptLexicon& lex,
                                      const InputTables& tables);

// Full-model gradient check on one input and target with a fixed dropout
// mask. kink_hit reports that some perturbation changed the activation
// pattern, in which case the comparison is not meaningful.
struct ModelGradCheck {
  nn::GradCheckResult result;
  bool kink_hit = false;
};
ModelGradCheck grad_check(Model& model, const std::vector<nn::Tensor>& inputs, std::size_t target, Rng& rng,
                          double eps = nn::kGradCheckEps);

}  // namespace triage::kmcnn
