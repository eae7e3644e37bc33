#include "triage/kmcnn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <istream>
#include <memory>
#include <numeric>
#include <ostream>
#include <sstream>

#include "triage/error.hpp"
#include "triage/io.hpp"
#include "triage/nn/kernels.hpp"
#include "triage/nn/optim.hpp"

namespace triage::kmcnn {

using nn::Tensor;

std::string_view variant_name(Variant v) {
  switch (v) {
    case Variant::plain_cnn: return "plain_cnn";
    case Variant::mcnn: return "mcnn";
    case Variant::kcnn: return "kcnn";
    case Variant::kmcnn: break;
  }
  return "kmcnn";
}

std::string_view variant_display(Variant v) {
  switch (v) {
    case Variant::plain_cnn: return "CNN";
    case Variant::mcnn: return "MCNN";
    case Variant::kcnn: return "KCNN";
    case Variant::kmcnn: break;
  }
  return "KMCNN";
}

Variant parse_variant(std::string_view s) {
  for (auto v : {Variant::plain_cnn, Variant::mcnn, Variant::kcnn, Variant::kmcnn}) {
    if (s == variant_name(v)) return v;
  }
  throw ConfigError("unknown variant '" + std::string(s) + "' (expected plain_cnn, mcnn, kcnn or kmcnn)");
}

std::size_t ModelConfig::filters_per_width() const {
  if (!filters_total || filter_widths.empty()) return filters;
  return filters / filter_widths.size();
}

void ModelConfig::validate() const {
  if (n < 1) throw ConfigError("n must be >= 1");
  if (dw < 1) throw ConfigError("dw must be >= 1");
  if (channels != 1 && channels != 2) throw ConfigError("channels must be 1 or 2");
  if (filter_widths.empty()) throw ConfigError("filter_widths must not be empty");
  for (auto h : filter_widths) {
    if (h < 1 || h > n) throw ConfigError("filter width " + std::to_string(h) + " must be in [1, n]");
  }
  if (filters_per_width() < 1) throw ConfigError("at least one filter per width is required");
  if (hidden_dim < 1) throw ConfigError("hidden_dim must be >= 1");
  if (!(drop_rate >= 0.0 && drop_rate < 1.0)) throw ConfigError("drop_rate must be in [0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

const std::vector<std::string>& model_config_keys() {
  static const std::vector<std::string> keys{
      "activation", "batch_size", "channels",  "drop_rate", "dk",         "dw",        "epochs",
      "filter_widths", "filters", "filters_total", "hidden_dim", "learning_rate", "n", "optimizer", "seed"};
  return keys;
}

bool apply_key(ModelConfig& cfg, std::string_view key, std::string_view value) {
  using namespace config;
  if (key == "n") cfg.n = to_size(key, value);
  else if (key == "dw") cfg.dw = to_size(key, value);
  else if (key == "dk") cfg.dk = to_size(key, value);
  else if (key == "channels") cfg.channels = to_size(key, value);
  else if (key == "filter_widths") cfg.filter_widths = to_size_list(key, value);
  else if (key == "filters") cfg.filters = to_size(key, value);
  else if (key == "filters_total") cfg.filters_total = to_bool(key, value);
  else if (key == "hidden_dim") cfg.hidden_dim = to_size(key, value);
  else if (key == "drop_rate") cfg.drop_rate = to_double(key, value);
  else if (key == "learning_rate") cfg.learning_rate = to_double(key, value);
  else if (key == "epochs") cfg.epochs = to_size(key, value);
  else if (key == "batch_size") cfg.batch_size = to_size(key, value);
  else if (key == "seed") cfg.seed = to_u64(key, value);
  else if (key == "optimizer") {
    if (value == "adam") cfg.optimizer = OptimizerKind::adam;
    else if (value == "sgd") cfg.optimizer = OptimizerKind::sgd;
    else throw ConfigError("optimizer must be adam or sgd");
  } else if (key == "activation") {
    if (value == "relu") cfg.activation = Activation::relu;
    else if (value == "tanh") cfg.activation = Activation::tanh;
    else throw ConfigError("activation must be relu or tanh");
  } else {
    return false;
  }
  return true;
}

config::KeyValues to_key_values(const ModelConfig& cfg) {
  using config::from_double;
  return {{"activation", cfg.activation == Activation::relu ? "relu" : "tanh"},
          {"batch_size", std::to_string(cfg.batch_size)},
          {"channels", std::to_string(cfg.channels)},
          {"dk", std::to_string(cfg.dk)},
          {"drop_rate", from_double(cfg.drop_rate)},
          {"dw", std::to_string(cfg.dw)},
          {"epochs", std::to_string(cfg.epochs)},
          {"filter_widths", config::from_size_list(cfg.filter_widths)},
          {"filters", std::to_string(cfg.filters)},
          {"filters_total", cfg.filters_total ? "true" : "false"},
          {"hidden_dim", std::to_string(cfg.hidden_dim)},
          {"learning_rate", from_double(cfg.learning_rate)},
          {"n", std::to_string(cfg.n)},
          {"optimizer", cfg.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
          {"seed", std::to_string(cfg.seed)}};
}

ModelConfig model_config_from(const config::KeyValues& kv, ModelConfig base) {
  for (const auto& [k, v] : kv) {
    if (!apply_key(base, k, v)) throw ConfigError("unknown model config key '" + k + "'");
  }
  return base;
}

ModelConfig ablation_variant(ModelConfig cfg, Variant variant, std::size_t knowledge_dim) {
  const bool multi = variant == Variant::mcnn || variant == Variant::kmcnn;
  const bool knowledge = variant == Variant::kcnn || variant == Variant::kmcnn;
  cfg.channels = multi ? 2 : 1;
  cfg.dk = knowledge ? knowledge_dim : 0;
  return cfg;
}

namespace {

void hash_tensor(io::Fnv1a& h, const Tensor& t) {
  for (auto d : t.shape()) h.update_u64(d);
  for (double v : t.data()) h.update_u64(std::bit_cast<std::uint64_t>(v));
}

void copy_row(std::span<const float> src, std::span<double> dst) {
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i];
}

}  // namespace

InputTables align_tables(const text::Vocabulary& vocab, const text::ConceptLexicon& lex,
                         const embed::EmbeddingMatrix& channel1, const embed::EmbeddingMatrix& channel2,
                         const embed::EmbeddingMatrix& knowledge, const ModelConfig& cfg) {
  cfg.validate();
  InputTables t;
  const embed::EmbeddingMatrix* sources[2] = {&channel1, &channel2};
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    const auto& src = *sources[c];
    if (src.dim() != cfg.dw) {
      throw ConfigError("channel " + std::to_string(c + 1) + " vectors have dimension " + std::to_string(src.dim()) +
                        ", model expects dw = " + std::to_string(cfg.dw));
    }
    Tensor table = Tensor::matrix(vocab.size(), cfg.dw);
    for (std::uint32_t id = 2; id < vocab.size(); ++id) {
      if (auto row = src.find(vocab.token(id))) copy_row(src.row(*row), table.row(id));
    }
    t.words.push_back(std::move(table));
  }
  t.knowledge = Tensor::matrix(lex.concept_count() + 1, cfg.dk);
  if (cfg.dk > 0) {
    if (knowledge.dim() != cfg.dk) {
      throw ConfigError("knowledge vectors have dimension " + std::to_string(knowledge.dim()) +
                        ", model expects dk = " + std::to_string(cfg.dk));
    }
    for (std::uint32_t id = 1; id <= lex.concept_count(); ++id) {
      if (auto row = knowledge.find(lex.concept_key(id))) copy_row(knowledge.row(*row), t.knowledge.row(id));
    }
  }
  io::Fnv1a h;
  h.update("tables");
  for (const auto& w : t.words) hash_tensor(h, w);
  hash_tensor(h, t.knowledge);
  t.hash = h.digest();
  return t;
}

std::vector<Tensor> build_inputs(const text::EncodedDocument& doc, const InputTables& tables,
                                 const ModelConfig& cfg) {
  if (doc.token_ids.size() != cfg.n || doc.concept_ids.size() != cfg.n) {
    throw ShapeError("encoded document has length " + std::to_string(doc.token_ids.size()) + ", model expects n = " +
                     std::to_string(cfg.n));
  }
  if (tables.words.size() < cfg.channels) throw ConfigError("input tables have fewer channels than the model");
  if (cfg.dk > 0 && tables.knowledge.dim(1) != cfg.dk) throw ConfigError("knowledge table width != dk");
  std::vector<Tensor> out;
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    const Tensor& words = tables.words[c];
    if (words.dim(1) != cfg.dw) throw ConfigError("word table width != dw");
    Tensor x = Tensor::matrix(cfg.n, cfg.k());
    for (std::size_t i = 0; i < cfg.n; ++i) {
      const auto tok = doc.token_ids[i];
      if (tok == text::Vocabulary::kPad) continue;
      if (tok >= words.dim(0)) throw LookupError("token id " + std::to_string(tok) + " outside the vocabulary");
      auto dst = x.row(i);
      auto w = words.row(tok);
      std::copy(w.begin(), w.end(), dst.begin());
      if (cfg.dk > 0) {
        const auto concept_id = doc.concept_ids[i];
        if (concept_id >= tables.knowledge.dim(0)) {
          throw LookupError("concept id " + std::to_string(concept_id) + " outside the lexicon");
        }
        auto kv = tables.knowledge.row(concept_id);
        std::copy(kv.begin(), kv.end(), dst.begin() + static_cast<std::ptrdiff_t>(cfg.dw));
      }
    }
    out.push_back(std::move(x));
  }
  return out;
}

std::vector<Tensor> build_inputs(const text::EncodedDocument& doc, const text::Vocabulary& vocab,
                                 const text::ConceptLexicon& lex, const embed::EmbeddingMatrix& channel1,
                                 const embed::EmbeddingMatrix& channel2, const embed::EmbeddingMatrix& knowledge,
                                 const ModelConfig& cfg) {
  return build_inputs(doc, align_tables(vocab, lex, channel1, channel2, knowledge, cfg), cfg);
}

namespace {

Tensor activate(const Tensor& x, Activation a) {
  if (a == Activation::relu) return nn::relu(x);
  Tensor y = x;
  for (double& v : y.data()) v = std::tanh(v);
  return y;
}

Tensor activate_backward(const Tensor& pre, const Tensor& dy, Activation a) {
  if (a == Activation::relu) return nn::relu_backward(pre, dy);
  Tensor dx = dy;
  for (std::size_t i = 0; i < dx.size(); ++i) {
    const double t = std::tanh(pre[i]);
    dx[i] *= 1.0 - t * t;
  }
  return dx;
}

// Stream tag values for derive_seed.
constexpr std::uint64_t kInitStream = 0x494e4954;
constexpr std::uint64_t kShuffleStream = 0x53485546;
constexpr std::uint64_t kDropoutStream = 0x44524f50;

}  // namespace

std::vector<std::int64_t> Model::Cache::pattern() const {
  std::vector<std::int64_t> p;
  for (std::size_t w = 0; w < argmax.size(); ++w) {
    for (std::size_t m = 0; m < argmax[w].size(); ++m) {
      p.push_back(static_cast<std::int64_t>(argmax[w][m]));
      p.push_back(averaged[w].at(argmax[w][m], m) > 0.0);
    }
  }
  for (double v : hidden_pre.data()) p.push_back(v > 0.0);
  return p;
}

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(derive_seed(cfg_.seed, kInitStream));
  const std::size_t m = cfg_.filters_per_width();
  const std::size_t k = cfg_.k();
  for (auto h : cfg_.filter_widths) {
    const std::string prefix = "conv" + std::to_string(h);
    nn::Parameter f(prefix + ".filters", Tensor({m, h, k}));
    nn::glorot_uniform(f.value, h * k, h * m, rng);
    conv_filters_.push_back(std::move(f));
    conv_bias_.emplace_back(prefix + ".bias", Tensor::vector(m));
  }
  hidden_weight_ = nn::Parameter("hidden.weight", Tensor::matrix(cfg_.hidden_dim, cfg_.feature_width()));
  nn::glorot_uniform(hidden_weight_.value, cfg_.feature_width(), cfg_.hidden_dim, rng);
  hidden_bias_ = nn::Parameter("hidden.bias", Tensor::vector(cfg_.hidden_dim));
  output_weight_ = nn::Parameter("output.weight", Tensor::matrix(2, cfg_.hidden_dim));
  nn::glorot_uniform(output_weight_.value, cfg_.hidden_dim, 2, rng);
  output_bias_ = nn::Parameter("output.bias", Tensor::vector(2));
}

std::vector<nn::Parameter*> Model::parameters() {
  std::vector<nn::Parameter*> out;
  for (std::size_t i = 0; i < conv_filters_.size(); ++i) {
    out.push_back(&conv_filters_[i]);
    out.push_back(&conv_bias_[i]);
  }
  for (auto* p : {&hidden_weight_, &hidden_bias_, &output_weight_, &output_bias_}) out.push_back(p);
  return out;
}

std::vector<const nn::Parameter*> Model::parameters() const {
  auto mut = const_cast<Model*>(this)->parameters();
  return {mut.begin(), mut.end()};
}

void Model::zero_grad() {
  for (auto* p : parameters()) p->zero_grad();
}

Tensor Model::forward(const std::vector<Tensor>& inputs, nn::Mode mode, Rng* rng, Cache& cache,
                      const Tensor* fixed_mask) const {
  if (inputs.size() != cfg_.channels) {
    throw ShapeError("model expects " + std::to_string(cfg_.channels) + " channel inputs, got " +
                     std::to_string(inputs.size()));
  }
  for (const auto& x : inputs) {
    if (x.rank() != 2 || x.dim(0) != cfg_.n || x.dim(1) != cfg_.k()) {
      throw ShapeError("channel input " + nn::shape_string(x.shape()) + ", expected [" + std::to_string(cfg_.n) + "x" +
                       std::to_string(cfg_.k()) + "]");
    }
    nn::require_finite(x, "model input");
  }
  const std::size_t m = cfg_.filters_per_width();
  const double inv_channels = 1.0 / static_cast<double>(cfg_.channels);

  cache.inputs = &inputs;
  cache.averaged.clear();
  cache.argmax.clear();
  cache.features = Tensor::vector(cfg_.feature_width());
  for (std::size_t w = 0; w < conv_filters_.size(); ++w) {
    Tensor avg;
    for (std::size_t c = 0; c < inputs.size(); ++c) {
      Tensor map = nn::kernels::conv1d_forward(inputs[c], conv_filters_[w].value, conv_bias_[w].value);
      if (c == 0) {
        avg = std::move(map);
      } else {
        for (std::size_t i = 0; i < avg.size(); ++i) avg[i] += map[i];
      }
    }
    if (inputs.size() > 1) {
      for (double& v : avg.data()) v *= inv_channels;
    }
    auto pooled = nn::maxpool_over_time(activate(avg, cfg_.activation));
    std::copy(pooled.values.data().begin(), pooled.values.data().end(),
              cache.features.data().begin() + static_cast<std::ptrdiff_t>(w * m));
    cache.averaged.push_back(std::move(avg));
    cache.argmax.push_back(std::move(pooled.argmax));
  }

  cache.hidden_pre = nn::kernels::dense_forward(cache.features, hidden_weight_.value, hidden_bias_.value);
  Tensor hidden = activate(cache.hidden_pre, cfg_.activation);
  if (mode == nn::Mode::train && fixed_mask) {
    if (!fixed_mask->same_shape(hidden)) throw ShapeError("dropout mask shape mismatch");
    cache.dropout_mask = *fixed_mask;
  } else if (mode == nn::Mode::train) {
    if (!rng) throw StateError("train-mode forward needs a random stream for dropout");
    cache.dropout_mask = nn::dropout(hidden, cfg_.drop_rate, mode, *rng).mask;
  } else {
    cache.dropout_mask = Tensor(hidden.shape(), 1.0);
  }
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] *= cache.dropout_mask[i];
  cache.logits = nn::kernels::dense_forward(hidden, output_weight_.value, output_bias_.value);
  cache.probabilities = nn::softmax(cache.logits);
  return cache.probabilities;
}

Tensor Model::forward(const std::vector<Tensor>& inputs) const {
  Cache cache;
  return forward(inputs, nn::Mode::eval, nullptr, cache);
}

double Model::backward(const Cache& cache, std::size_t target) {
  if (!cache.inputs || cache.probabilities.empty()) throw StateError("model backward called before forward");
  const auto& inputs = *cache.inputs;
  const double loss = nn::softmax_xent(cache.logits, target);
  const Tensor dlogits = nn::softmax_xent_backward(cache.probabilities, target);

  Tensor hidden = activate(cache.hidden_pre, cfg_.activation);
  for (std::size_t i = 0; i < hidden.size(); ++i) hidden[i] *= cache.dropout_mask[i];
  Tensor dhidden =
      nn::kernels::dense_backward(hidden, output_weight_.value, dlogits, output_weight_.grad, output_bias_.grad);
  dhidden = nn::dropout_backward(cache.dropout_mask, dhidden);
  const Tensor dpre = activate_backward(cache.hidden_pre, dhidden, cfg_.activation);
  const Tensor dfeatures =
      nn::kernels::dense_backward(cache.features, hidden_weight_.value, dpre, hidden_weight_.grad, hidden_bias_.grad);

  const std::size_t m = cfg_.filters_per_width();
  const double inv_channels = 1.0 / static_cast<double>(inputs.size());
  for (std::size_t w = 0; w < conv_filters_.size(); ++w) {
    Tensor dpool = Tensor::vector(m);
    for (std::size_t j = 0; j < m; ++j) dpool[j] = dfeatures[w * m + j];
    const Tensor dact = nn::maxpool_backward(cache.argmax[w], cache.averaged[w].dim(0), dpool);
    Tensor dmap = activate_backward(cache.averaged[w], dact, cfg_.activation);
    if (inputs.size() > 1) {
      for (double& v : dmap.data()) v *= inv_channels;
    }
    for (const auto& x : inputs) nn::kernels::conv1d_backward_params(x, dmap, conv_filters_[w].grad, conv_bias_[w].grad);
  }
  return loss;
}

double Model::positive_score(const std::vector<Tensor>& inputs) const { return forward(inputs)[1]; }

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  void bytes(void* dst, std::size_t n, const char* what) {
    in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(in_.gcount()) != n) {
      throw FormatError(std::string("checkpoint truncated while reading ") + what);
    }
  }
  std::uint32_t u32(const char* what) {
    unsigned char b[4];
    bytes(b, 4, what);
    std::uint32_t v = 0;
    for (int i = 3; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::uint64_t u64(const char* what) {
    unsigned char b[8];
    bytes(b, 8, what);
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
    return v;
  }
  std::string str(std::uint64_t n, const char* what) {
    if (n > (1u << 24)) throw FormatError(std::string("checkpoint ") + what + " length is implausible");
    std::string s(n, '\0');
    bytes(s.data(), n, what);
    return s;
  }

 private:
  std::istream& in_;
};

constexpr char kMagic[4] = {'K', 'M', 'C', '1'};

}  // namespace

void write_checkpoint(const Checkpoint& c, std::ostream& out) {
  out.write(kMagic, 4);
  put_u32(out, kCheckpointVersion);
  const std::string cfg_text = config::render_key_values(to_key_values(c.model.config()));
  put_u64(out, cfg_text.size());
  out.write(cfg_text.data(), static_cast<std::streamsize>(cfg_text.size()));
  put_u64(out, c.meta.vocab_hash);
  put_u64(out, c.meta.lexicon_hash);
  put_u64(out, c.meta.tables_hash);
  const auto params = c.model.parameters();
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->value.rank()));
    for (auto d : p->value.shape()) put_u64(out, d);
    for (double v : p->value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
}

Checkpoint read_checkpoint(std::istream& in) {
  Reader r(in);
  char magic[4];
  r.bytes(magic, 4, "magic bytes");
  if (std::memcmp(magic, kMagic, 4) != 0) throw FormatError("not a KMCNN checkpoint (bad magic bytes)");
  const auto version = r.u32("version");
  if (version != kCheckpointVersion) {
    throw FormatError("unsupported checkpoint version " + std::to_string(version) + " (this build reads version " +
                      std::to_string(kCheckpointVersion) + ")");
  }
  const auto cfg_text = r.str(r.u64("config length"), "config block");
  ModelConfig cfg;
  try {
    cfg = model_config_from(config::parse_key_values(cfg_text, "checkpoint config"));
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint config block: ") + e.what());
  }
  CheckpointMeta meta;
  meta.vocab_hash = r.u64("vocabulary hash");
  meta.lexicon_hash = r.u64("lexicon hash");
  meta.tables_hash = r.u64("tables hash");

  Checkpoint c{Model(cfg), meta};
  auto params = c.model.parameters();
  const auto count = r.u32("tensor count");
  if (count != params.size()) {
    throw FormatError("checkpoint has " + std::to_string(count) + " tensors, config implies " +
                      std::to_string(params.size()));
  }
  for (auto* p : params) {
    const auto name = r.str(r.u32("tensor name length"), "tensor name");
    if (name != p->name) throw FormatError("checkpoint tensor '" + name + "' where '" + p->name + "' was expected");
    const auto rank = r.u32("tensor rank");
    std::vector<std::size_t> shape;
    for (std::uint32_t i = 0; i < rank; ++i) shape.push_back(r.u64("tensor shape"));
    if (shape != p->value.shape()) {
      throw FormatError("checkpoint tensor '" + name + "' has shape " + nn::shape_string(shape) + ", expected " +
                        nn::shape_string(p->value.shape()));
    }
    for (double& v : p->value.data()) v = std::bit_cast<double>(r.u64("tensor data"));
  }
  return c;
}

void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  auto out = io::open_output(path, true);
  write_checkpoint(c, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  auto in = io::open_input(path, true);
  return read_checkpoint(in);
}

std::vector<Example> encode_examples(std::span<const text::Document> docs, const text::Vocabulary& vocab,
                                     const text::ConceptLexicon& lex, std::size_t n) {
  std::vector<Example> out;
  out.reserve(docs.size());
  for (const auto& d : docs) out.push_back({d.pmid, text::encode(d, vocab, lex, n), d.label});
  return out;
}

std::vector<eval::Prediction> predict(const Model& model, std::span<const Example> examples,
                                      const InputTables& tables) {
  std::vector<eval::Prediction> out;
  out.reserve(examples.size());
  for (const auto& e : examples) {
    const double score = model.positive_score(build_inputs(e.doc, tables, model.config()));
    out.push_back({e.pmid, score >= 0.5 ? text::Label::positive : text::Label::negative, score});
  }
  return out;
}

std::vector<eval::Prediction> predict(const Checkpoint& checkpoint, std::span<const text::Document> docs,
                                      const text::Vocabulary& vocab, const text::ConceptLexicon& lex,
                                      const InputTables& tables) {
  if (vocab.hash() != checkpoint.meta.vocab_hash) {
    throw CompatibilityError("vocabulary does not match the one the checkpoint was trained with");
  }
  if (lex.hash() != checkpoint.meta.lexicon_hash) {
    throw CompatibilityError("concept lexicon does not match the one the checkpoint was trained with");
  }
  if (tables.hash != checkpoint.meta.tables_hash) {
    throw CompatibilityError("embedding tables do not match the ones the checkpoint was trained with");
  }
  const auto examples = encode_examples(docs, vocab, lex, checkpoint.model.config().n);
  return predict(checkpoint.model, examples, tables);
}

namespace {

eval::Metrics evaluate(const Model& model, std::span<const Example> examples, const InputTables& tables) {
  const auto preds = predict(model, examples, tables);
  std::vector<text::Label> p, g;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    p.push_back(preds[i].label);
    g.push_back(*examples[i].label);
  }
  return eval::precision_recall_f1(eval::confusion(std::span<const text::Label>(p), std::span<const text::Label>(g)));
}

}  // namespace

TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  const ModelConfig& cfg, const InputTables& tables, CheckpointMeta meta) {
  cfg.validate();
  if (train_set.empty()) throw DataError("training set is empty");
  bool seen[2] = {false, false};
  for (const auto* set : {&train_set, &validation_set}) {
    for (const auto& e : *set) {
      if (!e.label) throw DataError("document " + e.pmid + " has no label");
    }
  }
  for (const auto& e : train_set) seen[static_cast<int>(*e.label)] = true;
  if (!seen[0] || !seen[1]) throw DataError("training set contains a single label; both classes are required");

  Model model(cfg);
  TrainResult result{Checkpoint{model, meta}, {}, 0};
  if (cfg.epochs == 0) return result;

  std::unique_ptr<nn::Optimizer> optimizer;
  if (cfg.optimizer == OptimizerKind::adam) {
    optimizer = std::make_unique<nn::Adam>(nn::AdamConfig{.learning_rate = cfg.learning_rate});
  } else {
    optimizer = std::make_unique<nn::Sgd>(cfg.learning_rate);
  }
  const auto params = model.parameters();
  Rng shuffle_rng(derive_seed(cfg.seed, kShuffleStream));
  Rng dropout_rng(derive_seed(cfg.seed, kDropoutStream));
  std::vector<std::size_t> order(train_set.size());
  double best_f1 = -1.0;
  Model::Cache cache;

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      model.zero_grad();
      for (std::size_t b = start; b < end; ++b) {
        const Example& ex = train_set[order[b]];
        const auto inputs = build_inputs(ex.doc, tables, cfg);
        model.forward(inputs, nn::Mode::train, &dropout_rng, cache);
        loss_sum += model.backward(cache, static_cast<std::size_t>(*ex.label));
      }
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto* p : params) {
        for (double& g : p->grad.data()) g *= scale;
      }
      optimizer->step(params);
    }
    EpochRecord rec{epoch, loss_sum / static_cast<double>(train_set.size()), {}};
    if (!validation_set.empty()) rec.validation = evaluate(model, validation_set, tables);
    result.history.push_back(rec);
    if (rec.validation.f1 >= best_f1) {
      best_f1 = rec.validation.f1;
      result.best_epoch = epoch;
      result.checkpoint.model = model;
    }
  }
  return result;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::string out = "epoch,train_loss,val_precision,val_recall,val_f1\n";
  char buf[160];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%zu,%.9f,%s,%s,%s\n", r.epoch, r.train_loss,
                  eval::format_percent(r.validation.precision).c_str(), eval::format_percent(r.validation.recall).c_str(),
                  eval::format_percent(r.validation.f1).c_str());
    out += buf;
  }
  return out;
}

ModelGradCheck grad_check(Model& model, const std::vector<Tensor>& inputs, std::size_t target, Rng& rng, double eps) {
  Model::Cache cache;
  model.forward(inputs, nn::Mode::train, &rng, cache);
  const Tensor mask = cache.dropout_mask;
  const auto base_pattern = cache.pattern();

  model.zero_grad();
  model.forward(inputs, nn::Mode::train, nullptr, cache, &mask);
  model.backward(cache, target);

  ModelGradCheck out;
  auto loss = [&] {
    Model::Cache c;
    model.forward(inputs, nn::Mode::train, nullptr, c, &mask);
    if (c.pattern() != base_pattern) out.kink_hit = true;
    return nn::softmax_xent(c.logits, target);
  };
  for (auto* p : model.parameters()) {
    const Tensor analytic = p->grad;
    out.result.merge(nn::check_coordinates(loss, p->value.data(), analytic.data(), p->name, eps));
  }
  return out;
}

}  // namespace triage::kmcnn
