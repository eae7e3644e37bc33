#include <cmath>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"
#include "triage/error.hpp"
#include "triage/io.hpp"
#include "triage/kmcnn.hpp"
#include "triage/synthetic.hpp"

using namespace triage;
using namespace triage::kmcnn;
using nn::Tensor;

namespace {

ModelConfig tiny(std::size_t channels = 2, std::size_t dk = 3) {
  ModelConfig cfg;
  cfg.n = 9;
  cfg.dw = 4;
  cfg.dk = dk;
  cfg.channels = channels;
  cfg.filters = 3;
  cfg.hidden_dim = 5;
  cfg.seed = 17;
  return cfg;
}

std::vector<Tensor> random_inputs(const ModelConfig& cfg, Rng& rng) {
  std::vector<Tensor> out;
  for (std::size_t c = 0; c < cfg.channels; ++c) {
    Tensor x({cfg.n, cfg.k()});
    for (auto& v : x.data()) v = rng.uniform(-1, 1);
    out.push_back(std::move(x));
  }
  return out;
}

double act(double v, Activation a) { return a == Activation::relu ? std::max(0.0, v) : std::tanh(v); }

// Eval-mode forward written as straight loops over the parameter list.
std::vector<double> oracle_forward(const Model& model, const std::vector<Tensor>& xs) {
  const auto& cfg = model.config();
  const auto params = model.parameters();
  const std::size_t m = cfg.filters_per_width(), k = cfg.k();
  std::vector<double> features;
  for (std::size_t w = 0; w < cfg.filter_widths.size(); ++w) {
    const std::size_t h = cfg.filter_widths[w];
    const Tensor& f = params[2 * w]->value;
    const Tensor& b = params[2 * w + 1]->value;
    for (std::size_t j = 0; j < m; ++j) {
      double best = -INFINITY;
      for (std::size_t i = 0; i + h <= cfg.n; ++i) {
        double avg = 0;
        for (const auto& x : xs) {
          double s = b[j];
          for (std::size_t r = 0; r < h; ++r) {
            for (std::size_t c = 0; c < k; ++c) s += x[(i + r) * k + c] * f[(j * h + r) * k + c];
          }
          avg += s / static_cast<double>(xs.size());
        }
        best = std::max(best, act(avg, cfg.activation));
      }
      features.push_back(best);
    }
  }
  const std::size_t base = 2 * cfg.filter_widths.size();
  const Tensor& hw = params[base]->value;
  const Tensor& hb = params[base + 1]->value;
  const Tensor& ow = params[base + 2]->value;
  const Tensor& ob = params[base + 3]->value;
  std::vector<double> hidden(cfg.hidden_dim);
  for (std::size_t o = 0; o < cfg.hidden_dim; ++o) {
    double s = hb[o];
    for (std::size_t i = 0; i < features.size(); ++i) s += hw.at(o, i) * features[i];
    hidden[o] = act(s, cfg.activation);
  }
  double logits[2];
  for (std::size_t o = 0; o < 2; ++o) {
    logits[o] = ob[o];
    for (std::size_t i = 0; i < hidden.size(); ++i) logits[o] += ow.at(o, i) * hidden[i];
  }
  const double mx = std::max(logits[0], logits[1]);
  const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
  return {e0 / (e0 + e1), e1 / (e0 + e1)};
}

embed::EmbeddingMatrix knowledge_for(const text::ConceptLexicon& lex, std::size_t dim, std::uint64_t seed) {
  embed::EmbeddingMatrix m(dim);
  Rng rng(seed);
  for (const auto& key : lex.concept_keys()) {
    std::vector<float> v(dim);
    for (auto& x : v) x = static_cast<float>(rng.uniform(-0.5, 0.5));
    m.add(key, v);
  }
  return m;
}

struct Fixture {
  synthetic::Dataset data;
  text::Vocabulary vocab;
  text::ConceptLexicon lex;
  embed::EmbeddingMatrix knowledge;
  ModelConfig cfg;
  InputTables tables;
  std::vector<Example> train, val;

  explicit Fixture(std::size_t documents = 60) {
    synthetic::Config sc;
    sc.documents = documents;
    sc.length = 24;
    data = synthetic::generate(sc);
    std::vector<text::Document> tr(data.documents.begin(), data.documents.begin() + documents * 4 / 5);
    std::vector<text::Document> va(data.documents.begin() + documents * 4 / 5, data.documents.end());
    vocab = text::build_vocab(tr, 1);
    lex = data.lexicon();
    knowledge = knowledge_for(lex, 4, 3);
    cfg.n = 24;
    cfg.dw = sc.dim;
    cfg.dk = 4;
    cfg.filters = 6;
    cfg.hidden_dim = 8;
    cfg.learning_rate = 1e-3;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    tables = align_tables(vocab, lex, data.channel1, data.channel2, knowledge, cfg);
    train = encode_examples(tr, vocab, lex, cfg.n);
    val = encode_examples(va, vocab, lex, cfg.n);
  }

  CheckpointMeta meta() const { return {vocab.hash(), lex.hash(), tables.hash}; }
};

std::string bytes_of(const Checkpoint& c) {
  std::ostringstream out;
  write_checkpoint(c, out);
  return out.str();
}

}  // namespace

TEST_CASE("forward matches the straight-loop oracle") {
  Rng rng(1);
  for (auto activation : {Activation::relu, Activation::tanh}) {
    for (std::size_t channels : {1u, 2u}) {
      auto cfg = tiny(channels);
      cfg.activation = activation;
      const Model model(cfg);
      for (int trial = 0; trial < 20; ++trial) {
        const auto xs = random_inputs(cfg, rng);
        const auto p = model.forward(xs);
        const auto expect = oracle_forward(model, xs);
        CHECK(std::abs(p[0] - expect[0]) < 1e-9);
        CHECK(std::abs(p[1] - expect[1]) < 1e-9);
        CHECK(p[0] + p[1] == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("identical channels collapse to the single-channel model") {
  Rng rng(2);
  const auto two = tiny(2);
  const auto one = tiny(1);
  const Model a(two), b(one);
  for (int trial = 0; trial < 200; ++trial) {
    const auto single = random_inputs(one, rng);
    const std::vector<Tensor> doubled{single[0], single[0]};
    const auto pa = a.forward(doubled);
    const auto pb = b.forward(single);
    CHECK(std::abs(pa[1] - pb[1]) < 1e-9);
  }
}

TEST_CASE("all-zero input gives a valid distribution") {
  const auto cfg = tiny();
  const Model model(cfg);
  const std::vector<Tensor> zeros(2, Tensor({cfg.n, cfg.k()}));
  const auto p = model.forward(zeros);
  CHECK(std::isfinite(p[0]));
  CHECK(p[0] + p[1] == doctest::Approx(1.0));
}

TEST_CASE("forward rejects malformed input") {
  const auto cfg = tiny();
  const Model model(cfg);
  CHECK_THROWS_AS(model.forward({Tensor({cfg.n, cfg.k()})}), ShapeError);
  CHECK_THROWS_AS(model.forward(std::vector<Tensor>(2, Tensor({cfg.n + 1, cfg.k()}))), ShapeError);
  std::vector<Tensor> nan(2, Tensor({cfg.n, cfg.k()}));
  nan[1][3] = NAN;
  CHECK_THROWS_AS(model.forward(nan), DataError);
  Model::Cache cache;
  CHECK_THROWS_AS(model.forward(std::vector<Tensor>(2, Tensor({cfg.n, cfg.k()})), nn::Mode::train, nullptr, cache),
                  StateError);
  Model mutable_model(cfg);
  CHECK_THROWS_AS(mutable_model.backward(Model::Cache{}, 0), StateError);
}

TEST_CASE("parameter layout") {
  auto cfg = tiny();
  cfg.filters_total = false;
  const Model model(cfg);
  const auto params = model.parameters();
  REQUIRE(params.size() == 10);
  CHECK(params[0]->name == "conv1.filters");
  CHECK(params[0]->value.shape() == std::vector<std::size_t>{3, 1, 7});
  CHECK(params[5]->name == "conv3.bias");
  CHECK(params[6]->value.shape() == std::vector<std::size_t>{5, 9});
  CHECK(params[8]->value.shape() == std::vector<std::size_t>{2, 5});

  cfg.filters = 6;
  cfg.filters_total = true;
  CHECK(cfg.filters_per_width() == 2);
  CHECK(cfg.feature_width() == 6);
}

TEST_CASE("config validation") {
  auto cfg = tiny();
  cfg.channels = 3;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.filter_widths = {10};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.drop_rate = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.learning_rate = 0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg = tiny();
  cfg.filters = 2;
  cfg.filters_total = true;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_NOTHROW(ModelConfig{}.validate());
}

TEST_CASE("config key round trip") {
  auto cfg = tiny();
  cfg.activation = Activation::tanh;
  cfg.optimizer = OptimizerKind::sgd;
  cfg.learning_rate = 1e-5;
  cfg.filter_widths = {2, 4};
  const auto kv = to_key_values(cfg);
  CHECK(kv.size() == model_config_keys().size());
  CHECK(model_config_from(kv) == cfg);
  CHECK(model_config_from(config::parse_key_values(config::render_key_values(kv))) == cfg);
  CHECK_THROWS_AS(model_config_from({{"bogus", "1"}}), ConfigError);
  ModelConfig c;
  CHECK_THROWS_AS(apply_key(c, "optimizer", "rmsprop"), ConfigError);
  CHECK_THROWS_AS(apply_key(c, "n", "-3"), ConfigError);
  CHECK_FALSE(apply_key(c, "variant", "kmcnn"));
}

TEST_CASE("ablation variants") {
  const ModelConfig base;
  CHECK(ablation_variant(base, Variant::kmcnn) == base);
  const auto plain = ablation_variant(base, Variant::plain_cnn);
  CHECK(plain.channels == 1);
  CHECK(plain.dk == 0);
  const auto mcnn = ablation_variant(base, Variant::mcnn);
  CHECK(mcnn.channels == 2);
  CHECK(mcnn.dk == 0);
  const auto kcnn = ablation_variant(base, Variant::kcnn, 12);
  CHECK(kcnn.channels == 1);
  CHECK(kcnn.dk == 12);
  for (auto v : {Variant::plain_cnn, Variant::mcnn, Variant::kcnn, Variant::kmcnn}) {
    CHECK(ablation_variant(ablation_variant(base, v), v) == ablation_variant(base, v));
    CHECK(parse_variant(variant_name(v)) == v);
  }
  CHECK(variant_display(Variant::plain_cnn) == "CNN");
  CHECK_THROWS_AS(parse_variant("rnn"), ConfigError);
}

TEST_CASE("build_inputs concatenates word and knowledge rows") {
  std::vector<text::Document> docs(1);
  docs[0].pmid = "1";
  docs[0].title = "brca1 breast cancer risk";
  const auto vocab = text::build_vocab(docs, 1);
  const std::vector<std::pair<std::string, std::string>> entries{{"breast cancer", "C1"}};
  const text::ConceptLexicon lex(entries);
  embed::EmbeddingMatrix w1(2), w2(2), kn(3);
  w1.add("brca1", std::vector<float>{1, 2});
  w1.add("cancer", std::vector<float>{3, 4});
  w2.add("brca1", std::vector<float>{5, 6});
  kn.add("C1", std::vector<float>{7, 8, 9});
  ModelConfig cfg;
  cfg.n = 6;
  cfg.dw = 2;
  cfg.dk = 3;
  cfg.filter_widths = {1};
  const auto enc = text::encode(docs[0], vocab, lex, cfg.n);
  const auto xs = build_inputs(enc, vocab, lex, w1, w2, kn, cfg);
  REQUIRE(xs.size() == 2);
  CHECK(xs[0].shape() == std::vector<std::size_t>{6, 5});
  CHECK(std::vector<double>(xs[0].row(0).begin(), xs[0].row(0).end()) == std::vector<double>{1, 2, 0, 0, 0});
  CHECK(std::vector<double>(xs[0].row(1).begin(), xs[0].row(1).end()) == std::vector<double>{0, 0, 7, 8, 9});
  CHECK(std::vector<double>(xs[0].row(2).begin(), xs[0].row(2).end()) == std::vector<double>{3, 4, 7, 8, 9});
  CHECK(std::vector<double>(xs[1].row(0).begin(), xs[1].row(0).end()) == std::vector<double>{5, 6, 0, 0, 0});
  for (std::size_t r = 4; r < 6; ++r) {
    for (double v : xs[0].row(r)) CHECK(v == 0.0);
  }

  cfg.dk = 0;
  cfg.channels = 1;
  const auto plain = build_inputs(enc, vocab, lex, w1, w2, kn, cfg);
  CHECK(plain.size() == 1);
  CHECK(plain[0].dim(1) == 2);

  cfg.dw = 3;
  CHECK_THROWS_AS(build_inputs(enc, vocab, lex, w1, w2, kn, cfg), ConfigError);
  cfg.dw = 2;
  CHECK_THROWS_AS(build_inputs(text::encode(docs[0], vocab, lex, 5), vocab, lex, w1, w2, kn, cfg), ShapeError);
}

TEST_CASE("checkpoint round trip is bit exact") {
  auto cfg = tiny();
  cfg.learning_rate = 3.3e-7;
  Checkpoint c{Model(cfg), CheckpointMeta{1, 2, 3}};
  auto params = c.model.parameters();
  params[1]->value[0] = -0.0;
  params[1]->value[1] = 1.0 / 3.0;
  params[1]->value[2] = std::nextafter(1.0, 2.0);
  const auto bytes = bytes_of(c);
  CHECK(bytes.substr(0, 4) == "KMC1");
  std::istringstream in(bytes);
  const auto back = read_checkpoint(in);
  CHECK(back.meta == c.meta);
  CHECK(back.model.config() == cfg);
  const auto pb = back.model.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i]->value.size(); ++j) {
      CHECK(std::bit_cast<std::uint64_t>(pb[i]->value[j]) == std::bit_cast<std::uint64_t>(params[i]->value[j]));
    }
  }
  CHECK(bytes_of(back) == bytes);

  testing::TempDir dir("ckpt");
  save_checkpoint(c, dir / "m.kmc");
  CHECK(bytes_of(load_checkpoint(dir / "m.kmc")) == bytes);
}

TEST_CASE("corrupt checkpoints are format errors") {
  const Checkpoint c{Model(tiny()), {}};
  const auto bytes = bytes_of(c);
  for (std::size_t cut : {std::size_t{0}, std::size_t{3}, std::size_t{10}, bytes.size() / 2, bytes.size() - 1}) {
    std::istringstream in(bytes.substr(0, cut));
    CHECK_THROWS_AS(read_checkpoint(in), FormatError);
  }
  auto magic = bytes;
  magic[0] = 'X';
  std::istringstream bad_magic(magic);
  CHECK_THROWS_AS(read_checkpoint(bad_magic), FormatError);
  auto version = bytes;
  version[4] = static_cast<char>(kCheckpointVersion + 1);
  std::istringstream bad_version(version);
  CHECK_THROWS_AS(read_checkpoint(bad_version), FormatError);
  CHECK_THROWS_AS(load_checkpoint("/nonexistent/m.kmc"), IoError);
}

TEST_CASE("training is deterministic and keeps history") {
  Fixture f;
  const auto a = train(f.train, f.val, f.cfg, f.tables, f.meta());
  const auto b = train(f.train, f.val, f.cfg, f.tables, f.meta());
  CHECK(a.history.size() == 3);
  CHECK(history_csv(a.history) == history_csv(b.history));
  CHECK(bytes_of(a.checkpoint) == bytes_of(b.checkpoint));
  CHECK(a.best_epoch >= 1);
  CHECK(history_csv(a.history).rfind("epoch,train_loss,val_precision,val_recall,val_f1\n", 0) == 0);
  for (const auto& r : a.history) CHECK(std::isfinite(r.train_loss));

  auto other = f.cfg;
  other.seed = 99;
  CHECK(bytes_of(train(f.train, f.val, other, f.tables, f.meta()).checkpoint) != bytes_of(a.checkpoint));
}

TEST_CASE("training loss goes down") {
  Fixture f;
  f.cfg.epochs = 8;
  f.cfg.drop_rate = 0.0;
  const auto r = train(f.train, f.val, f.cfg, f.tables);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
}

TEST_CASE("zero epochs returns the initial model") {
  Fixture f;
  f.cfg.epochs = 0;
  const auto r = train(f.train, f.val, f.cfg, f.tables, f.meta());
  CHECK(r.history.empty());
  CHECK(r.best_epoch == 0);
  CHECK(history_csv(r.history) == "epoch,train_loss,val_precision,val_recall,val_f1\n");
  CHECK(bytes_of(r.checkpoint) == bytes_of(Checkpoint{Model(f.cfg), f.meta()}));
}

TEST_CASE("training data errors") {
  Fixture f;
  CHECK_THROWS_AS(train({}, f.val, f.cfg, f.tables), DataError);
  std::vector<Example> single;
  for (const auto& e : f.train) {
    if (e.label == text::Label::positive) single.push_back(e);
  }
  CHECK_THROWS_AS(train(single, f.val, f.cfg, f.tables), DataError);
  auto unlabeled = f.train;
  unlabeled[0].label.reset();
  CHECK_THROWS_AS(train(unlabeled, f.val, f.cfg, f.tables), DataError);
}

TEST_CASE("predict checks compatibility and handles empty documents") {
  Fixture f;
  const Checkpoint c{Model(f.cfg), f.meta()};
  std::vector<text::Document> docs(1);
  docs[0].pmid = "empty";
  const auto preds = predict(c, docs, f.vocab, f.lex, f.tables);
  REQUIRE(preds.size() == 1);
  CHECK(preds[0].score >= 0.0);
  CHECK(preds[0].score <= 1.0);
  CHECK((preds[0].label == text::Label::positive) == (preds[0].score >= 0.5));

  auto other_vocab = f.vocab;
  other_vocab.add("zzz-new-token", 1);
  CHECK_THROWS_AS(predict(c, docs, other_vocab, f.lex, f.tables), CompatibilityError);
  auto other_tables = f.tables;
  other_tables.hash ^= 1;
  CHECK_THROWS_AS(predict(c, docs, f.vocab, f.lex, other_tables), CompatibilityError);
  const std::vector<std::pair<std::string, std::string>> entries{{"x", "C1"}};
  CHECK_THROWS_AS(predict(c, docs, f.vocab, text::ConceptLexicon(entries), f.tables), CompatibilityError);
}

TEST_CASE("align_tables hash follows content") {
  Fixture f;
  const auto again = align_tables(f.vocab, f.lex, f.data.channel1, f.data.channel2, f.knowledge, f.cfg);
  CHECK(again.hash == f.tables.hash);
  const auto other = align_tables(f.vocab, f.lex, f.data.channel1, f.data.channel2, knowledge_for(f.lex, 4, 4), f.cfg);
  CHECK(other.hash != f.tables.hash);
  CHECK(f.tables.words[0].dim(0) == f.vocab.size());
  for (double v : f.tables.words[0].row(0)) CHECK(v == 0.0);
  for (double v : f.tables.words[0].row(1)) CHECK(v == 0.0);
  CHECK(f.tables.knowledge.dim(0) == f.lex.concept_count() + 1);
}

TEST_CASE("full-model gradient check") {
  auto cfg = tiny();
  cfg.n = 16;
  cfg.dw = 8;
  cfg.dk = 4;
  cfg.filters = 4;
  cfg.hidden_dim = 8;
  Rng rng(5);
  int checked = 0;
  for (int trial = 0; trial < 20 && checked < 10; ++trial) {
    cfg.seed = static_cast<std::uint64_t>(trial);
    Model model(cfg);
    const auto xs = random_inputs(cfg, rng);
    const auto r = grad_check(model, xs, static_cast<std::size_t>(trial % 2), rng);
    if (r.kink_hit) continue;
    ++checked;
    CHECK(r.result.passed());
  }
  CHECK(checked == 10);
}
