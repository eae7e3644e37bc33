#include "triage/cli.hpp"

#include <omp.h>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "triage/config.hpp"
#include "triage/datasets.hpp"
#include "triage/embed.hpp"
#include "triage/error.hpp"
#include "triage/eval.hpp"
#include "triage/gradcheck_suite.hpp"
#include "triage/io.hpp"
#include "triage/kg.hpp"
#include "triage/kmcnn.hpp"
#include "triage/synthetic.hpp"
#include "triage/text.hpp"

namespace triage::cli {

namespace fs = std::filesystem;

namespace {

class GradCheckFailed : public Error {
 public:
  using Error::Error;
};

// Tunable parameters of one subcommand. Values resolve as defaults, then the
// --config file, then --set pairs, then dedicated flags. Keys outside the
// declared set are rejected.
class Params {
 public:
  explicit Params(CLI::App* app) : app_(app) {
    app_->add_option("--config", config_file_, "key = value file; flags take precedence");
    app_->add_option("--set", sets_, "override one parameter, key=value (repeatable)");
  }

  void key(const std::string& name, std::string default_value, const std::string& help) {
    std::string flag = "--" + name;
    std::replace(flag.begin(), flag.end(), '_', '-');
    key(name, flag, std::move(default_value), help);
  }

  void key(const std::string& name, const std::string& flag, std::string default_value, const std::string& help) {
    app_->add_option_function<std::string>(
        flag, [this, name](const std::string& v) { flags_[name] = v; },
        help + " [" + name + ", default " + default_value + "]");
    defaults_[name] = std::move(default_value);
  }

  config::KeyValues resolve() const {
    config::KeyValues kv = defaults_;
    auto overlay = [&](const std::string& k, const std::string& v, const std::string& where) {
      if (!defaults_.count(k)) throw ConfigError("unknown key '" + k + "' in " + where);
      kv[k] = v;
    };
    if (!config_file_.empty()) {
      for (const auto& [k, v] : config::parse_key_values(io::read_file(config_file_), config_file_)) {
        overlay(k, v, config_file_);
      }
    }
    for (const auto& s : sets_) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
      overlay(std::string(io::trim(std::string_view(s).substr(0, eq))),
              std::string(io::trim(std::string_view(s).substr(eq + 1))), "--set");
    }
    for (const auto& [k, v] : flags_) kv[k] = v;
    return kv;
  }

 private:
  CLI::App* app_;
  config::KeyValues defaults_;
  std::map<std::string, std::string> flags_;
  std::string config_file_;
  std::vector<std::string> sets_;
};

void write_effective_config(const config::KeyValues& kv, const fs::path& path) {
  io::write_file(path, config::render_key_values(kv));
}

fs::path sidecar(const fs::path& out) { return fs::path(out.string() + ".config"); }

std::vector<text::Document> load_docs(const std::string& path) { return text::load_documents(path); }

void save_docs(std::span<const text::Document> docs, const fs::path& path) {
  auto out = io::open_output(path);
  text::write_documents(docs, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

embed::EmbeddingMatrix load_vectors(const std::string& path) {
  if (path.empty()) return {};
  return embed::load_word_vectors(path, embed::detect_format(path));
}

embed::VectorFormat parse_format(std::string_view s) {
  if (s == "text") return embed::VectorFormat::text;
  if (s == "binary") return embed::VectorFormat::binary;
  throw ConfigError("format must be text or binary");
}

// ---------------------------------------------------------------- kg-walk

struct KgWalk {
  CLI::App* app;
  Params params;
  std::string graph_dir, concepts, edges, out;

  explicit KgWalk(CLI::App& root)
      : app(root.add_subcommand("kg-walk", "generate H/S random-walk concept paths")), params(app) {
    app->add_option("--graph", graph_dir, "directory holding concepts.tsv and edges.tsv");
    app->add_option("--concepts", concepts, "concept file (id<TAB>name<TAB>type)");
    app->add_option("--edges", edges, "edge file (id<TAB>id)");
    app->add_option("--out", out, "walk corpus output")->required();
    params.key("walks", "10", "walks per concept and strategy");
    params.key("length", "40", "steps per walk");
    params.key("radius", "0.1", "S-path L-infinity radius");
    params.key("seed", "1", "random seed");
  }

  int operator()(bool parallel) const {
    const auto kv = params.resolve();
    kg::WalkConfig cfg;
    cfg.walks_per_node = config::to_size("walks", kv.at("walks"));
    cfg.walk_length = config::to_size("length", kv.at("length"));
    cfg.s_path_radius = config::to_double("radius", kv.at("radius"));
    cfg.seed = config::to_u64("seed", kv.at("seed"));
    cfg.validate();
    fs::path c = concepts, e = edges;
    if (!graph_dir.empty()) {
      if (c.empty()) c = fs::path(graph_dir) / "concepts.tsv";
      if (e.empty()) e = fs::path(graph_dir) / "edges.tsv";
    }
    if (c.empty() || e.empty()) throw ConfigError("kg-walk needs --graph or both --concepts and --edges");
    const auto g = kg::load_graph(c, e);
    const auto corpus = kg::generate_corpus(g, cfg, parallel ? kg::Execution::parallel : kg::Execution::serial);
    kg::save_corpus(corpus, g, out);
    write_effective_config(kv, sidecar(out));
    std::cout << "wrote " << corpus.paths.size() << " paths over " << g.concept_count() << " concepts to " << out
              << '\n';
    return kExitOk;
  }
};

// --------------------------------------------------------------- kg-embed

struct KgEmbed {
  CLI::App* app;
  Params params;
  std::string corpus, out;

  explicit KgEmbed(CLI::App& root)
      : app(root.add_subcommand("kg-embed", "train skip-gram concept embeddings on a walk corpus")), params(app) {
    app->add_option("--corpus", corpus, "walk corpus from kg-walk")->required();
    app->add_option("--out", out, "embedding output (word2vec format)")->required();
    params.key("dim", "108", "embedding dimension");
    params.key("window", "5", "context window");
    params.key("negatives", "5", "negative samples per pair");
    params.key("epochs", "5", "passes over the corpus");
    params.key("learning_rate", "--lr", "0.025", "initial learning rate");
    params.key("paths", "HS", "which paths to train on: HS, H or S");
    params.key("format", "text", "output format: text or binary");
    params.key("hogwild", "false", "unsynchronized multi-threaded updates (not reproducible)");
    params.key("seed", "1", "random seed");
  }

  int operator()() const {
    const auto kv = params.resolve();
    embed::SkipGramConfig cfg;
    cfg.dim = config::to_size("dim", kv.at("dim"));
    cfg.window = config::to_size("window", kv.at("window"));
    cfg.negatives = config::to_size("negatives", kv.at("negatives"));
    cfg.epochs = config::to_size("epochs", kv.at("epochs"));
    cfg.learning_rate = config::to_double("learning_rate", kv.at("learning_rate"));
    cfg.hogwild = config::to_bool("hogwild", kv.at("hogwild"));
    cfg.seed = config::to_u64("seed", kv.at("seed"));
    const auto& p = kv.at("paths");
    embed::StrategyFilter filter;
    if (p == "H") filter = {true, false};
    else if (p == "S") filter = {false, true};
    else if (p != "HS") throw ConfigError("paths must be HS, H or S");
    const auto format = parse_format(kv.at("format"));
    const auto tokens = embed::load_walk_corpus(corpus, filter);
    const auto result = embed::train_skipgram(tokens, cfg);
    embed::save_embeddings(result.vectors, out, format);
    write_effective_config(kv, sidecar(out));
    std::cout << "wrote " << result.vectors.size() << " x " << cfg.dim << " embeddings to " << out;
    if (!result.epoch_loss.empty()) std::cout << " (final epoch loss " << result.epoch_loss.back() << ")";
    std::cout << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- dataset

struct DatasetSplit {
  CLI::App* app;
  Params params;
  std::string docs, out, emit_dir;

  explicit DatasetSplit(CLI::App& parent)
      : app(parent.add_subcommand("split", "train/validation/test manifest")), params(app) {
    app->add_option("--docs", docs, "documents JSONL")->required();
    app->add_option("--out", out, "manifest JSONL output")->required();
    app->add_option("--emit-dir", emit_dir, "also write train/validation/test JSONL here");
    params.key("strategy", "synchronous", "synchronous (stratified random) or asynchronous (by date)");
    params.key("cutoff", text::format_date(datasets::kDefaultCutoff), "asynchronous cutoff date");
    params.key("val_fraction", "0.1", "asynchronous: validation share of pre-cutoff documents");
    params.key("train_ratio", "0.8", "synchronous train share");
    params.key("val_ratio", "0.1", "synchronous validation share");
    params.key("test_ratio", "0.1", "synchronous test share");
    params.key("seed", "1", "random seed");
  }

  int operator()() const {
    const auto kv = params.resolve();
    const auto documents = load_docs(docs);
    const auto seed = config::to_u64("seed", kv.at("seed"));
    datasets::SplitManifest m;
    const auto& strategy = kv.at("strategy");
    if (strategy == "synchronous") {
      datasets::SplitRatios r{config::to_double("train_ratio", kv.at("train_ratio")),
                              config::to_double("val_ratio", kv.at("val_ratio")),
                              config::to_double("test_ratio", kv.at("test_ratio"))};
      m = datasets::synchronous_split(documents, r, seed);
    } else if (strategy == "asynchronous") {
      const auto cutoff = text::parse_date(kv.at("cutoff"));
      m = datasets::asynchronous_split(documents, cutoff, config::to_double("val_fraction", kv.at("val_fraction")),
                                       seed);
      datasets::check_temporal(m, documents);
    } else {
      throw ConfigError("strategy must be synchronous or asynchronous");
    }
    m.check_disjoint();
    datasets::save_manifest(m, out);
    write_effective_config(kv, sidecar(out));
    if (!emit_dir.empty()) {
      const auto parts = datasets::apply_manifest(m, documents);
      save_docs(parts.train, fs::path(emit_dir) / "train.jsonl");
      save_docs(parts.validation, fs::path(emit_dir) / "validation.jsonl");
      save_docs(parts.test, fs::path(emit_dir) / "test.jsonl");
    }
    std::cout << "train " << m.train.size() << ", validation " << m.validation.size() << ", test " << m.test.size()
              << '\n';
    return kExitOk;
  }
};

struct DatasetNegsample {
  CLI::App* app;
  Params params;
  std::string positives, pool, out, merged, genes, diseases;

  explicit DatasetNegsample(CLI::App& parent)
      : app(parent.add_subcommand("negsample", "sample negative documents for a positive set")), params(app) {
    app->add_option("--positives", positives, "positive documents JSONL")->required();
    app->add_option("--pool", pool, "candidate documents JSONL")->required();
    app->add_option("--out", out, "negatives JSONL output")->required();
    app->add_option("--merged", merged, "also write positives + negatives here");
    app->add_option("--genes", genes, "gene term list (ambiguous strategy)");
    app->add_option("--diseases", diseases, "disease term list (ambiguous strategy)");
    params.key("strategy", "ambiguous", "ambiguous or random");
    params.key("count", "0", "negatives to draw; 0 means as many as positives");
    params.key("keywords", "18", "top positive keywords used as a candidate filter");
    params.key("seed", "1", "random seed");
  }

  int operator()() const {
    const auto kv = params.resolve();
    auto pos = load_docs(positives);
    for (auto& d : pos) d.label = text::Label::positive;
    const auto candidates = load_docs(pool);
    datasets::NegativeSampleSpec spec;
    spec.pool = candidates;
    spec.count = config::to_size("count", kv.at("count"));
    if (spec.count == 0) spec.count = pos.size();
    spec.keyword_count = config::to_size("keywords", kv.at("keywords"));
    spec.seed = config::to_u64("seed", kv.at("seed"));
    const auto& strategy = kv.at("strategy");
    if (strategy == "random") {
      spec.strategy = datasets::NegativeStrategy::random;
    } else if (strategy == "ambiguous") {
      spec.strategy = datasets::NegativeStrategy::ambiguous;
      if (genes.empty() || diseases.empty()) throw ConfigError("ambiguous sampling needs --genes and --diseases");
      spec.gene_lexicon = text::load_lexicon(genes, true);
      spec.disease_lexicon = text::load_lexicon(diseases, true);
    } else {
      throw ConfigError("strategy must be ambiguous or random");
    }
    const auto negatives = datasets::negative_sample(spec, pos);
    save_docs(negatives, out);
    write_effective_config(kv, sidecar(out));
    if (!merged.empty()) {
      std::vector<text::Document> all = pos;
      all.insert(all.end(), negatives.begin(), negatives.end());
      save_docs(all, merged);
    }
    std::cout << "sampled " << negatives.size() << " negatives for " << pos.size() << " positives\n";
    return kExitOk;
  }
};

struct DatasetKeywords {
  CLI::App* app;
  Params params;
  std::string docs, out;

  explicit DatasetKeywords(CLI::App& parent)
      : app(parent.add_subcommand("keywords", "most frequent terms of the positive documents")), params(app) {
    app->add_option("--docs", docs, "documents JSONL; labeled negatives are ignored")->required();
    app->add_option("--out", out, "output file (default standard output)");
    params.key("k", "18", "number of keywords");
    params.key("frequency", "document", "document or term frequency");
  }

  int operator()() const {
    const auto kv = params.resolve();
    const auto k = config::to_size("k", kv.at("k"));
    const auto& f = kv.at("frequency");
    if (f != "document" && f != "term") throw ConfigError("frequency must be document or term");
    auto documents = load_docs(docs);
    std::erase_if(documents, [](const text::Document& d) { return d.label == text::Label::negative; });
    const auto words = datasets::keyword_top_k(
        documents, k, f == "term" ? datasets::KeywordFrequency::term : datasets::KeywordFrequency::document);
    std::string text;
    for (const auto& w : words) text += w + '\n';
    if (out.empty()) {
      std::cout << text;
    } else {
      io::write_file(out, text);
      write_effective_config(kv, sidecar(out));
    }
    return kExitOk;
  }
};

// ------------------------------------------------------------------ train

struct Inputs {
  std::string words1, words2, knowledge, lexicon;

  void add_to(CLI::App* app, bool lexicon_required) {
    app->add_option("--words1", words1, "channel-1 word vectors")->required();
    app->add_option("--words2", words2, "channel-2 word vectors (default: --words1)");
    app->add_option("--knowledge", knowledge, "concept embeddings (needed when dk > 0)");
    auto* opt = app->add_option("--lexicon", lexicon, "phrase<TAB>concept_id lexicon");
    if (lexicon_required) opt->required();
  }

  text::ConceptLexicon load_lexicon() const {
    if (lexicon.empty()) return text::ConceptLexicon{};
    return text::load_lexicon(lexicon);
  }

  kmcnn::InputTables tables(const text::Vocabulary& vocab, const text::ConceptLexicon& lex,
                            const kmcnn::ModelConfig& cfg) const {
    const auto w1 = load_vectors(words1);
    const auto w2 = cfg.channels > 1 && !words2.empty() ? load_vectors(words2) : w1;
    if (cfg.dk > 0 && knowledge.empty()) throw ConfigError("dk > 0 needs --knowledge");
    const auto kn = cfg.dk > 0 ? load_vectors(knowledge) : embed::EmbeddingMatrix{};
    return kmcnn::align_tables(vocab, lex, w1, w2, kn, cfg);
  }
};

struct Train {
  CLI::App* app;
  Params params;
  Inputs inputs;
  std::string train_path, val_path, out_dir;

  explicit Train(CLI::App& root) : app(root.add_subcommand("train", "train a classifier")), params(app) {
    app->add_option("--train", train_path, "labeled training documents JSONL")->required();
    app->add_option("--val", val_path, "labeled validation documents JSONL")->required();
    app->add_option("--out-dir", out_dir, "checkpoint, vocabulary, history and config go here")->required();
    inputs.add_to(app, true);
    params.key("variant", "kmcnn", "plain_cnn, mcnn, kcnn or kmcnn");
    params.key("min_count", "1", "minimum training-set frequency for a vocabulary entry");
    for (const auto& [k, v] : kmcnn::to_key_values(kmcnn::ModelConfig{})) params.key(k, v, "model parameter");
  }

  int operator()() const {
    auto kv = params.resolve();
    const auto variant = kmcnn::parse_variant(kv.at("variant"));
    const auto min_count = config::to_u64("min_count", kv.at("min_count"));
    kmcnn::ModelConfig cfg;
    for (const auto& [k, v] : kv) {
      if (k != "variant" && k != "min_count") kmcnn::apply_key(cfg, k, v);
    }
    if ((variant == kmcnn::Variant::kcnn || variant == kmcnn::Variant::kmcnn) && cfg.dk == 0) {
      throw ConfigError("variant " + std::string(kmcnn::variant_name(variant)) + " needs dk > 0");
    }
    cfg = kmcnn::ablation_variant(cfg, variant, cfg.dk);
    cfg.validate();
    for (const auto& [k, v] : kmcnn::to_key_values(cfg)) kv[k] = v;

    const auto train_docs = load_docs(train_path);
    const auto val_docs = load_docs(val_path);
    const auto vocab = text::build_vocab(train_docs, min_count);
    const auto lex = inputs.load_lexicon();
    const auto tables = inputs.tables(vocab, lex, cfg);
    const auto train_set = kmcnn::encode_examples(train_docs, vocab, lex, cfg.n);
    const auto val_set = kmcnn::encode_examples(val_docs, vocab, lex, cfg.n);

    const kmcnn::CheckpointMeta meta{vocab.hash(), lex.hash(), tables.hash};
    const auto result = kmcnn::train(train_set, val_set, cfg, tables, meta);

    const fs::path dir = out_dir;
    kmcnn::save_checkpoint(result.checkpoint, dir / "model.kmc");
    text::save_vocab(vocab, dir / "vocab.tsv");
    io::write_file(dir / "history.csv", kmcnn::history_csv(result.history));
    eval::write_predictions(kmcnn::predict(result.checkpoint.model, val_set, tables), dir / "validation.tsv");
    write_effective_config(kv, dir / "train.config");

    std::cout << "variant " << kmcnn::variant_display(variant) << ", best epoch " << result.best_epoch;
    if (result.best_epoch > 0) {
      const auto& best = result.history[result.best_epoch - 1];
      std::cout << ", validation P/R/F1 " << eval::format_percent(best.validation.precision) << " / "
                << eval::format_percent(best.validation.recall) << " / " << eval::format_percent(best.validation.f1);
    }
    std::cout << '\n';
    return kExitOk;
  }
};

// ---------------------------------------------------------------- predict

struct Predict {
  CLI::App* app;
  Inputs inputs;
  std::string model_dir, checkpoint, vocab, docs, out;

  explicit Predict(CLI::App& root) : app(root.add_subcommand("predict", "score documents with a checkpoint")) {
    app->add_option("--model-dir", model_dir, "training output directory (model.kmc, vocab.tsv)");
    app->add_option("--checkpoint", checkpoint, "checkpoint file (overrides --model-dir)");
    app->add_option("--vocab", vocab, "vocabulary file (overrides --model-dir)");
    app->add_option("--docs", docs, "documents JSONL")->required();
    app->add_option("--out", out, "pmid<TAB>label<TAB>score output")->required();
    inputs.add_to(app, false);
  }

  int operator()() const {
    fs::path ckpt = checkpoint, voc = vocab;
    if (ckpt.empty() && !model_dir.empty()) ckpt = fs::path(model_dir) / "model.kmc";
    if (voc.empty() && !model_dir.empty()) voc = fs::path(model_dir) / "vocab.tsv";
    if (ckpt.empty() || voc.empty()) throw ConfigError("predict needs --model-dir or --checkpoint and --vocab");
    const auto c = kmcnn::load_checkpoint(ckpt);
    const auto v = text::load_vocab(voc);
    const auto lex = inputs.load_lexicon();
    const auto tables = inputs.tables(v, lex, c.model.config());
    const auto preds = kmcnn::predict(c, load_docs(docs), v, lex, tables);
    eval::write_predictions(preds, out);
    write_effective_config(kmcnn::to_key_values(c.model.config()), sidecar(out));
    const auto positives = std::count_if(preds.begin(), preds.end(),
                                         [](const eval::Prediction& p) { return p.label == text::Label::positive; });
    std::cout << "scored " << preds.size() << " documents, " << positives << " predicted positive\n";
    return kExitOk;
  }
};

// ------------------------------------------------------------------- eval

struct Eval {
  CLI::App* app;
  std::string predictions, gold, out_dir;
  std::vector<std::string> runs;

  explicit Eval(CLI::App& root) : app(root.add_subcommand("eval", "precision, recall and F1 reports")) {
    app->add_option("--predictions", predictions, "predictions of a single run");
    app->add_option("--gold", gold, "labeled documents for --predictions");
    app->add_option("--run", runs, "variant,dataset,predictions,gold (repeatable)");
    app->add_option("--out-dir", out_dir, "write f1.csv, precision.csv, recall.csv and report.txt here");
  }

  static eval::Metrics score(const std::string& pred_path, const std::string& gold_path) {
    std::vector<eval::LabeledPmid> p, g;
    for (const auto& x : eval::read_predictions(pred_path)) p.push_back({x.pmid, x.label});
    for (const auto& d : text::load_documents(gold_path)) {
      if (!d.label) throw DataError("gold document " + d.pmid + " in '" + gold_path + "' has no label");
      g.push_back({d.pmid, *d.label});
    }
    return eval::precision_recall_f1(eval::confusion(p, g));
  }

  int operator()() const {
    std::vector<eval::RunResult> results;
    std::vector<std::string> datasets;
    auto add_dataset = [&](const std::string& d) {
      if (std::find(datasets.begin(), datasets.end(), d) == datasets.end()) datasets.push_back(d);
    };
    if (!predictions.empty() || !gold.empty()) {
      if (predictions.empty() || gold.empty()) throw ConfigError("--predictions and --gold go together");
      const auto m = score(predictions, gold);
      const auto dataset = fs::path(gold).stem().string();
      results.push_back({"model", dataset, m});
      add_dataset(dataset);
    }
    for (const auto& r : runs) {
      const auto f = io::split(r, ',');
      if (f.size() != 4) throw ConfigError("--run expects variant,dataset,predictions,gold; got '" + r + "'");
      results.push_back({std::string(f[0]), std::string(f[1]), score(std::string(f[2]), std::string(f[3]))});
      add_dataset(std::string(f[1]));
    }
    if (results.empty()) throw ConfigError("eval needs --predictions/--gold or at least one --run");

    std::string report;
    for (auto measure : {eval::Measure::f1, eval::Measure::precision, eval::Measure::recall}) {
      const auto table = eval::ablation_table(results, datasets, measure);
      report += eval::render_text(table) + '\n';
      if (!out_dir.empty()) {
        io::write_file(fs::path(out_dir) / (std::string(eval::measure_name(measure)) + ".csv"),
                       eval::render_csv(table));
      }
    }
    if (!out_dir.empty()) io::write_file(fs::path(out_dir) / "report.txt", report);
    std::cout << report;
    return kExitOk;
  }
};

// -------------------------------------------------------------- gradcheck

struct GradCheck {
  CLI::App* app;
  Params params;
  std::string out;

  explicit GradCheck(CLI::App& root)
      : app(root.add_subcommand("gradcheck", "finite-difference check of every layer and the full model")),
        params(app) {
    app->add_option("--out", out, "also write the report here");
    const kmcnn::GradCheckSuiteConfig d;
    params.key("trials", "20", "random trials");
    params.key("n", std::to_string(d.n), "sequence length");
    params.key("k", std::to_string(d.k), "input width");
    params.key("filters", std::to_string(d.filters), "filters per width");
    params.key("hidden_dim", std::to_string(d.hidden_dim), "hidden units");
    params.key("eps", config::from_double(d.eps), "finite-difference step");
    params.key("tolerance", config::from_double(d.tolerance), "maximum relative error");
    params.key("seed", "1", "random seed");
  }

  int operator()() const {
    const auto kv = params.resolve();
    kmcnn::GradCheckSuiteConfig cfg;
    cfg.trials = config::to_size("trials", kv.at("trials"));
    cfg.n = config::to_size("n", kv.at("n"));
    cfg.k = config::to_size("k", kv.at("k"));
    cfg.filters = config::to_size("filters", kv.at("filters"));
    cfg.hidden_dim = config::to_size("hidden_dim", kv.at("hidden_dim"));
    cfg.eps = config::to_double("eps", kv.at("eps"));
    cfg.tolerance = config::to_double("tolerance", kv.at("tolerance"));
    cfg.seed = config::to_u64("seed", kv.at("seed"));
    const auto report = kmcnn::run_grad_checks(cfg);
    std::string text;
    char buf[256];
    for (const auto& e : report.entries) {
      std::snprintf(buf, sizeof buf, "%-14s %-4s max_rel_err %.3e over %zu coords (worst %s)\n", e.name.c_str(),
                    e.result.passed(cfg.tolerance) ? "ok" : "FAIL", e.result.max_rel_error, e.result.checked,
                    e.result.worst.empty() ? "-" : e.result.worst.c_str());
      text += buf;
    }
    text += "model trials redrawn at kinks: " + std::to_string(report.resampled) + '\n';
    std::cout << text;
    if (!out.empty()) {
      io::write_file(out, text);
      write_effective_config(kv, sidecar(out));
    }
    if (!report.passed()) throw GradCheckFailed("gradient check exceeded tolerance");
    return kExitOk;
  }
};

// ------------------------------------------------------------------ synth

struct Synth {
  CLI::App* app;
  Params params;
  std::string out_dir;

  explicit Synth(CLI::App& root)
      : app(root.add_subcommand("synth", "write a small separable synthetic dataset")), params(app) {
    app->add_option("--out-dir", out_dir, "output directory")->required();
    const synthetic::Config d;
    params.key("documents", std::to_string(d.documents), "labeled documents");
    params.key("pool", std::to_string(d.pool), "unlabeled pool documents");
    params.key("length", std::to_string(d.length), "tokens per document");
    params.key("fillers", std::to_string(d.filler_words), "filler vocabulary size");
    params.key("dim", std::to_string(d.dim), "word-vector dimension");
    params.key("seed", "1", "random seed");
  }

  int operator()() const {
    const auto kv = params.resolve();
    synthetic::Config cfg;
    cfg.documents = config::to_size("documents", kv.at("documents"));
    cfg.pool = config::to_size("pool", kv.at("pool"));
    cfg.length = config::to_size("length", kv.at("length"));
    cfg.filler_words = config::to_size("fillers", kv.at("fillers"));
    cfg.dim = config::to_size("dim", kv.at("dim"));
    cfg.seed = config::to_u64("seed", kv.at("seed"));
    synthetic::write(synthetic::generate(cfg), out_dir);
    write_effective_config(kv, fs::path(out_dir) / "synth.config");
    std::cout << "wrote synthetic dataset to " << out_dir << '\n';
    return kExitOk;
  }
};

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Literature triage with knowledge-enhanced multi-channel CNNs", "triage"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "OpenMP threads; 1 keeps every stage deterministic")
      ->check(CLI::PositiveNumber);

  KgWalk kg_walk(app);
  KgEmbed kg_embed(app);
  auto* dataset = app.add_subcommand("dataset", "split, negative sampling and keyword extraction");
  dataset->require_subcommand(1);
  DatasetSplit split(*dataset);
  DatasetNegsample negsample(*dataset);
  DatasetKeywords keywords(*dataset);
  Train train_cmd(app);
  Predict predict_cmd(app);
  Eval eval_cmd(app);
  GradCheck gradcheck(app);
  Synth synth(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  omp_set_num_threads(threads);
  try {
    if (*kg_walk.app) return kg_walk(threads > 1);
    if (*kg_embed.app) return kg_embed();
    if (*split.app) return split();
    if (*negsample.app) return negsample();
    if (*keywords.app) return keywords();
    if (*train_cmd.app) return train_cmd();
    if (*predict_cmd.app) return predict_cmd();
    if (*eval_cmd.app) return eval_cmd();
    if (*gradcheck.app) return gradcheck();
    if (*synth.app) return synth();
  } catch (const GradCheckFailed& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitGradCheck;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  }
  return kExitInvalid;
}

}  // namespace triage::cli
