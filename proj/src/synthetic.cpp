#include "triage/synthetic.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "triage/error.hpp"
#include "triage/io.hpp"
#include "triage/rng.hpp"

namespace triage::synthetic {

namespace {

constexpr double kCueOffset = 3.0;
constexpr std::size_t kConceptFillers = 18;

std::string filler(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "tok%03zu", i);
  return buf;
}

std::string concept_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "C%04zu", i);
  return buf;
}

text::Document make_document(std::size_t index, const std::vector<std::string>& tokens, Rng& rng) {
  using namespace std::chrono;
  const sys_days first{year{2014} / January / 1};
  const auto day = first + days{static_cast<int>(rng.below(7 * 365))};
  text::Document d;
  d.pmid = std::to_string(30000000 + index);
  const std::size_t title_len = std::min<std::size_t>(8, tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    auto& field = i < title_len ? d.title : d.abstract_text;
    if (!field.empty()) field += ' ';
    field += tokens[i];
  }
  d.journal = "Synthetic Journal";
  d.pub_type = "Journal Article";
  d.date = year_month_day{day};
  return d;
}

}  // namespace

void Config::validate() const {
  if (documents < 2) throw ConfigError("synthetic set needs at least 2 documents");
  if (length < 4) throw ConfigError("synthetic documents need at least 4 tokens");
  if (filler_words < kConceptFillers) {
    throw ConfigError("synthetic vocabulary needs at least " + std::to_string(kConceptFillers) + " filler words");
  }
  if (dim < 2) throw ConfigError("synthetic word vectors need dimension >= 2");
}

const std::vector<std::string>& cue_words() {
  static const std::vector<std::string> words{"mutation", "variant", "allele", "polymorphism", "genotype", "locus"};
  return words;
}

Dataset generate(const Config& cfg) {
  cfg.validate();
  Rng rng(derive_seed(cfg.seed, 0x53594e));
  Dataset out;
  const auto& cues = cue_words();

  // Word vectors: N(0,1) rows; cues get +kCueOffset on the first coordinate.
  // The second channel is the first plus small noise, standing in for a
  // table trained on a different corpus.
  out.channel1 = embed::EmbeddingMatrix(cfg.dim);
  out.channel2 = embed::EmbeddingMatrix(cfg.dim);
  std::vector<std::string> fillers;
  for (std::size_t i = 0; i < cfg.filler_words; ++i) fillers.push_back(filler(i));
  auto add_word = [&](const std::string& w, bool cue) {
    std::vector<float> v(cfg.dim), u(cfg.dim);
    for (std::size_t j = 0; j < cfg.dim; ++j) {
      v[j] = static_cast<float>(rng.normal() * 0.5);
      u[j] = v[j] + static_cast<float>(rng.normal() * 0.1);
    }
    if (cue) {
      v[0] += static_cast<float>(kCueOffset);
      u[0] += static_cast<float>(kCueOffset);
    }
    out.channel1.add(w, v);
    out.channel2.add(w, u);
  };
  for (const auto& w : cues) add_word(w, true);
  for (const auto& w : fillers) add_word(w, false);

  // Concepts: one per cue word plus a block of filler words. Cue concepts
  // form a dense cluster, filler concepts a ring with chords, and one bridge
  // edge joins the two.
  std::ostringstream concepts, edges, lexicon, genes, diseases;
  std::size_t next_concept = 1;
  std::vector<std::string> cue_ids, filler_ids;
  for (std::size_t i = 0; i < cues.size(); ++i) {
    const auto id = concept_id(next_concept++);
    concepts << id << '\t' << cues[i] << '\t' << (i % 2 == 0 ? "Gene or Genome" : "Disease or Syndrome") << '\n';
    lexicon << cues[i] << '\t' << id << '\n';
    cue_ids.push_back(id);
  }
  for (std::size_t i = 0; i < kConceptFillers; ++i) {
    const auto id = concept_id(next_concept++);
    concepts << id << '\t' << fillers[i] << '\t'
             << (i % 3 == 0 ? "Organic Chemical" : "Amino Acid, Peptide, or Protein") << '\n';
    lexicon << fillers[i] << '\t' << id << '\n';
    filler_ids.push_back(id);
  }
  for (std::size_t i = 0; i < cue_ids.size(); ++i) {
    for (std::size_t j = i + 1; j < cue_ids.size(); ++j) edges << cue_ids[i] << '\t' << cue_ids[j] << '\n';
  }
  for (std::size_t i = 0; i < filler_ids.size(); ++i) {
    edges << filler_ids[i] << '\t' << filler_ids[(i + 1) % filler_ids.size()] << '\n';
    if (i % 3 == 0) edges << filler_ids[i] << '\t' << filler_ids[(i + 5) % filler_ids.size()] << '\n';
  }
  edges << cue_ids.front() << '\t' << filler_ids.front() << '\n';
  out.concepts_tsv = concepts.str();
  out.edges_tsv = edges.str();
  out.lexicon_tsv = lexicon.str();

  // Gene and disease term lists used by the ambiguous negative sampler:
  // drawn from the filler words so that some negatives qualify.
  for (std::size_t i = 20; i < 30; ++i) genes << fillers[i] << '\n';
  for (std::size_t i = 30; i < 40; ++i) diseases << fillers[i] << '\n';
  out.gene_terms = genes.str();
  out.disease_terms = diseases.str();

  // Documents: filler tokens, positives get 1 to 3 cue words at random
  // positions. Labels alternate before a shuffle so the set is balanced.
  std::vector<bool> positive(cfg.documents);
  for (std::size_t i = 0; i < cfg.documents; ++i) positive[i] = i % 2 == 0;
  std::vector<std::size_t> perm(cfg.documents);
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  rng.shuffle(std::span<std::size_t>(perm));
  auto body = [&] {
    std::vector<std::string> tokens(cfg.length);
    for (auto& t : tokens) t = fillers[rng.below(fillers.size())];
    return tokens;
  };
  for (std::size_t i = 0; i < cfg.documents; ++i) {
    auto tokens = body();
    const bool pos = positive[perm[i]];
    if (pos) {
      const std::size_t count = 1 + rng.below(3);
      for (std::size_t c = 0; c < count; ++c) tokens[rng.below(tokens.size())] = cues[rng.below(cues.size())];
    }
    auto d = make_document(i, tokens, rng);
    d.label = pos ? text::Label::positive : text::Label::negative;
    out.documents.push_back(std::move(d));
  }
  for (std::size_t i = 0; i < cfg.pool; ++i) {
    out.pool.push_back(make_document(cfg.documents + i, body(), rng));
  }
  return out;
}

kg::KnowledgeGraph Dataset::graph() const {
  std::istringstream c(concepts_tsv), e(edges_tsv);
  return kg::parse_graph(c, e);
}

text::ConceptLexicon Dataset::lexicon() const {
  std::istringstream in(lexicon_tsv);
  return text::read_lexicon(in);
}

void write(const Dataset& d, const std::filesystem::path& dir) {
  auto docs = [&](const char* name, const std::vector<text::Document>& v) {
    auto out = io::open_output(dir / name);
    text::write_documents(v, out);
    if (!out) throw IoError("write failed for '" + (dir / name).string() + "'");
  };
  docs("documents.jsonl", d.documents);
  docs("pool.jsonl", d.pool);
  embed::save_embeddings(d.channel1, dir / "words1.txt", embed::VectorFormat::text);
  embed::save_embeddings(d.channel2, dir / "words2.txt", embed::VectorFormat::text);
  io::write_file(dir / "concepts.tsv", d.concepts_tsv);
  io::write_file(dir / "edges.tsv", d.edges_tsv);
  io::write_file(dir / "lexicon.tsv", d.lexicon_tsv);
  io::write_file(dir / "genes.txt", d.gene_terms);
  io::write_file(dir / "diseases.txt", d.disease_terms);
}

}  // namespace triage::synthetic
