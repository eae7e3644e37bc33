#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "triage/embed.hpp"
#include "triage/kg.hpp"
#include "triage/text.hpp"

// A small, fully synthetic stand-in for the real inputs: labeled abstracts
// whose label is decided by the presence of cue words, two word-vector
// tables, a typed concept graph and a lexicon linking words to concepts.
// Cue-word vectors share a common offset, so the set is linearly separable
// by construction.
namespace triage::synthetic {

struct Config {
  std::size_t documents = 200;  // labeled, half positive
  std::size_t pool = 100;       // unlabeled candidates for negative sampling
  std::size_t length = 48;      // tokens per document
  std::size_t filler_words = 120;
  std::size_t dim = 16;  // word-vector dimension
  std::uint64_t seed = 1;

  void validate() const;
};

struct Dataset {
  std::vector<text::Document> documents;
  std::vector<text::Document> pool;
  embed::EmbeddingMatrix channel1;
  embed::EmbeddingMatrix channel2;
  std::string concepts_tsv;  // kg loader formats
  std::string edges_tsv;
  std::string lexicon_tsv;  // phrase<TAB>concept_id
  std::string gene_terms;   // one bare phrase per line
  std::string disease_terms;

  kg::KnowledgeGraph graph() const;
  text::ConceptLexicon lexicon() const;
};

const std::vector<std::string>& cue_words();

Dataset generate(const Config& cfg);

// documents.jsonl, pool.jsonl, words1.txt, words2.txt, concepts.tsv,
// edges.tsv, lexicon.tsv, genes.txt, diseases.txt
void write(const Dataset& d, const std::filesystem::path& dir);

}  // namespace triage::synthetic
