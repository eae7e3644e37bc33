#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "triage/text.hpp"

namespace triage::datasets {

using text::Date;
using text::Document;

enum class SplitStrategy { synchronous, asynchronous };

std::string_view strategy_name(SplitStrategy s);

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> test;
  std::optional<Date> cutoff_date;
  std::uint64_t seed = 0;
  SplitStrategy strategy = SplitStrategy::synchronous;

  // Throws ValidationError if any pmid appears twice across the three lists.
  void check_disjoint() const;
  bool operator==(const SplitManifest&) const = default;
};

// Throws ValidationError if a train/validation document is dated on or after
// the cutoff, or a test document before it.
void check_temporal(const SplitManifest& m, std::span<const Document> docs);

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

// Stratified by label: every class is apportioned to the three parts by
// largest remainder, so each part's class mix is within one document of the
// overall mix. Part sizes are round(r * N) for validation and test, with the
// remainder going to train.
SplitManifest synchronous_split(std::span<const Document> docs, SplitRatios ratios, std::uint64_t seed);

inline constexpr Date kDefaultCutoff{std::chrono::year{2018}, std::chrono::January, std::chrono::day{1}};
inline constexpr double kDefaultValidationFraction = 0.1;

// date < cutoff goes to train/validation, date >= cutoff to test.
SplitManifest asynchronous_split(std::span<const Document> docs, Date cutoff, double val_fraction,
                                 std::uint64_t seed);

// Splits docs into three collections following a manifest. Throws
// LookupError for pmids the collection does not contain.
struct SplitDocuments {
  std::vector<Document> train, validation, test;
};
SplitDocuments apply_manifest(const SplitManifest& m, std::span<const Document> docs);

// Manifest JSONL: a header object, then one {"pmid","split"} object per line.
void write_manifest(const SplitManifest& m, std::ostream& out);
SplitManifest read_manifest(std::istream& in);
void save_manifest(const SplitManifest& m, const std::filesystem::path& path);
SplitManifest load_manifest(const std::filesystem::path& path);

const std::unordered_set<std::string>& stopwords();

inline constexpr std::size_t kDefaultKeywordCount = 18;

enum class KeywordFrequency { document, term };

// Ranks non-stopword, non-numeric tokens of the positives by frequency
// (descending, ties lexicographic) and returns the first k.
std::vector<std::string> keyword_top_k(std::span<const Document> positives, std::size_t k,
                                       KeywordFrequency frequency = KeywordFrequency::document);

// Uniform sample without replacement from pool documents whose pmid is not a
// positive. Output keeps pool order and is labeled negative.
std::vector<Document> negative_sample_random(std::span<const Document> pool, std::size_t count,
                                             std::span<const Document> positives, std::uint64_t seed);

enum class NegativeStrategy { random, ambiguous };

struct NegativeSampleSpec {
  NegativeStrategy strategy = NegativeStrategy::ambiguous;
  std::span<const Document> pool;
  std::size_t count = 0;
  text::ConceptLexicon gene_lexicon;
  text::ConceptLexicon disease_lexicon;
  std::size_t keyword_count = kDefaultKeywordCount;
  std::uint64_t seed = 0;
};

// Candidates are pool documents mentioning both a gene and a disease phrase,
// or containing one of the top keywords of the positives; positives' pmids
// are removed before sampling down to spec.count.
std::vector<Document> negative_sample_ambiguous(const NegativeSampleSpec& spec,
                                                std::span<const Document> positives);

std::vector<Document> negative_sample(const NegativeSampleSpec& spec, std::span<const Document> positives);

}  // namespace triage::datasets
