#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace triage::text {

enum class Label { negative = 0, positive = 1 };

using Date = std::chrono::year_month_day;

// Strict YYYY-MM-DD; throws ParseError otherwise.
Date parse_date(std::string_view s);
std::string format_date(const Date& d);

struct Document {
  std::string pmid;
  std::string title;
  std::string abstract_text;
  std::string journal;
  std::string pub_type;
  std::optional<Date> date;
  std::optional<Label> label;

  bool operator==(const Document&) const = default;
};

// JSON Lines, one document per line with the keys
// pmid, title, abstract, journal, pub_type, date, label.
// Throws on malformed lines, missing pmid or duplicate pmids.
std::vector<Document> read_documents(std::istream& in);
std::vector<Document> load_documents(const std::filesystem::path& path);
void write_documents(std::span<const Document> docs, std::ostream& out);
void save_documents(std::span<const Document> docs, const std::filesystem::path& path);

std::string_view label_name(Label label);
Label parse_label(std::string_view s);

// title, abstract, pmid, journal, pub_type joined by single spaces; empty
// fields are skipped and any run of whitespace collapses to one space.
std::string compose_text(const Document& d);

// Lowercased maximal runs of letters, digits and hyphens. Leading and
// trailing hyphens are stripped; bytes >= 0x80 count as letters so UTF-8
// words stay whole.
std::vector<std::string> tokenize(std::string_view s);

class Vocabulary {
 public:
  static constexpr std::uint32_t kPad = 0;
  static constexpr std::uint32_t kOov = 1;

  Vocabulary();

  std::size_t size() const { return tokens_.size(); }
  // kOov for unknown tokens.
  std::uint32_t id(std::string_view token) const;
  std::optional<std::uint32_t> find(std::string_view token) const;
  const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
  std::uint64_t count(std::uint32_t id) const { return counts_.at(id); }

  std::uint32_t add(std::string token, std::uint64_t count);
  std::uint64_t hash() const;

  bool operator==(const Vocabulary& other) const {
    return tokens_ == other.tokens_ && counts_ == other.counts_;
  }

 private:
  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::uint32_t> index_;
};

// Ids from 2 in descending corpus frequency, ties lexicographic.
Vocabulary build_vocab(std::span<const Document> docs, std::uint64_t min_count);

// token<TAB>count, one line per id starting at 2.
void save_vocab(const Vocabulary& v, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

// Phrase dictionary for greedy leftmost-longest matching. Concept keys are
// numbered 1..K in lexicographic order so the numbering does not depend on
// insertion order; 0 means "no concept".
class ConceptLexicon {
 public:
  ConceptLexicon() = default;
  // Phrases are tokenized with tokenize(). Throws ValidationError on empty
  // phrases or one phrase mapped to two different concepts.
  explicit ConceptLexicon(std::span<const std::pair<std::string, std::string>> entries);

  std::size_t phrase_count() const { return phrases_.size(); }
  std::size_t concept_count() const { return keys_.size(); }
  bool empty() const { return phrases_.empty(); }
  // Index 0 is the empty key.
  const std::string& concept_key(std::uint32_t id) const { return keys_.at(id - 1); }
  std::span<const std::string> concept_keys() const { return keys_; }

  std::vector<std::uint32_t> link(std::span<const std::string> tokens) const;
  bool matches_any(std::span<const std::string> tokens) const;
  std::uint64_t hash() const;

 private:
  std::map<std::string, std::string> phrases_;  // joined phrase -> concept key
  std::unordered_map<std::string, std::uint32_t> phrase_ids_;
  std::vector<std::string> keys_;
  std::size_t max_len_ = 0;
};

std::vector<std::uint32_t> link_concepts(std::span<const std::string> tokens, const ConceptLexicon& lex);

// phrase<TAB>concept_id per line. With allow_bare_phrases a line without a
// tab is a phrase that maps to itself (used for gene/disease term lists).
ConceptLexicon read_lexicon(std::istream& in, bool allow_bare_phrases = false);
ConceptLexicon load_lexicon(const std::filesystem::path& path, bool allow_bare_phrases = false);

struct EncodedDocument {
  std::vector<std::uint32_t> token_ids;
  std::vector<std::uint32_t> concept_ids;

  std::size_t length() const { return token_ids.size(); }
  bool operator==(const EncodedDocument&) const = default;
};

inline constexpr std::size_t kDefaultSequenceLength = 1000;

// Keeps the first n tokens, pads the tail with 0.
EncodedDocument encode(const Document& d, const Vocabulary& v, const ConceptLexicon& lex, std::size_t n);

}  // namespace triage::text
