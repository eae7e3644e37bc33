#include "triage/text.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <istream>
#include <ostream>
#include <set>
#include <unordered_set>

#include "json.hpp"
#include "triage/error.hpp"
#include "triage/io.hpp"

namespace triage::text {

using nlohmann::json;

Date parse_date(std::string_view s) {
  auto bad = [&] { return ParseError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD"); };
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
  auto num = [&](std::size_t pos, std::size_t len) {
    int v = 0;
    for (std::size_t i = pos; i < pos + len; ++i) {
      if (!std::isdigit(static_cast<unsigned char>(s[i]))) throw bad();
      v = v * 10 + (s[i] - '0');
    }
    return v;
  };
  const Date d{std::chrono::year{num(0, 4)}, std::chrono::month{static_cast<unsigned>(num(5, 2))},
               std::chrono::day{static_cast<unsigned>(num(8, 2))}};
  if (!d.ok()) throw bad();
  return d;
}

std::string format_date(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()),
                static_cast<unsigned>(d.month()), static_cast<unsigned>(d.day()));
  return buf;
}

std::string_view label_name(Label label) { return label == Label::positive ? "positive" : "negative"; }

Label parse_label(std::string_view s) {
  if (s == "positive" || s == "1") return Label::positive;
  if (s == "negative" || s == "0") return Label::negative;
  throw ParseError("invalid label '" + std::string(s) + "', expected positive or negative");
}

namespace {

std::string string_field(const json& obj, const char* key, std::size_t lineno) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (it->is_string()) return it->get<std::string>();
  if (it->is_number_integer()) return std::to_string(it->get<long long>());
  throw ParseError("documents line " + std::to_string(lineno) + ": field '" + key + "' must be a string");
}

}  // namespace

std::vector<Document> read_documents(std::istream& in) {
  std::vector<Document> docs;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError("documents line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!obj.is_object()) throw ParseError("documents line " + std::to_string(lineno) + ": expected an object");
    Document d;
    d.pmid = string_field(obj, "pmid", lineno);
    if (d.pmid.empty()) throw ValidationError("documents line " + std::to_string(lineno) + ": missing pmid");
    d.title = string_field(obj, "title", lineno);
    d.abstract_text = string_field(obj, "abstract", lineno);
    d.journal = string_field(obj, "journal", lineno);
    d.pub_type = string_field(obj, "pub_type", lineno);
    try {
      if (auto date = string_field(obj, "date", lineno); !date.empty()) d.date = parse_date(date);
      if (auto label = string_field(obj, "label", lineno); !label.empty()) d.label = parse_label(label);
    } catch (const ParseError& e) {
      throw ParseError("documents line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!seen.insert(d.pmid).second) {
      throw ValidationError("documents line " + std::to_string(lineno) + ": duplicate pmid " + d.pmid);
    }
    docs.push_back(std::move(d));
  }
  return docs;
}

std::vector<Document> load_documents(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return read_documents(in);
}

void write_documents(std::span<const Document> docs, std::ostream& out) {
  for (const auto& d : docs) {
    json obj = json::object();
    obj["pmid"] = d.pmid;
    obj["title"] = d.title;
    obj["abstract"] = d.abstract_text;
    obj["journal"] = d.journal;
    obj["pub_type"] = d.pub_type;
    obj["date"] = d.date ? json(format_date(*d.date)) : json(nullptr);
    obj["label"] = d.label ? json(std::string(label_name(*d.label))) : json(nullptr);
    out << obj.dump() << '\n';
  }
}

void save_documents(std::span<const Document> docs, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  write_documents(docs, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string compose_text(const Document& d) {
  std::string out;
  bool pending_space = false;
  for (const std::string* field : {&d.title, &d.abstract_text, &d.pmid, &d.journal, &d.pub_type}) {
    for (char c : *field) {
      if (std::isspace(static_cast<unsigned char>(c))) {
        pending_space = !out.empty();
      } else {
        if (pending_space) out.push_back(' ');
        pending_space = false;
        out.push_back(c);
      }
    }
    pending_space = !out.empty();
  }
  return out;
}

std::vector<std::string> tokenize(std::string_view s) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    const auto first = current.find_first_not_of('-');
    if (first != std::string::npos) {
      const auto last = current.find_last_not_of('-');
      tokens.push_back(current.substr(first, last - first + 1));
    }
    current.clear();
  };
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c) || c == '-' || c >= 0x80) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      flush();
    }
  }
  if (!current.empty()) flush();
  return tokens;
}

Vocabulary::Vocabulary() : tokens_{"<pad>", "<unk>"}, counts_{0, 0} {}

std::optional<std::uint32_t> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::uint32_t Vocabulary::id(std::string_view token) const { return find(token).value_or(kOov); }

std::uint32_t Vocabulary::add(std::string token, std::uint64_t count) {
  const auto id = static_cast<std::uint32_t>(tokens_.size());
  if (!index_.try_emplace(token, id).second) throw ValidationError("duplicate vocabulary token '" + token + "'");
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
  return id;
}

std::uint64_t Vocabulary::hash() const {
  io::Fnv1a h;
  h.update("vocab");
  for (std::size_t i = 2; i < tokens_.size(); ++i) {
    h.update(tokens_[i]);
    h.update(std::string_view("\n", 1));
  }
  return h.digest();
}

Vocabulary build_vocab(std::span<const Document> docs, std::uint64_t min_count) {
  if (min_count < 1) throw ConfigError("min_count must be >= 1");
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& d : docs) {
    for (auto& t : tokenize(compose_text(d))) ++freq[std::move(t)];
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked;
  for (auto& [tok, c] : freq) {
    if (c >= min_count) ranked.emplace_back(tok, c);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  Vocabulary v;
  for (auto& [tok, c] : ranked) v.add(std::move(tok), c);
  return v;
}

void save_vocab(const Vocabulary& v, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  for (std::uint32_t id = 2; id < v.size(); ++id) out << v.token(id) << '\t' << v.count(id) << '\n';
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Vocabulary load_vocab(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  Vocabulary v;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = io::chomp(line);
    if (text.empty()) continue;
    const auto fields = io::split(text, '\t');
    std::uint64_t count = 0;
    if (fields.size() != 2 || fields[0].empty() ||
        std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), count).ec != std::errc{}) {
      throw ParseError("vocabulary line " + std::to_string(lineno) + ": expected token<TAB>count");
    }
    v.add(std::string(fields[0]), count);
  }
  return v;
}

namespace {

std::string join(std::span<const std::string> tokens) {
  std::string out;
  for (const auto& t : tokens) {
    if (!out.empty()) out.push_back(' ');
    out += t;
  }
  return out;
}

}  // namespace

ConceptLexicon::ConceptLexicon(std::span<const std::pair<std::string, std::string>> entries) {
  for (const auto& [phrase, key] : entries) {
    const auto tokens = tokenize(phrase);
    if (tokens.empty()) throw ValidationError("lexicon phrase '" + phrase + "' has no tokens");
    if (key.empty()) throw ValidationError("lexicon phrase '" + phrase + "' has an empty concept id");
    auto [it, inserted] = phrases_.try_emplace(join(tokens), key);
    if (!inserted && it->second != key) {
      throw ValidationError("lexicon phrase '" + it->first + "' maps to both '" + it->second + "' and '" +
                            key + "'");
    }
    max_len_ = std::max(max_len_, tokens.size());
  }
  std::set<std::string> keys;
  for (const auto& [phrase, key] : phrases_) keys.insert(key);
  keys_.assign(keys.begin(), keys.end());
  for (const auto& [phrase, key] : phrases_) {
    const auto pos = std::lower_bound(keys_.begin(), keys_.end(), key) - keys_.begin();
    phrase_ids_.emplace(phrase, static_cast<std::uint32_t>(pos + 1));
  }
}

std::vector<std::uint32_t> ConceptLexicon::link(std::span<const std::string> tokens) const {
  std::vector<std::uint32_t> out(tokens.size(), 0);
  std::size_t i = 0;
  std::string probe;
  while (i < tokens.size()) {
    std::size_t matched = 0;
    std::uint32_t id = 0;
    for (std::size_t len = std::min(max_len_, tokens.size() - i); len >= 1; --len) {
      probe = join(tokens.subspan(i, len));
      if (auto it = phrase_ids_.find(probe); it != phrase_ids_.end()) {
        matched = len;
        id = it->second;
        break;
      }
    }
    if (matched == 0) {
      ++i;
      continue;
    }
    std::fill(out.begin() + static_cast<std::ptrdiff_t>(i), out.begin() + static_cast<std::ptrdiff_t>(i + matched), id);
    i += matched;
  }
  return out;
}

bool ConceptLexicon::matches_any(std::span<const std::string> tokens) const {
  const auto ids = link(tokens);
  return std::any_of(ids.begin(), ids.end(), [](std::uint32_t c) { return c != 0; });
}

std::uint64_t ConceptLexicon::hash() const {
  io::Fnv1a h;
  h.update("lexicon");
  for (const auto& [phrase, key] : phrases_) {
    h.update(phrase);
    h.update(std::string_view("\t", 1));
    h.update(key);
    h.update(std::string_view("\n", 1));
  }
  return h.digest();
}

std::vector<std::uint32_t> link_concepts(std::span<const std::string> tokens, const ConceptLexicon& lex) {
  return lex.link(tokens);
}

ConceptLexicon read_lexicon(std::istream& in, bool allow_bare_phrases) {
  std::vector<std::pair<std::string, std::string>> entries;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = io::chomp(line);
    if (io::trim(text).empty() || text.front() == '#') continue;
    const auto fields = io::split(text, '\t');
    if (fields.size() == 1 && allow_bare_phrases) {
      entries.emplace_back(std::string(fields[0]), std::string(io::trim(fields[0])));
      continue;
    }
    if (fields.size() != 2 || io::trim(fields[1]).empty()) {
      throw ParseError("lexicon line " + std::to_string(lineno) + ": expected phrase<TAB>concept_id");
    }
    entries.emplace_back(std::string(fields[0]), std::string(io::trim(fields[1])));
  }
  try {
    return ConceptLexicon(entries);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("lexicon: ") + e.what());
  }
}

ConceptLexicon load_lexicon(const std::filesystem::path& path, bool allow_bare_phrases) {
  auto in = io::open_input(path);
  return read_lexicon(in, allow_bare_phrases);
}

EncodedDocument encode(const Document& d, const Vocabulary& v, const ConceptLexicon& lex, std::size_t n) {
  if (n < 1) throw ConfigError("sequence length must be >= 1");
  auto tokens = tokenize(compose_text(d));
  // Linking runs on the untruncated stream so a phrase that straddles the
  // cut still labels its first tokens.
  const auto concepts = lex.link(tokens);
  EncodedDocument e;
  e.token_ids.assign(n, Vocabulary::kPad);
  e.concept_ids.assign(n, 0);
  const std::size_t keep = std::min(n, tokens.size());
  for (std::size_t i = 0; i < keep; ++i) {
    e.token_ids[i] = v.id(tokens[i]);
    e.concept_ids[i] = concepts[i];
  }
  return e;
}

}  // namespace triage::text
