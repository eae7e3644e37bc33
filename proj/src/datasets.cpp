#include "triage/datasets.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "json.hpp"
#include "triage/error.hpp"
#include "triage/io.hpp"
#include "triage/log.hpp"
#include "triage/rng.hpp"

namespace triage::datasets {

namespace detail {
extern const char* const kStopwordData;
}

using nlohmann::json;

std::string_view strategy_name(SplitStrategy s) {
  return s == SplitStrategy::asynchronous ? "asynchronous" : "synchronous";
}

void SplitManifest::check_disjoint() const {
  std::unordered_map<std::string, const char*> seen;
  auto visit = [&](const std::vector<std::string>& part, const char* name) {
    for (const auto& pmid : part) {
      auto [it, inserted] = seen.try_emplace(pmid, name);
      if (!inserted) {
        throw ValidationError("pmid " + pmid + " appears in both " + it->second + " and " + name);
      }
    }
  };
  visit(train, "train");
  visit(validation, "validation");
  visit(test, "test");
}

void check_temporal(const SplitManifest& m, std::span<const Document> docs) {
  if (!m.cutoff_date) throw ValidationError("manifest has no cutoff date");
  std::unordered_map<std::string, const Document*> by_pmid;
  for (const auto& d : docs) by_pmid.emplace(d.pmid, &d);
  auto date_of = [&](const std::string& pmid) {
    auto it = by_pmid.find(pmid);
    if (it == by_pmid.end()) throw LookupError("manifest pmid " + pmid + " not in collection");
    if (!it->second->date) throw ValidationError("document " + pmid + " has no date");
    return *it->second->date;
  };
  for (const auto* part : {&m.train, &m.validation}) {
    for (const auto& pmid : *part) {
      if (date_of(pmid) >= *m.cutoff_date) {
        throw ValidationError("document " + pmid + " is dated on/after the cutoff but is in train/validation");
      }
    }
  }
  for (const auto& pmid : m.test) {
    if (date_of(pmid) < *m.cutoff_date) throw ValidationError("document " + pmid + " predates the cutoff but is in test");
  }
}

namespace {

// Distributes `total` across groups proportionally to `sizes` (largest
// remainder, ties to the earlier group).
std::vector<std::size_t> apportion(std::size_t total, const std::vector<std::size_t>& sizes) {
  const std::size_t n = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  std::vector<std::size_t> out(sizes.size(), 0);
  if (n == 0) return out;
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t g = 0; g < sizes.size(); ++g) {
    const double ideal = static_cast<double>(total) * static_cast<double>(sizes[g]) / static_cast<double>(n);
    out[g] = static_cast<std::size_t>(std::floor(ideal));
    assigned += out[g];
    remainders.emplace_back(ideal - std::floor(ideal), g);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i, ++assigned) ++out[remainders[i].second];
  return out;
}

std::vector<std::string> pmids_of(std::span<const Document> docs, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(docs[i].pmid);
  return out;
}

}  // namespace

SplitManifest synchronous_split(std::span<const Document> docs, SplitRatios ratios, std::uint64_t seed) {
  if (!(ratios.train > 0 && ratios.validation > 0 && ratios.test > 0)) {
    throw ConfigError("split ratios must all be positive");
  }
  if (std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split ratios must sum to 1");
  }
  if (docs.size() < 3) throw SizeError("synchronous split needs at least 3 documents, got " + std::to_string(docs.size()));

  const std::size_t n = docs.size();
  const auto n_val = static_cast<std::size_t>(std::llround(ratios.validation * static_cast<double>(n)));
  const auto n_test = static_cast<std::size_t>(std::llround(ratios.test * static_cast<double>(n)));
  if (n_val + n_test > n) throw SizeError("split ratios leave no training documents");

  // Strata: positive, negative, unlabeled.
  std::vector<std::vector<std::size_t>> strata(3);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& l = docs[i].label;
    strata[!l ? 2 : (*l == text::Label::positive ? 0 : 1)].push_back(i);
  }
  Rng rng(seed);
  for (auto& s : strata) rng.shuffle(std::span<std::size_t>(s));

  std::vector<std::size_t> sizes;
  for (const auto& s : strata) sizes.push_back(s.size());
  auto val_q = apportion(n_val, sizes);
  auto test_q = apportion(n_test, sizes);
  // Tiny strata can be over-assigned; hand the excess to a stratum with room.
  for (std::size_t g = 0; g < strata.size(); ++g) {
    while (val_q[g] + test_q[g] > sizes[g]) {
      auto& q = test_q[g] > 0 ? test_q : val_q;
      --q[g];
      for (std::size_t h = 0; h < strata.size(); ++h) {
        if (val_q[h] + test_q[h] < sizes[h]) {
          ++q[h];
          break;
        }
      }
    }
  }

  std::vector<std::size_t> train, val, test;
  for (std::size_t g = 0; g < strata.size(); ++g) {
    const auto& s = strata[g];
    val.insert(val.end(), s.begin(), s.begin() + static_cast<std::ptrdiff_t>(val_q[g]));
    test.insert(test.end(), s.begin() + static_cast<std::ptrdiff_t>(val_q[g]),
                s.begin() + static_cast<std::ptrdiff_t>(val_q[g] + test_q[g]));
    train.insert(train.end(), s.begin() + static_cast<std::ptrdiff_t>(val_q[g] + test_q[g]), s.end());
  }
  for (auto* part : {&train, &val, &test}) rng.shuffle(std::span<std::size_t>(*part));

  SplitManifest m;
  m.strategy = SplitStrategy::synchronous;
  m.seed = seed;
  m.train = pmids_of(docs, train);
  m.validation = pmids_of(docs, val);
  m.test = pmids_of(docs, test);
  m.check_disjoint();
  return m;
}

SplitManifest asynchronous_split(std::span<const Document> docs, Date cutoff, double val_fraction,
                                 std::uint64_t seed) {
  if (!cutoff.ok()) throw ConfigError("invalid cutoff date");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in [0, 1)");
  std::vector<std::size_t> old_docs, test;
  for (std::size_t i = 0; i < docs.size(); ++i) {
    if (!docs[i].date) throw ValidationError("document " + docs[i].pmid + " has no date");
    (*docs[i].date < cutoff ? old_docs : test).push_back(i);
  }
  std::vector<std::size_t> order = old_docs;
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(order));
  const auto n_val = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(order.size())));
  std::vector<char> is_val(docs.size(), 0);
  for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = 1;

  std::vector<std::size_t> train, val;
  for (auto i : old_docs) (is_val[i] ? val : train).push_back(i);
  if (test.empty()) warn("asynchronous split: no documents dated on or after " + text::format_date(cutoff) + "; test set is empty");

  SplitManifest m;
  m.strategy = SplitStrategy::asynchronous;
  m.seed = seed;
  m.cutoff_date = cutoff;
  m.train = pmids_of(docs, train);
  m.validation = pmids_of(docs, val);
  m.test = pmids_of(docs, test);
  return m;
}

SplitDocuments apply_manifest(const SplitManifest& m, std::span<const Document> docs) {
  std::unordered_map<std::string, const Document*> by_pmid;
  for (const auto& d : docs) by_pmid.emplace(d.pmid, &d);
  auto collect = [&](const std::vector<std::string>& pmids) {
    std::vector<Document> out;
    for (const auto& p : pmids) {
      auto it = by_pmid.find(p);
      if (it == by_pmid.end()) throw LookupError("manifest pmid " + p + " not in document collection");
      out.push_back(*it->second);
    }
    return out;
  };
  return {collect(m.train), collect(m.validation), collect(m.test)};
}

void write_manifest(const SplitManifest& m, std::ostream& out) {
  json header = {{"type", "manifest"},
                 {"version", 1},
                 {"strategy", strategy_name(m.strategy)},
                 {"seed", m.seed},
                 {"cutoff_date", m.cutoff_date ? json(text::format_date(*m.cutoff_date)) : json(nullptr)}};
  out << header.dump() << '\n';
  auto emit = [&](const std::vector<std::string>& part, const char* name) {
    for (const auto& pmid : part) out << json{{"pmid", pmid}, {"split", name}}.dump() << '\n';
  };
  emit(m.train, "train");
  emit(m.validation, "validation");
  emit(m.test, "test");
}

SplitManifest read_manifest(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  auto err = [&](const std::string& msg) { return ParseError("manifest line " + std::to_string(lineno) + ": " + msg); };
  auto parse = [&](const std::string& text) {
    try {
      auto j = json::parse(text);
      if (!j.is_object()) throw err("expected a JSON object");
      return j;
    } catch (const json::parse_error& e) {
      throw err(e.what());
    }
  };
  auto require = [&](const json& j, const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) throw err(std::string("missing field '") + key + "'");
    return *it;
  };

  SplitManifest m;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (io::trim(line).empty()) continue;
    const json j = parse(line);
    if (!have_header) {
      if (require(j, "type") != "manifest") throw err("not a manifest header");
      const auto& version = require(j, "version");
      if (!version.is_number_integer() || version.get<int>() != 1) throw err("unsupported manifest version");
      const auto& strategy = require(j, "strategy");
      if (strategy == "synchronous") {
        m.strategy = SplitStrategy::synchronous;
      } else if (strategy == "asynchronous") {
        m.strategy = SplitStrategy::asynchronous;
      } else {
        throw err("unknown strategy");
      }
      const auto& seed = require(j, "seed");
      if (!seed.is_number_integer()) throw err("seed must be an integer");
      m.seed = seed.get<std::uint64_t>();
      const auto& cutoff = require(j, "cutoff_date");
      if (!cutoff.is_null()) {
        if (!cutoff.is_string()) throw err("cutoff_date must be a string or null");
        m.cutoff_date = text::parse_date(cutoff.get<std::string>());
      }
      have_header = true;
      continue;
    }
    const auto& pmid = require(j, "pmid");
    const auto& split = require(j, "split");
    if (!pmid.is_string() || pmid.get<std::string>().empty()) throw err("pmid must be a non-empty string");
    if (split == "train") {
      m.train.push_back(pmid.get<std::string>());
    } else if (split == "validation") {
      m.validation.push_back(pmid.get<std::string>());
    } else if (split == "test") {
      m.test.push_back(pmid.get<std::string>());
    } else {
      throw err("split must be train, validation or test");
    }
  }
  if (!have_header) throw ParseError("manifest is empty (no header line)");
  m.check_disjoint();
  return m;
}

void save_manifest(const SplitManifest& m, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  write_manifest(m, out);
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

SplitManifest load_manifest(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  return read_manifest(in);
}

const std::unordered_set<std::string>& stopwords() {
  static const std::unordered_set<std::string> words = [] {
    std::unordered_set<std::string> out;
    std::istringstream in(detail::kStopwordData);
    for (std::string line; std::getline(in, line);) {
      const auto w = io::trim(line);
      if (!w.empty() && w.front() != '#') out.emplace(w);
    }
    return out;
  }();
  return words;
}

namespace {

bool is_number(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c); });
}

std::unordered_set<std::string> pmid_set(std::span<const Document> docs) {
  std::unordered_set<std::string> out;
  for (const auto& d : docs) out.insert(d.pmid);
  return out;
}

// Uniform sample of `count` indices, returned in ascending order.
std::vector<std::size_t> sample_indices(std::vector<std::size_t> candidates, std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  rng.shuffle(std::span<std::size_t>(candidates));
  candidates.resize(std::min(count, candidates.size()));
  std::sort(candidates.begin(), candidates.end());
  return candidates;
}

std::vector<Document> take_negatives(std::span<const Document> pool, const std::vector<std::size_t>& idx) {
  std::vector<Document> out;
  out.reserve(idx.size());
  for (auto i : idx) {
    out.push_back(pool[i]);
    out.back().label = text::Label::negative;
  }
  return out;
}

// Pool indices that are not positives, first occurrence of each pmid only.
std::vector<std::size_t> eligible(std::span<const Document> pool, std::span<const Document> positives) {
  const auto excluded = pmid_set(positives);
  std::unordered_set<std::string> seen;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (excluded.count(pool[i].pmid) || !seen.insert(pool[i].pmid).second) continue;
    out.push_back(i);
  }
  return out;
}

}  // namespace

std::vector<std::string> keyword_top_k(std::span<const Document> positives, std::size_t k,
                                       KeywordFrequency frequency) {
  if (k < 1) throw ConfigError("keyword count must be >= 1");
  const auto& stop = stopwords();
  std::unordered_map<std::string, std::uint64_t> freq;
  for (const auto& d : positives) {
    auto tokens = text::tokenize(text::compose_text(d));
    if (frequency == KeywordFrequency::document) {
      std::sort(tokens.begin(), tokens.end());
      tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());
    }
    for (auto& t : tokens) {
      if (stop.count(t) || is_number(t)) continue;
      ++freq[std::move(t)];
    }
  }
  std::vector<std::pair<std::string, std::uint64_t>> ranked(freq.begin(), freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    return a.second != b.second ? a.second > b.second : a.first < b.first;
  });
  if (ranked.size() < k) {
    warn("keyword extraction: only " + std::to_string(ranked.size()) + " candidate keywords, " +
         std::to_string(k) + " requested");
  }
  std::vector<std::string> out;
  for (std::size_t i = 0; i < ranked.size() && i < k; ++i) out.push_back(ranked[i].first);
  return out;
}

std::vector<Document> negative_sample_random(std::span<const Document> pool, std::size_t count,
                                             std::span<const Document> positives, std::uint64_t seed) {
  auto candidates = eligible(pool, positives);
  if (candidates.size() < count) {
    throw SizeError("random negative sampling needs " + std::to_string(count) + " documents, pool has " +
                    std::to_string(candidates.size()) + " after excluding positives");
  }
  return take_negatives(pool, sample_indices(std::move(candidates), count, seed));
}

std::vector<Document> negative_sample_ambiguous(const NegativeSampleSpec& spec,
                                                std::span<const Document> positives) {
  if (spec.gene_lexicon.empty() || spec.disease_lexicon.empty()) {
    throw ConfigError("ambiguous negative sampling needs non-empty gene and disease lexicons");
  }
  const auto keywords_list = keyword_top_k(positives, spec.keyword_count);
  const std::unordered_set<std::string> keywords(keywords_list.begin(), keywords_list.end());
  const auto base = eligible(spec.pool, positives);

  std::vector<char> keep(base.size(), 0);
  const auto count = static_cast<std::int64_t>(base.size());
#pragma omp parallel for schedule(dynamic, 32)
  for (std::int64_t i = 0; i < count; ++i) {
    const auto tokens = text::tokenize(text::compose_text(spec.pool[base[static_cast<std::size_t>(i)]]));
    const bool mention = spec.gene_lexicon.matches_any(tokens) && spec.disease_lexicon.matches_any(tokens);
    const bool keyword = std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) { return keywords.count(t) > 0; });
    keep[static_cast<std::size_t>(i)] = mention || keyword;
  }
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (keep[i]) candidates.push_back(base[i]);
  }
  if (candidates.size() < spec.count) {
    warn("ambiguous negative sampling: " + std::to_string(candidates.size()) + " candidates for " +
         std::to_string(spec.count) + " requested; returning all candidates");
  }
  return take_negatives(spec.pool, sample_indices(std::move(candidates), spec.count, spec.seed));
}

std::vector<Document> negative_sample(const NegativeSampleSpec& spec, std::span<const Document> positives) {
  if (spec.strategy == NegativeStrategy::random) {
    return negative_sample_random(spec.pool, spec.count, positives, spec.seed);
  }
  return negative_sample_ambiguous(spec, positives);
}

}  // namespace triage::datasets
