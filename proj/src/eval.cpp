#include "triage/eval.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <map>
#include <sstream>
#include <unordered_map>

#include "triage/error.hpp"
#include "triage/io.hpp"

namespace triage::eval {

ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold) {
  if (predictions.size() != gold.size()) {
    throw AlignmentError("predictions (" + std::to_string(predictions.size()) + ") and gold (" +
                         std::to_string(gold.size()) + ") differ in length");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const bool p = predictions[i] == Label::positive;
    const bool g = gold[i] == Label::positive;
    if (p && g) ++c.tp;
    else if (p) ++c.fp;
    else if (g) ++c.fn;
    else ++c.tn;
  }
  return c;
}

ConfusionCounts confusion(std::span<const LabeledPmid> predictions, std::span<const LabeledPmid> gold) {
  std::unordered_map<std::string, Label> gold_by;
  std::vector<std::string> problems;
  for (const auto& g : gold) {
    if (!gold_by.emplace(g.pmid, g.label).second) problems.push_back(g.pmid + " (duplicate in gold)");
  }
  std::unordered_map<std::string, Label> pred_by;
  for (const auto& p : predictions) {
    if (!pred_by.emplace(p.pmid, p.label).second) problems.push_back(p.pmid + " (duplicate in predictions)");
    else if (!gold_by.count(p.pmid)) problems.push_back(p.pmid + " (missing from gold)");
  }
  for (const auto& g : gold) {
    if (!pred_by.count(g.pmid)) problems.push_back(g.pmid + " (missing from predictions)");
  }
  if (!problems.empty()) {
    std::string msg = "prediction/gold pmid sets differ: ";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += (i ? ", " : "") + problems[i];
    if (problems.size() > 20) msg += ", ... (" + std::to_string(problems.size()) + " total)";
    throw AlignmentError(msg);
  }
  ConfusionCounts c;
  for (const auto& g : gold) {
    const bool p = pred_by.at(g.pmid) == Label::positive;
    const bool t = g.label == Label::positive;
    if (p && t) ++c.tp;
    else if (p) ++c.fp;
    else if (t) ++c.fn;
    else ++c.tn;
  }
  return c;
}

Metrics precision_recall_f1(const ConfusionCounts& c) {
  auto ratio = [](std::uint64_t num, std::uint64_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  const double p = ratio(c.tp, c.tp + c.fp);
  const double r = ratio(c.tp, c.tp + c.fn);
  const double f = (p + r) == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  return {100.0 * p, 100.0 * r, 100.0 * f};
}

std::string format_percent(double value) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", value);
  return buf;
}

std::string_view measure_name(Measure m) {
  switch (m) {
    case Measure::precision: return "precision";
    case Measure::recall: return "recall";
    case Measure::f1: break;
  }
  return "f1";
}

ReportTable ablation_table(std::span<const RunResult> runs, std::span<const std::string> datasets, Measure measure) {
  ReportTable t;
  t.measure = measure;
  t.datasets.assign(datasets.begin(), datasets.end());
  std::map<std::pair<std::string, std::string>, double> values;
  for (const auto& r : runs) {
    if (std::find(t.variants.begin(), t.variants.end(), r.variant) == t.variants.end()) t.variants.push_back(r.variant);
    const double v = measure == Measure::f1 ? r.metrics.f1
                     : measure == Measure::precision ? r.metrics.precision
                                                     : r.metrics.recall;
    values[{r.variant, r.dataset}] = v;
  }
  for (const auto& variant : t.variants) {
    auto& row = t.cells.emplace_back();
    for (const auto& ds : t.datasets) {
      auto it = values.find({variant, ds});
      row.push_back(it == values.end() ? std::nullopt : std::optional<double>(it->second));
    }
  }
  return t;
}

namespace {

constexpr std::string_view kMissing = "\xE2\x80\x94";  // em dash

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string cell_text(const std::optional<double>& v) { return v ? format_percent(*v) : std::string(kMissing); }

// Display width in code points.
std::size_t columns(const std::string& s) {
  return static_cast<std::size_t>(std::count_if(s.begin(), s.end(), [](char c) {
    return (static_cast<unsigned char>(c) & 0xC0) != 0x80;
  }));
}

}  // namespace

std::string render_csv(const ReportTable& t) {
  std::string out = csv_field(std::string(measure_name(t.measure)));
  for (const auto& d : t.datasets) out += "," + csv_field(d);
  out += "\n";
  for (std::size_t i = 0; i < t.variants.size(); ++i) {
    out += csv_field(t.variants[i]);
    for (const auto& c : t.cells[i]) out += "," + cell_text(c);
    out += "\n";
  }
  return out;
}

std::string render_text(const ReportTable& t) {
  std::vector<std::vector<std::string>> grid;
  grid.push_back({std::string(measure_name(t.measure))});
  for (const auto& d : t.datasets) grid[0].push_back(d);
  for (std::size_t i = 0; i < t.variants.size(); ++i) {
    auto& row = grid.emplace_back();
    row.push_back(t.variants[i]);
    for (const auto& c : t.cells[i]) row.push_back(cell_text(c));
  }
  std::vector<std::size_t> width(grid[0].size(), 0);
  for (const auto& row : grid) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], columns(row[c]));
  }
  std::string out;
  for (const auto& row : grid) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      const std::size_t pad = width[c] - columns(row[c]);
      if (c == 0) {
        line += row[c] + std::string(pad, ' ');
      } else {
        line += "  " + std::string(pad, ' ') + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out += line + "\n";
  }
  return out;
}

void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path) {
  auto out = io::open_output(path);
  char buf[64];
  for (const auto& p : predictions) {
    std::snprintf(buf, sizeof buf, "%.17g", p.score);
    out << p.pmid << '\t' << text::label_name(p.label) << '\t' << buf << '\n';
  }
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::vector<Prediction> read_predictions(const std::filesystem::path& path) {
  auto in = io::open_input(path);
  std::vector<Prediction> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto text = io::chomp(line);
    if (text.empty()) continue;
    const auto f = io::split(text, '\t');
    if (f.size() != 3 || f[0].empty()) {
      throw ParseError("predictions line " + std::to_string(lineno) + ": expected pmid<TAB>label<TAB>score");
    }
    Prediction p;
    p.pmid = std::string(f[0]);
    try {
      p.label = text::parse_label(f[1]);
    } catch (const ParseError& e) {
      throw ParseError("predictions line " + std::to_string(lineno) + ": " + e.what());
    }
    auto [ptr, ec] = std::from_chars(f[2].data(), f[2].data() + f[2].size(), p.score);
    if (ec != std::errc{} || ptr != f[2].data() + f[2].size()) {
      throw ParseError("predictions line " + std::to_string(lineno) + ": bad score");
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace triage::eval
