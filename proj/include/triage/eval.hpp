#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "triage/text.hpp"

namespace triage::eval {

using text::Label;

struct ConfusionCounts {
  std::uint64_t tp = 0, fp = 0, fn = 0, tn = 0;

  std::uint64_t total() const { return tp + fp + fn + tn; }
  bool operator==(const ConfusionCounts&) const = default;
};

struct LabeledPmid {
  std::string pmid;
  Label label = Label::negative;
};

// Positive is the triage-relevant class. Both lists must cover the same
// pmids exactly once; otherwise AlignmentError lists the offenders.
ConfusionCounts confusion(std::span<const LabeledPmid> predictions, std::span<const LabeledPmid> gold);
// Index-aligned variant.
ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> gold);

// Percentages (x100), unrounded. Any 0/0 ratio is defined as 0.
struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Metrics precision_recall_f1(const ConfusionCounts& c);

// Three decimals, as in the published result tables.
std::string format_percent(double value);

struct RunResult {
  std::string variant;
  std::string dataset;
  Metrics metrics;
};

enum class Measure { f1, precision, recall };
std::string_view measure_name(Measure m);

// Variant x dataset matrix of one measure. Variants keep first-appearance
// order; datasets follow the given list.
struct ReportTable {
  Measure measure = Measure::f1;
  std::vector<std::string> variants;
  std::vector<std::string> datasets;
  std::vector<std::vector<std::optional<double>>> cells;
};

ReportTable ablation_table(std::span<const RunResult> runs, std::span<const std::string> datasets, Measure measure);

// Missing cells render as "—".
std::string render_csv(const ReportTable& t);
std::string render_text(const ReportTable& t);

struct Prediction {
  std::string pmid;
  Label label = Label::negative;
  double score = 0.0;  // positive-class probability
};

// pmid<TAB>label<TAB>score, score printed with 17 significant digits.
void write_predictions(std::span<const Prediction> predictions, const std::filesystem::path& path);
std::vector<Prediction> read_predictions(const std::filesystem::path& path);

}  // namespace triage::eval
