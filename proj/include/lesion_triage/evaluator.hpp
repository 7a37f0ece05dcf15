#pragma once

#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lesion_triage/dataset.hpp"

namespace lt::eval {

/// One-vs-rest tally for a single class.
struct ConfusionCounts {
  DiseaseClass cls = DiseaseClass::GenitalWarts;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionCounts&) const = default;
};

/// Throws Error(LengthMismatch) or Error(EmptyInput).
ConfusionCounts confusion_counts(std::span<const DiseaseClass> predictions,
                                 std::span<const DiseaseClass> labels, DiseaseClass cls);

struct Interval {
  double low = 0.0;
  double high = 1.0;
  bool operator==(const Interval&) const = default;
};

/// Clopper-Pearson interval from beta quantiles. low is exactly 0 when
/// successes == 0 and high exactly 1 when successes == trials.
/// Throws Error(InvalidArgument) unless 0 <= successes <= trials, trials >= 1
/// and 0 < level < 1.
Interval exact_binomial_ci(std::size_t successes, std::size_t trials, double level = 0.95);

/// A report row. Metrics whose denominator is zero stay empty and their
/// names are listed in `undefined`.
struct MetricRow {
  DiseaseClass cls = DiseaseClass::GenitalWarts;
  ConfusionCounts counts;
  std::size_t n_images = 0;  // tp + fn
  std::optional<double> recall, precision, specificity, f1;
  std::optional<Interval> recall_ci, precision_ci, specificity_ci;
  double ci_level = 0.95;
  std::vector<std::string> undefined;
};

MetricRow compute_metrics(const ConfusionCounts& counts, double ci_level = 0.95);

/// Unweighted mean of the defined F1 values. Throws Error(EmptyRows) when
/// there is nothing to average.
double overall_accuracy(std::span<const MetricRow> rows);

enum class ScoreMode { Initial, Refined };
std::string_view token(ScoreMode mode);
ScoreMode parse_score_mode(std::string_view tok);

/// One line of the per-image prediction log
/// (CSV: image_id,label,initial_pred,refined_pred,confidence).
struct PredictionEntry {
  std::string image_id;
  DiseaseClass label = DiseaseClass::NonDiseased;
  DiseaseClass initial_pred = DiseaseClass::NonDiseased;
  DiseaseClass refined_pred = DiseaseClass::NonDiseased;
  double confidence = 0.0;

  bool operator==(const PredictionEntry&) const = default;
};

std::string format_prediction_log(std::span<const PredictionEntry> entries);
std::vector<PredictionEntry> parse_prediction_log(std::istream& in);

struct EvaluationReport {
  ScoreMode mode = ScoreMode::Refined;
  std::size_t n_images = 0;
  std::vector<MetricRow> rows;  // fixed class order
  std::optional<double> overall;
  std::vector<std::string> notes;
};

/// Rows for all six classes plus overall accuracy from a prediction log.
/// Adds the published-F1 discrepancy note when the counts coincide with the
/// published validation table.
EvaluationReport score_predictions(std::span<const PredictionEntry> log, ScoreMode mode,
                                   double ci_level = 0.95);

enum class ReportFormat { Markdown, Json, Csv };
/// Throws Error(UnknownFormat).
ReportFormat parse_report_format(std::string_view tok);

/// Deterministic rendering; every ratio rounded half-up to 3 decimals.
std::string render_report(const EvaluationReport& report, ReportFormat format);

double round_half_up(double value, int decimals);

}  // namespace lt::eval
