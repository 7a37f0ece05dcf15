#pragma once

#include <span>
#include <string>
#include <vector>

#include "lesion_triage/evaluator.hpp"

namespace lt::eval {

/// A row of the published 239-image validation table, values as printed.
struct PublishedRow {
  ConfusionCounts counts;
  double recall, precision, specificity, f1;
  Interval recall_ci, precision_ci, specificity_ci;
};

std::span<const PublishedRow> published_validation_table();

inline constexpr double kPublishedOverallAccuracy = 0.944;
inline constexpr std::size_t kPublishedValidationSize = 239;

/// True when every row's counts equal the published counts.
bool matches_published_counts(std::span<const MetricRow> rows);

/// Notes explaining that the printed F1 column cannot be derived from the
/// printed counts: one summary line plus one line per differing class.
std::vector<std::string> published_f1_discrepancy(std::span<const MetricRow> rows);

}  // namespace lt::eval
