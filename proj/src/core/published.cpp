#include "lesion_triage/published.hpp"

#include <array>
#include <cmath>

#include <fmt/format.h>

namespace lt::eval {

namespace {

using DC = DiseaseClass;

// clang-format off
const std::array<PublishedRow, kNumClasses> kTable = {{
  {{DC::GenitalWarts,      43, 7, 187, 2}, 0.956, 0.860, 0.964, 0.909, {0.849, 0.995}, {0.764, 0.956}, {0.927, 0.985}},
  {{DC::HerpesEruption,    40, 6, 190, 3}, 0.930, 0.870, 0.969, 0.917, {0.810, 0.985}, {0.772, 0.967}, {0.935, 0.989}},
  {{DC::PenileCancer,      23, 3, 207, 6}, 0.793, 0.885, 0.986, 0.932, {0.603, 0.920}, {0.762, 0.999}, {0.959, 0.997}},
  {{DC::PenileCandidiasis, 35, 1, 198, 5}, 0.875, 0.972, 0.995, 0.983, {0.732, 0.958}, {0.919, 0.999}, {0.972, 0.999}},
  {{DC::SyphiliticChancre, 32, 3, 199, 5}, 0.865, 0.914, 0.985, 0.948, {0.712, 0.955}, {0.822, 0.999}, {0.957, 0.999}},
  {{DC::NonDiseased,       44, 2, 192, 1}, 0.978, 0.957, 0.990, 0.973, {0.882, 0.999}, {0.852, 0.995}, {0.963, 0.999}},
}};
// clang-format on

}  // namespace

std::span<const PublishedRow> published_validation_table() { return kTable; }

bool matches_published_counts(std::span<const MetricRow> rows) {
  if (rows.size() != kTable.size()) return false;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].counts != kTable[i].counts) return false;
  return true;
}

std::vector<std::string> published_f1_discrepancy(std::span<const MetricRow> rows) {
  std::vector<std::string> notes;
  if (!matches_published_counts(rows)) return notes;
  double computed = 0.0, printed = 0.0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    computed += rows[i].f1.value_or(0.0);
    printed += kTable[i].f1;
  }
  computed /= static_cast<double>(rows.size());
  printed /= static_cast<double>(rows.size());
  notes.push_back(fmt::format(
      "F1 discrepancy: counts match the published validation table, but F1 recomputed from them "
      "(mean {:.3f}) differs from the published F1 column (mean {:.3f}); the published F1 values "
      "are not the harmonic mean of the published precision and recall.",
      round_half_up(computed, 3), round_half_up(printed, 3)));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double f1 = rows[i].f1.value_or(0.0);
    if (std::abs(round_half_up(f1, 3) - kTable[i].f1) > 0.0005)
      notes.push_back(fmt::format("F1 discrepancy: {} computed {:.3f}, published {:.3f}",
                                  display_name(rows[i].cls), round_half_up(f1, 3), kTable[i].f1));
  }
  return notes;
}

}  // namespace lt::eval
