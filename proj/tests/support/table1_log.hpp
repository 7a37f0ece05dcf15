#pragma once

#include <array>
#include <vector>

#include <fmt/format.h>

#include "lesion_triage/evaluator.hpp"

namespace lt::test {

// A 239-image label x prediction matrix whose one-vs-rest tallies equal the
// published validation table. Rows are labels, columns predictions, both in
// kAllClasses order.
inline constexpr std::array<std::array<int, kNumClasses>, kNumClasses> kTable1Matrix = {{
    {43, 0, 0, 0, 0, 2},
    {0, 40, 3, 0, 0, 0},
    {0, 2, 23, 1, 3, 0},
    {1, 4, 0, 35, 0, 0},
    {5, 0, 0, 0, 32, 0},
    {1, 0, 0, 0, 0, 44},
}};

/// Refined predictions follow the matrix; initial predictions are the label
/// rotated by one class so the two scoring modes differ.
inline std::vector<eval::PredictionEntry> table1_prediction_log() {
  std::vector<eval::PredictionEntry> log;
  int serial = 0;
  for (std::size_t l = 0; l < kNumClasses; ++l)
    for (std::size_t p = 0; p < kNumClasses; ++p)
      for (int k = 0; k < kTable1Matrix[l][p]; ++k) {
        eval::PredictionEntry e;
        e.image_id = fmt::format("val-{:03d}", serial++);
        e.label = kAllClasses[l];
        e.refined_pred = kAllClasses[p];
        e.initial_pred = kAllClasses[(l + 1) % kNumClasses];
        e.confidence = 0.5 + 0.001 * (serial % 400);
        log.push_back(e);
      }
  return log;
}

}  // namespace lt::test
