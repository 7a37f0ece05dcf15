#pragma once

#include <array>
#include <span>

#include <nlohmann/json.hpp>

#include "lesion_triage/dataset.hpp"

namespace lt {

/// Softmax output over the six classes in kAllClasses order.
struct ClassProbabilities {
  std::array<double, kNumClasses> probs{};
  DiseaseClass predicted = DiseaseClass::GenitalWarts;

  double at(DiseaseClass c) const { return probs[index_of(c)]; }
  double confidence() const { return at(predicted); }
};

/// Numerically stable softmax; ties in the argmax go to the earlier class.
/// Throws Error(LengthMismatch) unless there are exactly six logits.
ClassProbabilities softmax_probabilities(std::span<const double> logits);

nlohmann::ordered_json to_json(const ClassProbabilities& p);

}  // namespace lt
