#include "lesion_triage/probabilities.hpp"

#include <algorithm>
#include <cmath>

#include "lesion_triage/error.hpp"

namespace lt {

ClassProbabilities softmax_probabilities(std::span<const double> logits) {
  if (logits.size() != kNumClasses)
    throw Error(ErrorKind::LengthMismatch, "expected " + std::to_string(kNumClasses) + " logits");
  const double top = *std::max_element(logits.begin(), logits.end());
  ClassProbabilities out;
  double sum = 0.0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out.probs[i] = std::exp(logits[i] - top);
    sum += out.probs[i];
  }
  std::size_t best = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    out.probs[i] /= sum;
    if (out.probs[i] > out.probs[best]) best = i;
  }
  out.predicted = kAllClasses[best];
  return out;
}

nlohmann::ordered_json to_json(const ClassProbabilities& p) {
  nlohmann::ordered_json probs;
  for (auto c : kAllClasses) probs[std::string(token(c))] = p.at(c);
  return {{"predicted", std::string(token(p.predicted))}, {"confidence", p.confidence()}, {"probs", probs}};
}

}  // namespace lt
