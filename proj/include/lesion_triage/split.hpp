#pragma once

#include <cstdint>
#include <map>

#include "lesion_triage/dataset.hpp"

namespace lt {

struct SplitResult {
  Dataset train;
  Dataset validation;
};

/// Per-class validation quotas for a stratified split: each class gets
/// floor(n_c * (1 - train_fraction)), then the classes with the largest
/// fractional remainders get one more until the total reaches
/// round(N * (1 - train_fraction)). Ties go to the earlier class.
std::map<DiseaseClass, std::size_t> validation_quotas(const ClassCounts& counts,
                                                      double train_fraction);

/// Seeded stratified split. Records are ordered by id before sampling so
/// the result does not depend on manifest order. Output records carry
/// their new split assignment and keep input order within each partition.
///
/// With include_augmented_in_validation = false, augmented records always
/// go to train and a class's validation quota is capped by its number of
/// non-augmented records.
///
/// Throws Error(InvalidArgument) for a fraction outside (0, 1),
/// Error(IneligibleRecord) for unlabeled, rejected or unverified augmented
/// records, and Error(EmptyClass) when there are no records at all.
SplitResult stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed,
                             bool include_augmented_in_validation = true);

}  // namespace lt
