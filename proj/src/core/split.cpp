#include "lesion_triage/split.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include "lesion_triage/error.hpp"

namespace lt {

namespace {

// Absorbs representation error such as 100 * (1 - 0.91) = 8.999999999999996.
constexpr double kQuotaEps = 1e-9;

}  // namespace

std::map<DiseaseClass, std::size_t> validation_quotas(const ClassCounts& counts,
                                                      double train_fraction) {
  const double val_fraction = 1.0 - train_fraction;
  std::size_t total = 0;
  std::size_t floors = 0;
  std::vector<std::pair<double, DiseaseClass>> remainders;
  std::map<DiseaseClass, std::size_t> quotas;
  for (auto c : kAllClasses) {
    auto it = counts.find(c);
    const std::size_t n = it == counts.end() ? 0 : it->second;
    total += n;
    const double exact = static_cast<double>(n) * val_fraction;
    const double fl = std::floor(exact + kQuotaEps);
    quotas[c] = static_cast<std::size_t>(fl);
    floors += quotas[c];
    if (n > 0) remainders.emplace_back(std::max(0.0, exact - fl), c);
  }
  const auto target =
      static_cast<std::size_t>(std::floor(static_cast<double>(total) * val_fraction + 0.5 + kQuotaEps));
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first + kQuotaEps; });
  for (std::size_t i = 0; floors < target && i < remainders.size(); ++i, ++floors)
    ++quotas[remainders[i].second];
  return quotas;
}

SplitResult stratified_split(const Dataset& dataset, double train_fraction, std::uint64_t seed,
                             bool include_augmented_in_validation) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(ErrorKind::InvalidArgument, "train_fraction must lie in (0, 1)");
  if (dataset.empty()) throw Error(ErrorKind::EmptyClass, "dataset has no labeled records");
  for (const auto& r : dataset.records)
    if (!training_eligible(r)) throw Error(ErrorKind::IneligibleRecord, r.id);

  const auto quotas = validation_quotas(class_distribution(dataset), train_fraction);

  std::vector<bool> in_validation(dataset.size(), false);
  for (auto c : kAllClasses) {
    std::vector<std::size_t> pool;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      const auto& r = dataset.records[i];
      if (*r.label != c) continue;
      if (!include_augmented_in_validation && r.is_augmented()) continue;
      pool.push_back(i);
    }
    std::sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) {
      return dataset.records[a].id < dataset.records[b].id;
    });
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(index_of(c))};
    std::mt19937_64 rng(seq);
    std::shuffle(pool.begin(), pool.end(), rng);
    const std::size_t take = std::min(quotas.at(c), pool.size());
    for (std::size_t k = 0; k < take; ++k) in_validation[pool[k]] = true;
  }

  SplitResult out;
  out.train.manifest_version = dataset.manifest_version;
  out.validation.manifest_version = dataset.manifest_version;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    ImageRecord r = dataset.records[i];
    if (in_validation[i]) {
      r.split = SplitAssignment::Validation;
      out.validation.records.push_back(std::move(r));
    } else {
      r.split = SplitAssignment::Train;
      out.train.records.push_back(std::move(r));
    }
  }
  return out;
}

}  // namespace lt
