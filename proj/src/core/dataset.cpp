#include "lesion_triage/dataset.hpp"

#include <algorithm>

#include "lesion_triage/error.hpp"

namespace lt {

namespace {

constexpr std::array<std::string_view, kNumClasses> kClassTokens = {
    "warts", "hsv", "cancer", "candidiasis", "syphilis", "none"};

constexpr std::array<std::string_view, kNumClasses> kClassNames = {
    "Genital Warts",      "Herpes Eruption", "Penile Cancer",
    "Penile Candidiasis", "Syphilis",        "Non-Diseased"};

}  // namespace

std::string_view token(DiseaseClass c) { return kClassTokens[index_of(c)]; }
std::string_view display_name(DiseaseClass c) { return kClassNames[index_of(c)]; }

std::optional<DiseaseClass> try_parse_class(std::string_view tok) {
  for (std::size_t i = 0; i < kNumClasses; ++i)
    if (kClassTokens[i] == tok) return kAllClasses[i];
  return std::nullopt;
}

DiseaseClass parse_class(std::string_view tok) {
  if (auto c = try_parse_class(tok)) return *c;
  throw Error(ErrorKind::UnknownClass, std::string(tok));
}

std::string_view token(ProvenanceSource s) {
  switch (s) {
    case ProvenanceSource::Clinician: return "clinician";
    case ProvenanceSource::WebScraped: return "web";
    case ProvenanceSource::AppSourced: return "app";
    case ProvenanceSource::Augmented: return "augmented";
  }
  return "";
}

std::string_view token(Verification v) {
  switch (v) {
    case Verification::Unverified: return "unverified";
    case Verification::ExpertVerified: return "verified";
    case Verification::Rejected: return "rejected";
  }
  return "";
}

std::string_view token(SplitAssignment s) {
  switch (s) {
    case SplitAssignment::Unassigned: return "unassigned";
    case SplitAssignment::Train: return "train";
    case SplitAssignment::Validation: return "val";
  }
  return "";
}

ProvenanceSource parse_source(std::string_view tok) {
  for (auto s : {ProvenanceSource::Clinician, ProvenanceSource::WebScraped,
                 ProvenanceSource::AppSourced, ProvenanceSource::Augmented})
    if (token(s) == tok) return s;
  throw Error(ErrorKind::InvalidArgument, "unknown provenance source '" + std::string(tok) + "'");
}

Verification parse_verification(std::string_view tok) {
  for (auto v : {Verification::Unverified, Verification::ExpertVerified, Verification::Rejected})
    if (token(v) == tok) return v;
  throw Error(ErrorKind::InvalidArgument, "unknown verification state '" + std::string(tok) + "'");
}

SplitAssignment parse_split(std::string_view tok) {
  for (auto s : {SplitAssignment::Unassigned, SplitAssignment::Train, SplitAssignment::Validation})
    if (token(s) == tok) return s;
  throw Error(ErrorKind::InvalidArgument, "unknown split '" + std::string(tok) + "'");
}

bool training_eligible(const ImageRecord& r) {
  if (!r.label || r.verification == Verification::Rejected) return false;
  return !r.is_augmented() || r.verification == Verification::ExpertVerified;
}

const ImageRecord* Dataset::find(std::string_view id) const {
  auto it = std::find_if(records.begin(), records.end(),
                         [&](const ImageRecord& r) { return r.id == id; });
  return it == records.end() ? nullptr : &*it;
}

ClassCounts class_distribution(const Dataset& dataset) {
  ClassCounts counts;
  for (auto c : kAllClasses) counts[c] = 0;
  for (const auto& r : dataset.records)
    if (r.label) ++counts[*r.label];
  return counts;
}

}  // namespace lt
