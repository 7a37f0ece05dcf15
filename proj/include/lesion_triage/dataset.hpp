#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace lt {

/// The six triage classes. Enumerator order is the fixed class order used
/// for tie-breaking, tensor indices and report rows.
enum class DiseaseClass : std::uint8_t {
  GenitalWarts = 0,
  HerpesEruption,
  PenileCancer,
  PenileCandidiasis,
  SyphiliticChancre,
  NonDiseased,
};

inline constexpr std::size_t kNumClasses = 6;

inline constexpr std::array<DiseaseClass, kNumClasses> kAllClasses = {
    DiseaseClass::GenitalWarts,      DiseaseClass::HerpesEruption,
    DiseaseClass::PenileCancer,      DiseaseClass::PenileCandidiasis,
    DiseaseClass::SyphiliticChancre, DiseaseClass::NonDiseased,
};

constexpr std::size_t index_of(DiseaseClass c) { return static_cast<std::size_t>(c); }
constexpr bool is_disease(DiseaseClass c) { return c != DiseaseClass::NonDiseased; }

/// Manifest token: warts|hsv|cancer|candidiasis|syphilis|none.
std::string_view token(DiseaseClass c);
/// Row label as printed in reports ("Genital Warts", ..., "Non-Diseased").
std::string_view display_name(DiseaseClass c);
/// Parses a manifest token; throws Error(UnknownClass).
DiseaseClass parse_class(std::string_view tok);
std::optional<DiseaseClass> try_parse_class(std::string_view tok);

enum class ProvenanceSource { Clinician, WebScraped, AppSourced, Augmented };
enum class Verification { Unverified, ExpertVerified, Rejected };
enum class SplitAssignment { Unassigned, Train, Validation };

std::string_view token(ProvenanceSource s);
std::string_view token(Verification v);
std::string_view token(SplitAssignment s);
ProvenanceSource parse_source(std::string_view tok);
Verification parse_verification(std::string_view tok);
SplitAssignment parse_split(std::string_view tok);

struct Provenance {
  ProvenanceSource source = ProvenanceSource::Clinician;
  std::string origin_note;
  // Set for Augmented records only.
  std::string base_id;
  std::string recipe_id;

  bool operator==(const Provenance&) const = default;
};

struct ImageRecord {
  std::string id;
  std::string path;
  std::optional<DiseaseClass> label;  // nullopt = unlabeled
  Provenance provenance;
  Verification verification = Verification::Unverified;
  SplitAssignment split = SplitAssignment::Unassigned;
  int width_px = 0;
  int height_px = 0;
  // Optional subject segmentation mask and lesion mask (paths relative to
  // the manifest directory).
  std::string mask_path;
  std::string lesion_mask_path;
  // Keys not understood by this version, kept for round-tripping.
  nlohmann::ordered_json extra = nlohmann::ordered_json::object();
  nlohmann::ordered_json provenance_extra = nlohmann::ordered_json::object();

  bool is_augmented() const { return provenance.source == ProvenanceSource::Augmented; }

  bool operator==(const ImageRecord&) const = default;
};

/// Labeled, not rejected, and ExpertVerified if augmented.
bool training_eligible(const ImageRecord& r);

struct Dataset {
  std::vector<ImageRecord> records;
  int manifest_version = 1;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
  const ImageRecord* find(std::string_view id) const;

  bool operator==(const Dataset&) const = default;
};

using ClassCounts = std::map<DiseaseClass, std::size_t>;

/// Count of labeled records per class; every class is present as a key.
ClassCounts class_distribution(const Dataset& dataset);

}  // namespace lt
