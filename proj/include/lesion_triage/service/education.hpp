#pragma once

#include <array>
#include <filesystem>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesion_triage/dataset.hpp"

namespace lt::service {

struct EducationEntry {
  DiseaseClass cls = DiseaseClass::NonDiseased;
  std::string title;
  std::string symptoms_text;
  std::string confirmatory_testing_text;
  std::string treatment_text;
  std::vector<std::string> resource_links;
};

nlohmann::ordered_json to_json(const EducationEntry& e);

/// Parses the YAML content file (top-level map keyed by class token).
/// Throws Error(MissingContent) naming the class when an entry or one of
/// its text fields is absent, and Error(Io) when the file cannot be read.
std::array<EducationEntry, kNumClasses> load_education(const std::filesystem::path& path);

/// Thread-safe holder that validates on construction and on reload().
class EducationLibrary {
 public:
  explicit EducationLibrary(std::filesystem::path path);

  /// Re-reads the file. On failure the previous content stays in place and
  /// the error propagates.
  void reload();
  EducationEntry get(DiseaseClass c) const;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  mutable std::mutex mu_;
  std::array<EducationEntry, kNumClasses> entries_;
};

}  // namespace lt::service
