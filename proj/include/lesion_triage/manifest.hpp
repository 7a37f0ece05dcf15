#pragma once

#include <filesystem>
#include <istream>
#include <string>

#include "lesion_triage/dataset.hpp"

namespace lt {

/// JSON Lines manifest, one ImageRecord per line.
///
/// Required keys: id, path, label, provenance.source, verification, split,
/// width_px, height_px. Augmented records also carry base_id and recipe_id.
/// Optional keys mask_path and lesion_mask_path name subject and lesion
/// masks. Any other key is preserved verbatim and written back after the
/// known keys.
///
/// Throws Error(MalformedLine) with the 1-based line number,
/// Error(UnknownClass) for a bad label token and Error(DuplicateId).
Dataset load_manifest(const std::filesystem::path& path);
Dataset parse_manifest(std::istream& in);

/// Canonical single-line JSON for one record.
std::string format_record(const ImageRecord& record);
std::string format_manifest(const Dataset& dataset);

/// Writes through a temp file in the same directory and renames it over
/// `path`, so readers never observe a partial manifest.
void save_manifest(const Dataset& dataset, const std::filesystem::path& path);

/// Atomic write of arbitrary bytes (temp file + rename).
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

}  // namespace lt
