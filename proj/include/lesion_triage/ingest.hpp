#pragma once

#include <filesystem>
#include <string>

#include "lesion_triage/dataset.hpp"

namespace lt {

struct IngestOptions {
  ProvenanceSource source = ProvenanceSource::Clinician;
  Verification verification = Verification::Unverified;
  std::string origin_note;
};

/// Builds records from a directory laid out as `<root>/<class token>/*.png`
/// (also jpg, jpeg, bmp); images under `<root>/unlabeled/` get no label.
/// A sibling `<stem>.mask.png` becomes mask_path and `<stem>.lesion.png`
/// lesion_mask_path. Ids are `<token>-<stem>`, records are ordered by path
/// and their paths are written relative to `manifest_dir`.
///
/// Throws Error(UnknownClass) for a subdirectory that is not a class token,
/// Error(UndecodableImage) for an unreadable image and Error(DuplicateId).
Dataset ingest_directory(const std::filesystem::path& root, const std::filesystem::path& manifest_dir,
                         const IngestOptions& options = {});

}  // namespace lt
