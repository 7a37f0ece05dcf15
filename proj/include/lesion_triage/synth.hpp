#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <opencv2/core.hpp>

#include "lesion_triage/dataset.hpp"
#include "lesion_triage/image.hpp"

namespace lt::synth {

// Procedural stand-in imagery for desk-scale training and tests: a
// skin-toned ellipse ("subject") on a noisy background, with a
// class-specific lesion motif drawn inside the subject. NonDiseased scenes
// carry no lesion.

struct SceneOptions {
  int size = 64;
  // Draw lesion motifs of other classes on the background, outside the
  // subject.
  bool clutter = false;
  int clutter_count = 3;
};

struct Scene {
  cv::Mat image;  // RGB
  SegmentationMask subject;
  SegmentationMask lesion;  // empty raster of zeros for NonDiseased
  DiseaseClass label = DiseaseClass::NonDiseased;
  std::optional<BBox> lesion_box;
};

Scene make_scene(DiseaseClass label, std::uint64_t seed, const SceneOptions& options = {});

struct WriteOptions {
  std::size_t per_class = 10;
  std::uint64_t seed = 1;
  SceneOptions scene;
  ProvenanceSource source = ProvenanceSource::Clinician;
  std::string id_prefix = "syn";
};

/// Renders `per_class` scenes for every class under `dir` (images/, masks/)
/// and returns manifest records with paths relative to `dir`. Subject masks
/// go in mask_path, lesion masks in lesion_mask_path.
Dataset write_dataset(const std::filesystem::path& dir, const WriteOptions& options);

}  // namespace lt::synth
