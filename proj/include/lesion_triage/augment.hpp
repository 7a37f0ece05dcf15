#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "lesion_triage/dataset.hpp"
#include "lesion_triage/image.hpp"

namespace lt::augment {

/// A lesion cut out of a clinical image. `rgba` is cropped to the mask's
/// bounding box; alpha is 255 on lesion pixels and 0 elsewhere.
struct LesionPattern {
  cv::Mat rgba;  // CV_8UC4, RGB + alpha
  DiseaseClass source_class = DiseaseClass::GenitalWarts;
  std::string source_id;
  cv::Vec3d mean_color;  // mean RGB over lesion pixels
};

LesionPattern extract_pattern(const cv::Mat& image, const SegmentationMask& lesion_mask,
                              DiseaseClass source_class, std::string source_id = {});

struct OverlayRecipe {
  // Normalised position of the pattern centre on the base image; must fall
  // on a subject pixel.
  double center_x = 0.5;
  double center_y = 0.5;
  double scale = 1.0;  // [0.1, 3.0]
  double rotation_deg = 0.0;
  cv::Vec3i complexion_shift{0, 0, 0};  // added to pattern RGB before blending
  bool flip_h = false;
  bool flip_v = false;
  std::string recipe_id;
  std::uint64_t seed = 0;
};

nlohmann::json to_json(const OverlayRecipe& recipe);
OverlayRecipe recipe_from_json(const nlohmann::json& j);

/// Shift that moves the pattern mean `weight` of the way toward the mean
/// colour of the base subject region.
cv::Vec3i complexion_shift_toward(const LesionPattern& pattern, const cv::Mat& base_image,
                                  const SegmentationMask& subject, double weight = 0.5);

struct CompositeOptions {
  // Width of the linear alpha ramp at the pattern edge; 0 disables it.
  int feather_px = 3;
  // Directory (relative to the manifest) that augmented images live in.
  std::string image_dir = "augmented";
};

struct Composite {
  ImageRecord record;
  cv::Mat image;      // RGB, same size as the base image
  cv::Mat footprint;  // CV_8UC1, 1 where the pattern touched the base
  OverlayRecipe recipe;
};

/// Blends a transformed pattern onto a non-diseased base image. Pixels
/// outside the footprint are copied from the base unchanged.
Composite compose_overlay(const ImageRecord& base, const cv::Mat& base_image,
                          const SegmentationMask& base_subject_mask, const LesionPattern& pattern,
                          const OverlayRecipe& recipe, const CompositeOptions& options = {});

/// Online augmentation ranges. Every range is a non-negative half-width:
/// rotation in degrees, shifts as a fraction of the side, and the
/// multiplicative factors (rescale, brightness, size, colour) around 1.
struct TransformConfig {
  double rotation_range = 0.0;
  double rescale_range = 0.0;
  double shift_range_x = 0.0;
  double shift_range_y = 0.0;
  double brightness_range = 0.0;
  bool allow_flip_h = false;
  bool allow_flip_v = false;
  double size_jitter = 0.0;   // independent x / y stretch
  double color_jitter = 0.0;  // per-channel gain

  /// Throws Error(InvalidArgument) on negative ranges or factors that could
  /// reach zero.
  void validate() const;

  /// Moderate defaults for desk-scale training.
  static TransformConfig training_default();
};

nlohmann::ordered_json to_json(const TransformConfig& c);
/// Missing keys keep their defaults. Throws Error(InvalidArgument).
TransformConfig transform_config_from_json(const nlohmann::json& j);

struct TransformParams {
  double rotation_deg = 0.0;
  double rescale = 1.0;
  double shift_x = 0.0;
  double shift_y = 0.0;
  double brightness = 1.0;
  bool flip_h = false;
  bool flip_v = false;
  double stretch_x = 1.0;
  double stretch_y = 1.0;
  cv::Vec3d color{1.0, 1.0, 1.0};
};

TransformParams sample_transform(const TransformConfig& config, std::uint64_t seed);

/// Resizes to `output_size`, then applies the geometric and photometric
/// parts. Photometric gains round half away from zero and clamp to [0, 255].
cv::Mat apply_transform(const cv::Mat& image, const TransformParams& params, cv::Size output_size);

cv::Mat random_transform(const cv::Mat& image, const TransformConfig& config, std::uint64_t seed,
                         cv::Size output_size);

/// Source of lesion patterns for the compositor. The shipped implementation
/// draws from a library of extracted patterns; a learned generator can be
/// plugged in behind the same interface.
class PatternGenerator {
 public:
  virtual ~PatternGenerator() = default;
  virtual bool can_generate(DiseaseClass c) const = 0;
  virtual LesionPattern generate(DiseaseClass c, std::mt19937_64& rng) = 0;
};

class PatternLibrary final : public PatternGenerator {
 public:
  explicit PatternLibrary(std::span<const LesionPattern> patterns);
  bool can_generate(DiseaseClass c) const override;
  LesionPattern generate(DiseaseClass c, std::mt19937_64& rng) override;

 private:
  std::map<DiseaseClass, std::vector<LesionPattern>> by_class_;
};

struct BaseImage {
  ImageRecord record;  // label NonDiseased
  cv::Mat image;
  SegmentationMask subject;
};

struct BalanceOptions {
  double rotation_range = 45.0;
  double min_scale = 0.7;
  double max_scale = 1.3;
  double complexion_weight = 0.5;
  CompositeOptions composite;
};

struct BalanceResult {
  Dataset dataset;                  // input records followed by new ones
  std::vector<Composite> generated;
};

/// Tops every disease class up to `target` records with Unverified
/// composites. Throws Error(InsufficientSources) when a deficient class has
/// no patterns or there are no bases, and Error(InvalidArgument) when a
/// class already exceeds the target.
BalanceResult balance_classes(const Dataset& dataset, std::span<const BaseImage> bases,
                              PatternGenerator& patterns, std::size_t target, std::uint64_t seed,
                              const BalanceOptions& options = {});

BalanceResult balance_classes(const Dataset& dataset, std::span<const BaseImage> bases,
                              std::span<const LesionPattern> patterns, std::size_t target,
                              std::uint64_t seed, const BalanceOptions& options = {});

}  // namespace lt::augment
