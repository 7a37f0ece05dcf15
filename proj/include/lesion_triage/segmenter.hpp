#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "lesion_triage/image.hpp"

namespace lt::seg {

struct SegModelConfig {
  int input_size = 256;  // square, divisible by 2^depth
  int depth = 4;
  int base_channels = 16;
  int epochs = 30;
  double learning_rate = 1e-3;
  int batch_size = 8;
  std::uint64_t seed = 42;

  /// Throws Error(InvalidArgument).
  void validate() const;
};

nlohmann::ordered_json to_json(const SegModelConfig& c);
SegModelConfig seg_config_from_json(const nlohmann::json& j);

struct TrainPair {
  cv::Mat image;  // RGB
  SegmentationMask mask;
};

/// U-Net subject/background segmenter. Copies share the same immutable
/// weights; segment() may be called concurrently.
class SegModel {
 public:
  SegModel();
  ~SegModel();
  SegModel(const SegModel&);
  SegModel& operator=(const SegModel&);
  SegModel(SegModel&&) noexcept;
  SegModel& operator=(SegModel&&) noexcept;

  /// Throws Error(EmptyTrainingSet), Error(NonBinaryMask) or
  /// Error(DimensionMismatch) when a mask does not match its image.
  static SegModel train(std::span<const TrainPair> pairs, const SegModelConfig& config);

  /// Reads `path` and its `.json` sidecar. Throws Error(ModelNotLoaded).
  static SegModel load(const std::filesystem::path& path);
  /// Writes the weights to `path` and config plus training hash to `path`.json.
  void save(const std::filesystem::path& path) const;

  bool loaded() const;
  const SegModelConfig& config() const;
  /// Mean pixelwise binary cross-entropy per epoch.
  const std::vector<double>& loss_log() const;
  const std::string& training_hash() const;

  struct Impl;

  /// Per-pixel subject probability at the input resolution (CV_32FC1).
  cv::Mat probabilities(const cv::Mat& image) const;
  /// probabilities(image) >= 0.5. Throws Error(ModelNotLoaded).
  SegmentationMask segment(const cv::Mat& image) const;

 private:
  std::shared_ptr<Impl> impl_;
};

inline SegModel train_segmenter(std::span<const TrainPair> pairs, const SegModelConfig& config) {
  return SegModel::train(pairs, config);
}

}  // namespace lt::seg
