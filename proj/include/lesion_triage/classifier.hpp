#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>
#include <opencv2/core.hpp>

#include "lesion_triage/augment.hpp"
#include "lesion_triage/dataset.hpp"
#include "lesion_triage/probabilities.hpp"

namespace lt::cls {

enum class Backbone { InceptionResNetV2, SmallCNN };
std::string_view token(Backbone b);
Backbone parse_backbone(std::string_view tok);

struct ClsModelConfig {
  Backbone backbone = Backbone::InceptionResNetV2;
  int input_size = 299;
  int epochs = 150;
  double optimizer_lr = 0.01;
  double optimizer_epsilon = 0.1;
  int batch_size = 32;
  std::uint64_t seed = 42;
  bool pretrained = true;
  std::string pretrained_weights;  // torch archive for the backbone
  bool freeze_backbone = false;
  int width = 16;  // SmallCNN first-block channels

  /// Throws Error(InvalidArgument).
  void validate() const;
  /// SmallCNN settings for CPU-sized experiments.
  static ClsModelConfig small_cnn(int input_size = 64);
};

nlohmann::ordered_json to_json(const ClsModelConfig& c);
ClsModelConfig cls_config_from_json(const nlohmann::json& j);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;
};

struct TrainingSample {
  std::string id;
  cv::Mat image;  // RGB
  DiseaseClass label = DiseaseClass::NonDiseased;
};

/// Six-way image classifier. Copies share the same immutable weights.
class ClsModel {
 public:
  ClsModel();
  ~ClsModel();
  ClsModel(const ClsModel&);
  ClsModel& operator=(const ClsModel&);
  ClsModel(ClsModel&&) noexcept;
  ClsModel& operator=(ClsModel&&) noexcept;

  /// Adam on cross-entropy; every sample gets a fresh random transform per
  /// epoch. Samples are ordered by id before the seeded shuffle so input
  /// order does not matter. Throws Error(EmptyTrainingSet).
  static ClsModel train(std::span<const TrainingSample> samples, const ClsModelConfig& config,
                        const augment::TransformConfig& transforms);

  /// Untrained network, e.g. to inspect topology. Throws
  /// Error(PretrainedWeightsMissing) when pretrained weights are requested
  /// but absent.
  static ClsModel create(const ClsModelConfig& config);

  static ClsModel load(const std::filesystem::path& path);
  /// Weights to `path`, sidecar to `path`.json.
  void save(const std::filesystem::path& path) const;
  /// CSV epoch,loss,accuracy.
  void write_epoch_log(const std::filesystem::path& path) const;

  bool loaded() const;
  const ClsModelConfig& config() const;
  const std::vector<EpochStats>& epoch_log() const;
  const std::string& dataset_hash() const;

  /// Throws Error(ModelNotLoaded).
  ClassProbabilities classify(const cv::Mat& image) const;
  std::vector<ClassProbabilities> classify_batch(std::span<const cv::Mat> images) const;

  struct Impl;
  const Impl& impl() const;
  explicit ClsModel(std::shared_ptr<Impl> impl);

 private:
  std::shared_ptr<Impl> impl_;
};

/// Loads every record's image below `root` and trains. Throws
/// Error(EmptyTrainingSet), Error(UnverifiedAugmentedRecord) or
/// Error(IneligibleRecord) for unlabeled records.
ClsModel train_classifier(const Dataset& train, const std::filesystem::path& root,
                          const ClsModelConfig& config, const augment::TransformConfig& transforms);

}  // namespace lt::cls
