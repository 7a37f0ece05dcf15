#pragma once

// Torch-level building blocks. Including this header pulls in libtorch;
// the rest of the public API does not.

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

#include "lesion_triage/classifier.hpp"
#include "lesion_triage/segmenter.hpp"

namespace lt::nn {

/// A classifier split at its last convolutional layer so saliency methods
/// can reach the activations.
struct ClassifierNet : torch::nn::Module {
  /// Last convolutional activations, [N, C, h, w].
  virtual torch::Tensor features(torch::Tensor x) = 0;
  /// Logits [N, classes] from features().
  virtual torch::Tensor head(torch::Tensor f) = 0;
  /// Parameters that belong to the backbone (everything but the head).
  virtual std::vector<torch::Tensor> backbone_parameters() = 0;

  torch::Tensor forward(torch::Tensor x) { return head(features(x)); }
};

/// Three conv-BN-ReLU blocks, pooling after the first two, and a linear
/// head over concatenated global average and max pooling.
struct SmallCNN : ClassifierNet {
  SmallCNN(int width, int classes);
  torch::Tensor features(torch::Tensor x) override;
  torch::Tensor head(torch::Tensor f) override;
  std::vector<torch::Tensor> backbone_parameters() override;

  torch::nn::Sequential body{nullptr};
  torch::nn::Linear fc{nullptr};
};

/// Inception-ResNet-v2 (stem, 10 x block35, reduction A, 20 x block17,
/// reduction B, 10 x block8, 1536-channel 1x1 conv). Input >= 75 px.
struct InceptionResNetV2 : ClassifierNet {
  explicit InceptionResNetV2(int classes);
  torch::Tensor features(torch::Tensor x) override;
  torch::Tensor head(torch::Tensor f) override;
  std::vector<torch::Tensor> backbone_parameters() override;

  torch::nn::Sequential body{nullptr};
  torch::nn::Dropout dropout{nullptr};
  torch::nn::Linear fc{nullptr};
};

/// Encoder-decoder with skip connections and a single-logit output.
struct UNetImpl : torch::nn::Module {
  UNetImpl(int depth, int base_channels);
  torch::Tensor forward(torch::Tensor x);

  std::vector<torch::nn::Sequential> down;
  torch::nn::Sequential bottleneck{nullptr};
  std::vector<torch::nn::ConvTranspose2d> up;
  std::vector<torch::nn::Sequential> merge;
  torch::nn::Conv2d out{nullptr};
};
TORCH_MODULE(UNet);

std::shared_ptr<ClassifierNet> make_classifier_net(const cls::ClsModelConfig& config);

/// RGB CV_8UC3 -> float [1, 3, size, size] scaled to [-1, 1].
torch::Tensor to_input(const cv::Mat& rgb, int size);
/// Stacks to_input() results.
torch::Tensor to_batch(std::span<const cv::Mat> images, int size);

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

}  // namespace lt::nn

namespace lt::cls {

struct ClsModel::Impl {
  ClsModelConfig config;
  std::shared_ptr<nn::ClassifierNet> net;
  std::vector<EpochStats> log;
  std::string dataset_hash;
};

}  // namespace lt::cls
