#include "lesion_triage/segmenter.hpp"

#include <algorithm>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/hash.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/nn/modules.hpp"

namespace lt::seg {

namespace fs = std::filesystem;

void SegModelConfig::validate() const {
  if (depth < 1 || depth > 6) throw Error(ErrorKind::InvalidArgument, "depth must be in [1, 6]");
  if (input_size <= 0 || input_size % (1 << depth) != 0)
    throw Error(ErrorKind::InvalidArgument, fmt::format("input_size {} is not divisible by 2^{}", input_size, depth));
  if (base_channels < 1) throw Error(ErrorKind::InvalidArgument, "base_channels must be positive");
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be positive");
  if (!(learning_rate > 0)) throw Error(ErrorKind::InvalidArgument, "learning_rate must be positive");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be positive");
}

nlohmann::ordered_json to_json(const SegModelConfig& c) {
  return {{"input_size", c.input_size}, {"depth", c.depth},         {"base_channels", c.base_channels},
          {"epochs", c.epochs},         {"learning_rate", c.learning_rate}, {"batch_size", c.batch_size},
          {"seed", c.seed}};
}

SegModelConfig seg_config_from_json(const nlohmann::json& j) {
  SegModelConfig c;
  c.input_size = j.value("input_size", c.input_size);
  c.depth = j.value("depth", c.depth);
  c.base_channels = j.value("base_channels", c.base_channels);
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  return c;
}

struct SegModel::Impl {
  SegModelConfig config;
  mutable nn::UNet net{nullptr};
  std::vector<double> losses;
  std::string hash;
};

SegModel::SegModel() = default;
SegModel::~SegModel() = default;
SegModel::SegModel(const SegModel&) = default;
SegModel& SegModel::operator=(const SegModel&) = default;
SegModel::SegModel(SegModel&&) noexcept = default;
SegModel& SegModel::operator=(SegModel&&) noexcept = default;

namespace {

torch::Tensor mask_tensor(const SegmentationMask& m, int size) {
  const SegmentationMask r = resize_mask(m, size, size);
  cv::Mat f;
  r.pixels().convertTo(f, CV_32FC1);
  return torch::from_blob(f.data, {1, 1, size, size}, torch::kFloat32).clone();
}

const SegModel::Impl& require(const std::shared_ptr<SegModel::Impl>& impl) {
  if (!impl || !impl->net) throw Error(ErrorKind::ModelNotLoaded, "segmentation model");
  return *impl;
}

}  // namespace

SegModel SegModel::train(std::span<const TrainPair> pairs, const SegModelConfig& config) {
  config.validate();
  if (pairs.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no segmentation pairs");
  const int s = config.input_size;

  std::vector<torch::Tensor> xs, ys;
  std::string digest = to_json(config).dump();
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto& p = pairs[i];
    if (p.mask.empty() || p.mask.width() != p.image.cols || p.mask.height() != p.image.rows)
      throw Error(ErrorKind::DimensionMismatch, fmt::format("pair {}: mask and image sizes differ", i));
    SegmentationMask::from_binary(p.mask.pixels());
    xs.push_back(nn::to_input(p.image, s));
    ys.push_back(mask_tensor(p.mask, s));
    const cv::Mat img = p.image.isContinuous() ? p.image : p.image.clone();
    digest += sha256_hex({reinterpret_cast<const char*>(img.data), img.total() * img.elemSize()});
    const cv::Mat m = p.mask.pixels().isContinuous() ? p.mask.pixels() : p.mask.pixels().clone();
    digest += sha256_hex({reinterpret_cast<const char*>(m.data), m.total()});
  }
  const torch::Tensor X = torch::cat(xs, 0);
  const torch::Tensor Y = torch::cat(ys, 0);

  torch::manual_seed(config.seed);
  auto impl = std::make_shared<Impl>();
  impl->config = config;
  impl->hash = sha256_hex(digest);
  impl->net = nn::UNet(config.depth, config.base_channels);
  impl->net->train();
  torch::optim::Adam opt(impl->net->parameters(), torch::optim::AdamOptions(config.learning_rate));

  const std::size_t n = pairs.size();
  std::vector<std::int64_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(nn::mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      const auto idx = torch::tensor(std::vector<std::int64_t>(order.begin() + start, order.begin() + end));
      const auto logits = impl->net->forward(X.index_select(0, idx));
      const auto loss = torch::binary_cross_entropy_with_logits(logits, Y.index_select(0, idx));
      opt.zero_grad();
      loss.backward();
      opt.step();
      total += loss.item<double>() * static_cast<double>(end - start);
    }
    impl->losses.push_back(total / static_cast<double>(n));
  }
  impl->net->eval();
  SegModel out;
  out.impl_ = std::move(impl);
  return out;
}

SegModel SegModel::load(const fs::path& path) {
  fs::path sidecar = path;
  sidecar += ".json";
  if (!fs::exists(path) || !fs::exists(sidecar))
    throw Error(ErrorKind::ModelNotLoaded, "missing segmentation model " + path.string());
  auto impl = std::make_shared<Impl>();
  try {
    const auto meta = nlohmann::json::parse(read_file(sidecar));
    impl->config = seg_config_from_json(meta.at("config"));
    impl->config.validate();
    impl->hash = meta.value("training_hash", "");
    impl->losses = meta.value("loss_log", std::vector<double>{});
    impl->net = nn::UNet(impl->config.depth, impl->config.base_channels);
    torch::serialize::InputArchive ar;
    ar.load_from(path.string());
    impl->net->load(ar);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ModelNotLoaded, fmt::format("{}: {}", path.string(), e.what()));
  }
  impl->net->eval();
  SegModel out;
  out.impl_ = std::move(impl);
  return out;
}

void SegModel::save(const fs::path& path) const {
  const auto& impl = require(impl_);
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive ar;
  impl.net->save(ar);
  ar.save_to(path.string());
  nlohmann::ordered_json meta;
  meta["kind"] = "segmenter";
  meta["config"] = to_json(impl.config);
  meta["training_hash"] = impl.hash;
  meta["loss_log"] = impl.losses;
  fs::path sidecar = path;
  sidecar += ".json";
  write_file_atomic(sidecar, meta.dump(2) + "\n");
}

bool SegModel::loaded() const { return impl_ && impl_->net; }
const SegModelConfig& SegModel::config() const { return require(impl_).config; }
const std::vector<double>& SegModel::loss_log() const { return require(impl_).losses; }
const std::string& SegModel::training_hash() const { return require(impl_).hash; }

cv::Mat SegModel::probabilities(const cv::Mat& image) const {
  const auto& impl = require(impl_);
  torch::NoGradGuard guard;
  const int s = impl.config.input_size;
  const auto prob = torch::sigmoid(impl.net->forward(nn::to_input(image, s))).contiguous();
  cv::Mat small(s, s, CV_32FC1);
  std::memcpy(small.data, prob.data_ptr<float>(), sizeof(float) * s * s);
  if (image.cols == s && image.rows == s) return small;
  cv::Mat full;
  cv::resize(small, full, image.size(), 0, 0, cv::INTER_LINEAR);
  return full;
}

SegmentationMask SegModel::segment(const cv::Mat& image) const {
  const cv::Mat p = probabilities(image);
  cv::Mat m = p >= 0.5f;
  return SegmentationMask::from_nonzero(m);
}

}  // namespace lt::seg
