#include "lesion_triage/classifier.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/hash.hpp"
#include "lesion_triage/image.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/nn/modules.hpp"

namespace lt::cls {

namespace fs = std::filesystem;

std::string_view token(Backbone b) {
  switch (b) {
    case Backbone::InceptionResNetV2: return "inception_resnet_v2";
    case Backbone::SmallCNN: return "small_cnn";
  }
  return "?";
}

Backbone parse_backbone(std::string_view tok) {
  if (tok == "inception_resnet_v2" || tok == "irv2") return Backbone::InceptionResNetV2;
  if (tok == "small_cnn" || tok == "smallcnn") return Backbone::SmallCNN;
  throw Error(ErrorKind::InvalidArgument, fmt::format("unknown backbone '{}'", tok));
}

void ClsModelConfig::validate() const {
  if (backbone == Backbone::InceptionResNetV2 && input_size < 75)
    throw Error(ErrorKind::InvalidArgument, "inception_resnet_v2 needs input_size >= 75");
  if (backbone == Backbone::SmallCNN && input_size < 8)
    throw Error(ErrorKind::InvalidArgument, "small_cnn needs input_size >= 8");
  if (epochs < 1) throw Error(ErrorKind::InvalidArgument, "epochs must be positive");
  if (!(optimizer_lr > 0)) throw Error(ErrorKind::InvalidArgument, "optimizer_lr must be positive");
  if (!(optimizer_epsilon > 0)) throw Error(ErrorKind::InvalidArgument, "optimizer_epsilon must be positive");
  if (batch_size < 1) throw Error(ErrorKind::InvalidArgument, "batch_size must be positive");
  if (width < 1) throw Error(ErrorKind::InvalidArgument, "width must be positive");
}

ClsModelConfig ClsModelConfig::small_cnn(int input_size) {
  ClsModelConfig c;
  c.backbone = Backbone::SmallCNN;
  c.input_size = input_size;
  c.epochs = 30;
  c.batch_size = 8;
  c.pretrained = false;
  return c;
}

nlohmann::ordered_json to_json(const ClsModelConfig& c) {
  return {{"backbone", std::string(token(c.backbone))},
          {"input_size", c.input_size},
          {"epochs", c.epochs},
          {"optimizer_lr", c.optimizer_lr},
          {"optimizer_epsilon", c.optimizer_epsilon},
          {"batch_size", c.batch_size},
          {"seed", c.seed},
          {"pretrained", c.pretrained},
          {"pretrained_weights", c.pretrained_weights},
          {"freeze_backbone", c.freeze_backbone},
          {"width", c.width}};
}

ClsModelConfig cls_config_from_json(const nlohmann::json& j) {
  ClsModelConfig c;
  if (j.contains("backbone")) c.backbone = parse_backbone(j.at("backbone").get<std::string>());
  c.input_size = j.value("input_size", c.input_size);
  c.epochs = j.value("epochs", c.epochs);
  c.optimizer_lr = j.value("optimizer_lr", c.optimizer_lr);
  c.optimizer_epsilon = j.value("optimizer_epsilon", c.optimizer_epsilon);
  c.batch_size = j.value("batch_size", c.batch_size);
  c.seed = j.value("seed", c.seed);
  c.pretrained = j.value("pretrained", c.pretrained);
  c.pretrained_weights = j.value("pretrained_weights", c.pretrained_weights);
  c.freeze_backbone = j.value("freeze_backbone", c.freeze_backbone);
  c.width = j.value("width", c.width);
  return c;
}

ClsModel::ClsModel() = default;
ClsModel::~ClsModel() = default;
ClsModel::ClsModel(const ClsModel&) = default;
ClsModel& ClsModel::operator=(const ClsModel&) = default;
ClsModel::ClsModel(ClsModel&&) noexcept = default;
ClsModel& ClsModel::operator=(ClsModel&&) noexcept = default;
ClsModel::ClsModel(std::shared_ptr<Impl> impl) : impl_(std::move(impl)) {}

const ClsModel::Impl& ClsModel::impl() const {
  if (!impl_ || !impl_->net) throw Error(ErrorKind::ModelNotLoaded, "classification model");
  return *impl_;
}

namespace {

void load_pretrained(nn::ClassifierNet& net, const ClsModelConfig& config) {
  if (config.pretrained_weights.empty() || !fs::exists(config.pretrained_weights))
    throw Error(ErrorKind::PretrainedWeightsMissing,
                config.pretrained_weights.empty() ? std::string("no pretrained_weights path configured")
                                                  : config.pretrained_weights);
  try {
    torch::serialize::InputArchive ar;
    ar.load_from(config.pretrained_weights);
    net.load(ar);
  } catch (const std::exception& e) {
    throw Error(ErrorKind::PretrainedWeightsMissing, fmt::format("{}: {}", config.pretrained_weights, e.what()));
  }
}

std::shared_ptr<ClsModel::Impl> fresh(const ClsModelConfig& config) {
  config.validate();
  torch::manual_seed(config.seed);
  auto impl = std::make_shared<ClsModel::Impl>();
  impl->config = config;
  impl->net = nn::make_classifier_net(config);
  if (config.pretrained) load_pretrained(*impl->net, config);
  return impl;
}

ClassProbabilities from_logits(const torch::Tensor& row) {
  const auto d = row.to(torch::kFloat64).contiguous();
  return softmax_probabilities(std::span<const double>(d.data_ptr<double>(), kNumClasses));
}

fs::path with_suffix(const fs::path& p, std::string_view suffix) {
  fs::path out = p;
  out += std::string(suffix);
  return out;
}

}  // namespace

ClsModel ClsModel::create(const ClsModelConfig& config) {
  auto impl = fresh(config);
  impl->net->eval();
  return ClsModel(std::move(impl));
}

ClsModel ClsModel::train(std::span<const TrainingSample> samples, const ClsModelConfig& config,
                         const augment::TransformConfig& transforms) {
  if (samples.empty()) throw Error(ErrorKind::EmptyTrainingSet, "no training samples");
  transforms.validate();
  auto impl = fresh(config);
  const int s = config.input_size;

  // The sampler owns the order: sort by id, then shuffle per epoch.
  std::vector<const TrainingSample*> sorted;
  for (const auto& x : samples) sorted.push_back(&x);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });

  std::vector<cv::Mat> base;
  std::vector<std::int64_t> labels;
  std::string digest = to_json(config).dump();
  for (const auto* x : sorted) {
    if (x->image.empty() || x->image.type() != CV_8UC3)
      throw Error(ErrorKind::UndecodableImage, "training sample " + x->id);
    cv::Mat r;
    cv::resize(x->image, r, {s, s}, 0, 0,
               x->image.cols > s || x->image.rows > s ? cv::INTER_AREA : cv::INTER_LINEAR);
    base.push_back(r);
    labels.push_back(static_cast<std::int64_t>(index_of(x->label)));
    digest += x->id + ":" + std::string(lt::token(x->label)) + ":" +
              sha256_hex({reinterpret_cast<const char*>(r.data), r.total() * r.elemSize()}) + "\n";
  }
  impl->dataset_hash = sha256_hex(digest);

  auto& net = *impl->net;
  if (config.freeze_backbone)
    for (auto& p : net.backbone_parameters()) p.set_requires_grad(false);
  std::vector<torch::Tensor> params;
  for (auto& p : net.parameters())
    if (p.requires_grad()) params.push_back(p);
  torch::optim::Adam opt(params, torch::optim::AdamOptions(config.optimizer_lr).eps(config.optimizer_epsilon));
  net.train();

  const std::size_t n = base.size();
  std::vector<std::size_t> order(n);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::mt19937_64 rng(nn::mix_seed(config.seed, static_cast<std::uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      const std::size_t end = std::min(n, start + config.batch_size);
      std::vector<cv::Mat> batch;
      std::vector<std::int64_t> y;
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t i = order[k];
        batch.push_back(augment::random_transform(base[i], transforms,
                                                  nn::mix_seed(config.seed, static_cast<std::uint64_t>(epoch), i),
                                                  {s, s}));
        y.push_back(labels[i]);
      }
      const auto target = torch::tensor(y, torch::kInt64);
      const auto logits = net.forward(nn::to_batch(batch, s));
      const auto loss = torch::nn::functional::cross_entropy(logits, target);
      opt.zero_grad();
      loss.backward();
      opt.step();
      loss_sum += loss.item<double>() * static_cast<double>(end - start);
      correct += static_cast<std::size_t>(logits.argmax(1).eq(target).sum().item<std::int64_t>());
    }
    impl->log.push_back({epoch + 1, loss_sum / static_cast<double>(n), static_cast<double>(correct) / n});
  }
  net.eval();
  return ClsModel(std::move(impl));
}

ClsModel ClsModel::load(const fs::path& path) {
  const fs::path sidecar = with_suffix(path, ".json");
  if (!fs::exists(path) || !fs::exists(sidecar))
    throw Error(ErrorKind::ModelNotLoaded, "missing classification model " + path.string());
  auto impl = std::make_shared<Impl>();
  try {
    const auto meta = nlohmann::json::parse(read_file(sidecar));
    const auto order = meta.at("class_order").get<std::vector<std::string>>();
    for (std::size_t i = 0; i < kNumClasses; ++i)
      if (order.size() != kNumClasses || parse_class(order[i]) != kAllClasses[i])
        throw Error(ErrorKind::ModelNotLoaded, "class order in " + sidecar.string() + " differs");
    impl->config = cls_config_from_json(meta.at("config"));
    impl->config.validate();
    impl->dataset_hash = meta.value("dataset_hash", "");
    for (const auto& e : meta.value("epoch_log", nlohmann::json::array()))
      impl->log.push_back({e.at(0).get<int>(), e.at(1).get<double>(), e.at(2).get<double>()});
    impl->net = nn::make_classifier_net(impl->config);
    torch::serialize::InputArchive ar;
    ar.load_from(path.string());
    impl->net->load(ar);
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorKind::ModelNotLoaded, fmt::format("{}: {}", path.string(), e.what()));
  }
  impl->net->eval();
  return ClsModel(std::move(impl));
}

void ClsModel::save(const fs::path& path) const {
  const auto& m = impl();
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  torch::serialize::OutputArchive ar;
  m.net->save(ar);
  ar.save_to(path.string());

  const fs::path log_path = with_suffix(path, ".epochs.csv");
  write_epoch_log(log_path);
  nlohmann::ordered_json meta;
  meta["kind"] = "classifier";
  auto order = nlohmann::ordered_json::array();
  for (auto c : kAllClasses) order.push_back(std::string(lt::token(c)));
  meta["class_order"] = order;
  meta["config"] = to_json(m.config);
  meta["dataset_hash"] = m.dataset_hash;
  meta["epoch_log_path"] = log_path.filename().string();
  auto log = nlohmann::ordered_json::array();
  for (const auto& e : m.log) log.push_back({e.epoch, e.loss, e.accuracy});
  meta["epoch_log"] = log;
  write_file_atomic(with_suffix(path, ".json"), meta.dump(2) + "\n");
}

void ClsModel::write_epoch_log(const fs::path& path) const {
  std::string out = "epoch,loss,accuracy\n";
  for (const auto& e : impl().log) out += fmt::format("{},{:.6f},{:.6f}\n", e.epoch, e.loss, e.accuracy);
  write_file_atomic(path, out);
}

bool ClsModel::loaded() const { return impl_ && impl_->net; }
const ClsModelConfig& ClsModel::config() const { return impl().config; }
const std::vector<EpochStats>& ClsModel::epoch_log() const { return impl().log; }
const std::string& ClsModel::dataset_hash() const { return impl().dataset_hash; }

ClassProbabilities ClsModel::classify(const cv::Mat& image) const {
  const auto& m = impl();
  torch::NoGradGuard guard;
  return from_logits(m.net->forward(nn::to_input(image, m.config.input_size))[0]);
}

std::vector<ClassProbabilities> ClsModel::classify_batch(std::span<const cv::Mat> images) const {
  const auto& m = impl();
  if (images.empty()) return {};
  torch::NoGradGuard guard;
  const auto logits = m.net->forward(nn::to_batch(images, m.config.input_size));
  std::vector<ClassProbabilities> out;
  for (std::int64_t i = 0; i < logits.size(0); ++i) out.push_back(from_logits(logits[i]));
  return out;
}

ClsModel train_classifier(const Dataset& train, const fs::path& root, const ClsModelConfig& config,
                          const augment::TransformConfig& transforms) {
  if (train.empty()) throw Error(ErrorKind::EmptyTrainingSet, "training set is empty");
  std::vector<TrainingSample> samples;
  for (const auto& r : train.records) {
    if (r.is_augmented() && r.verification != Verification::ExpertVerified)
      throw Error(ErrorKind::UnverifiedAugmentedRecord, r.id);
    if (!r.label) throw Error(ErrorKind::IneligibleRecord, r.id + " has no label");
    samples.push_back({r.id, load_image(root / r.path), *r.label});
  }
  return ClsModel::train(samples, config, transforms);
}

}  // namespace lt::cls
