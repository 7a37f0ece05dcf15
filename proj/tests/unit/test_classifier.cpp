#include <algorithm>
#include <fstream>
#include <random>

#include "support/torch_doctest.hpp"
#include "lesion_triage/classifier.hpp"
#include "lesion_triage/error.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/nn/modules.hpp"
#include "lesion_triage/synth.hpp"
#include "support/test_support.hpp"

using namespace lt;
using namespace lt::cls;

namespace {

ClsModelConfig tiny(int epochs) {
  auto c = ClsModelConfig::small_cnn(32);
  c.epochs = epochs;
  c.batch_size = 3;
  c.width = 8;
  c.optimizer_lr = 1e-2;
  c.optimizer_epsilon = 1e-8;
  c.seed = 3;
  return c;
}

std::vector<TrainingSample> one_per_class() {
  std::vector<TrainingSample> out;
  for (auto c : kAllClasses) {
    const auto s = synth::make_scene(c, 40 + index_of(c), {.size = 32});
    out.push_back({fmt::format("s-{}", token(c)), s.image, c});
  }
  return out;
}

cv::Mat noise(int w, int h, std::uint64_t seed) {
  cv::Mat m(h, w, CV_8UC3);
  cv::RNG(seed).fill(m, cv::RNG::UNIFORM, cv::Scalar::all(0), cv::Scalar::all(256));
  return m;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected lt::Error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("default configuration carries the published optimizer settings") {
  const ClsModelConfig c;
  CHECK(c.backbone == Backbone::InceptionResNetV2);
  CHECK(c.input_size == 299);
  CHECK(c.epochs == 150);
  CHECK(c.optimizer_lr == 0.01);
  CHECK(c.optimizer_epsilon == 0.1);
  CHECK(c.pretrained);
  const auto j = to_json(c);
  CHECK(j["optimizer_lr"] == 0.01);
  CHECK(j["optimizer_epsilon"] == 0.1);
  CHECK(j["epochs"] == 150);
  const auto back = cls_config_from_json(nlohmann::json::parse(j.dump()));
  CHECK(back.backbone == c.backbone);
  CHECK(back.optimizer_epsilon == c.optimizer_epsilon);
}

TEST_CASE("pretrained backbone without weights is reported") {
  CHECK(kind_of([] { ClsModel::create(ClsModelConfig{}); }) == ErrorKind::PretrainedWeightsMissing);
  ClsModelConfig c;
  c.pretrained_weights = "/nonexistent/irv2.pt";
  CHECK(kind_of([&] { ClsModel::create(c); }) == ErrorKind::PretrainedWeightsMissing);
}

TEST_CASE("inception-resnet-v2 topology") {
  ClsModelConfig c;
  c.pretrained = false;
  c.input_size = 75;
  const auto model = ClsModel::create(c);
  auto& net = *model.impl().net;
  std::int64_t backbone = 0;
  for (const auto& p : net.backbone_parameters()) backbone += p.numel();
  CHECK(backbone == 54306464);
  torch::NoGradGuard g;
  const auto f = net.features(nn::to_input(noise(75, 75, 1), 75));
  CHECK(f.sizes() == torch::IntArrayRef({1, 1536, 1, 1}));
  const auto p = model.classify(noise(90, 80, 2));
  double sum = 0;
  for (double v : p.probs) sum += v;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
  c.input_size = 74;
  CHECK_THROWS_AS(c.validate(), Error);
}

TEST_CASE("training preconditions") {
  CHECK(kind_of([] { ClsModel::train({}, tiny(1), {}); }) == ErrorKind::EmptyTrainingSet);
  CHECK(kind_of([] { train_classifier({}, "/", tiny(1), {}); }) == ErrorKind::EmptyTrainingSet);
  Dataset ds;
  auto r = test::make_record("aug1", DiseaseClass::GenitalWarts, ProvenanceSource::Augmented);
  r.verification = Verification::Unverified;
  ds.records.push_back(r);
  try {
    train_classifier(ds, "/", tiny(1), {});
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnverifiedAugmentedRecord);
    CHECK(e.detail() == "aug1");
  }
  CHECK(kind_of([] { ClsModel().classify(noise(8, 8, 1)); }) == ErrorKind::ModelNotLoaded);
}

TEST_CASE("memorizes one image per class") {
  const auto samples = one_per_class();
  const auto model = ClsModel::train(samples, tiny(40), {});
  CHECK(model.epoch_log().size() == 40);
  CHECK(model.epoch_log().back().accuracy == 1.0);
  for (const auto& s : samples) CHECK(model.classify(s.image).predicted == s.label);
}

TEST_CASE("seeded training is repeatable and independent of sample order") {
  auto samples = one_per_class();
  augment::TransformConfig t;
  t.rotation_range = 10;
  t.allow_flip_h = true;
  const auto a = ClsModel::train(samples, tiny(4), t);
  const auto b = ClsModel::train(samples, tiny(4), t);
  std::reverse(samples.begin(), samples.end());
  std::swap(samples[1], samples[4]);
  const auto c = ClsModel::train(samples, tiny(4), t);
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(std::abs(a.epoch_log()[i].loss - b.epoch_log()[i].loss) <= 1e-6);
    CHECK(std::abs(a.epoch_log()[i].loss - c.epoch_log()[i].loss) <= 1e-6);
  }
  CHECK(a.dataset_hash() == c.dataset_hash());
}

TEST_CASE("probabilities are normalized and batching does not change them") {
  const auto model = ClsModel::train(one_per_class(), tiny(3), {});
  std::vector<cv::Mat> imgs;
  for (int i = 0; i < 200; ++i) {
    imgs.push_back(noise(20 + i % 50, 20 + (i * 7) % 50, i));
    const auto p = model.classify(imgs.back());
    double sum = 0;
    for (double v : p.probs) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
      sum += v;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(p.confidence() == *std::max_element(p.probs.begin(), p.probs.end()));
  }
  const auto batch = model.classify_batch(std::span(imgs).first(16));
  for (std::size_t i = 0; i < 16; ++i) {
    const auto single = model.classify(imgs[i]);
    for (std::size_t k = 0; k < kNumClasses; ++k) CHECK(std::abs(batch[i].probs[k] - single.probs[k]) <= 1e-5);
  }
}

TEST_CASE("softmax over random logits") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> small(-5, 5), wide(-800, 800);
  for (int i = 0; i < 10000; ++i) {
    std::array<double, kNumClasses> z;
    for (auto& v : z) v = i % 2 ? wide(rng) : small(rng);
    const auto p = softmax_probabilities(z);
    double sum = 0;
    std::size_t best = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      REQUIRE(p.probs[k] >= 0.0);
      REQUIRE(p.probs[k] <= 1.0);
      sum += p.probs[k];
      if (z[k] > z[best]) best = k;
    }
    REQUIRE(sum == doctest::Approx(1.0).epsilon(1e-6));
    REQUIRE(p.predicted == kAllClasses[best]);
  }
  const std::array<double, kNumClasses> tie{0, 2, 1, 2, 0, 2};
  CHECK(softmax_probabilities(tie).predicted == DiseaseClass::HerpesEruption);
  CHECK_THROWS_AS(softmax_probabilities(std::array<double, 3>{1, 2, 3}), Error);
}

TEST_CASE("save and load round trip") {
  const auto model = ClsModel::train(one_per_class(), tiny(2), {});
  test::TempDir dir;
  model.save(dir / "cls.pt");
  const auto meta = nlohmann::json::parse(read_file(dir / "cls.pt.json"));
  CHECK(meta["class_order"] == nlohmann::json({"warts", "hsv", "cancer", "candidiasis", "syphilis", "none"}));
  CHECK(meta["epoch_log_path"] == "cls.pt.epochs.csv");
  const auto csv = read_file(dir / "cls.pt.epochs.csv");
  CHECK(csv.rfind("epoch,loss,accuracy\n1,", 0) == 0);

  const auto back = ClsModel::load(dir / "cls.pt");
  CHECK(back.config().width == 8);
  CHECK(back.epoch_log().size() == 2);
  const cv::Mat img = noise(32, 32, 5);
  const auto p = model.classify(img), q = back.classify(img);
  for (std::size_t k = 0; k < kNumClasses; ++k) CHECK(p.probs[k] == doctest::Approx(q.probs[k]).epsilon(1e-9));
  CHECK(kind_of([&] { ClsModel::load(dir / "nope.pt"); }) == ErrorKind::ModelNotLoaded);
}

TEST_CASE("frozen backbone only moves the head") {
  auto cfg = tiny(2);
  cfg.freeze_backbone = true;
  torch::manual_seed(cfg.seed);
  auto ref = nn::make_classifier_net(cfg);
  const auto model = ClsModel::train(one_per_class(), cfg, {});
  auto& net = *model.impl().net;
  const auto before = ref->backbone_parameters();
  const auto after = net.backbone_parameters();
  REQUIRE(before.size() == after.size());
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(torch::equal(before[i], after[i]));
  auto& small = dynamic_cast<nn::SmallCNN&>(net);
  auto& ref_small = dynamic_cast<nn::SmallCNN&>(*ref);
  CHECK_FALSE(torch::equal(small.fc->weight, ref_small.fc->weight));
}
