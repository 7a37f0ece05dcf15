#include "lesion_triage/synth.hpp"

#include <array>
#include <vector>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"

namespace lt::synth {

namespace fs = std::filesystem;

namespace {

const std::array<cv::Vec3b, 6> kSkinTones = {{
    {224, 172, 105}, {241, 194, 125}, {198, 134, 66}, {141, 85, 36}, {255, 219, 172}, {180, 120, 90},
}};

cv::Scalar jitter(cv::RNG& rng, cv::Vec3i rgb, int amount) {
  auto ch = [&](int v) { return std::clamp(v + rng.uniform(-amount, amount + 1), 0, 255); };
  return cv::Scalar(ch(rgb[0]), ch(rgb[1]), ch(rgb[2]));
}

cv::Point near(cv::RNG& rng, cv::Point c, int spread) {
  return {c.x + rng.uniform(-spread, spread + 1), c.y + rng.uniform(-spread, spread + 1)};
}

// Draws one class motif centred at `c` into `layer` and marks covered
// pixels in `mask` (255). `extent` is the rough diameter in pixels.
void draw_motif(cv::Mat& layer, cv::Mat& mask, DiseaseClass cls, cv::Point c, int extent, cv::RNG& rng) {
  const int half = std::max(1, extent / 2);
  switch (cls) {
    case DiseaseClass::GenitalWarts: {
      const int n = rng.uniform(5, 9);
      for (int i = 0; i < n; ++i) {
        const cv::Point p = near(rng, c, half * 2 / 3);
        const int r = std::max(2, static_cast<int>(extent * rng.uniform(0.12, 0.18)));
        cv::circle(layer, p, r, jitter(rng, {110, 200, 90}, 15), cv::FILLED, cv::LINE_8);
        cv::circle(mask, p, r, 255, cv::FILLED, cv::LINE_8);
      }
      break;
    }
    case DiseaseClass::HerpesEruption: {
      const int n = rng.uniform(4, 7);
      for (int i = 0; i < n; ++i) {
        const cv::Point p = near(rng, c, half * 2 / 3);
        const int r = std::max(2, static_cast<int>(extent * rng.uniform(0.12, 0.16)));
        cv::circle(layer, p, r, jitter(rng, {250, 205, 205}, 5), cv::FILLED, cv::LINE_8);
        cv::circle(layer, p, r, jitter(rng, {225, 35, 45}, 10), std::max(1, extent / 16), cv::LINE_8);
        cv::circle(mask, p, r, 255, cv::FILLED, cv::LINE_8);
      }
      break;
    }
    case DiseaseClass::PenileCancer: {
      std::vector<cv::Point> poly;
      const int n = 9;
      for (int i = 0; i < n; ++i) {
        const double th = 2.0 * CV_PI * i / n;
        const double r = half * rng.uniform(0.55, 1.0);
        poly.emplace_back(c.x + static_cast<int>(r * std::cos(th)), c.y + static_cast<int>(r * std::sin(th)));
      }
      cv::fillPoly(layer, std::vector<std::vector<cv::Point>>{poly}, jitter(rng, {85, 25, 100}, 12), cv::LINE_8);
      cv::fillPoly(mask, std::vector<std::vector<cv::Point>>{poly}, 255, cv::LINE_8);
      for (int i = 0; i < 6; ++i)
        cv::circle(layer, near(rng, c, half / 2), 1, cv::Scalar(45, 10, 55), cv::FILLED, cv::LINE_8);
      break;
    }
    case DiseaseClass::PenileCandidiasis: {
      const int n = rng.uniform(3, 6);
      for (int i = 0; i < n; ++i) {
        const cv::Point p = near(rng, c, half / 2);
        const cv::Size axes(std::max(2, static_cast<int>(extent * rng.uniform(0.15, 0.3))),
                            std::max(1, static_cast<int>(extent * rng.uniform(0.08, 0.15))));
        const double angle = rng.uniform(0.0, 180.0);
        cv::ellipse(layer, p, axes, angle, 0, 360, jitter(rng, {245, 245, 235}, 8), cv::FILLED, cv::LINE_8);
        cv::ellipse(mask, p, axes, angle, 0, 360, 255, cv::FILLED, cv::LINE_8);
      }
      break;
    }
    case DiseaseClass::SyphiliticChancre: {
      const int r = std::max(3, static_cast<int>(extent * rng.uniform(0.3, 0.4)));
      cv::circle(layer, c, r, jitter(rng, {50, 90, 220}, 12), cv::FILLED, cv::LINE_8);
      cv::circle(layer, c, r, jitter(rng, {20, 40, 140}, 8), std::max(1, extent / 12), cv::LINE_8);
      cv::circle(mask, c, r, 255, cv::FILLED, cv::LINE_8);
      break;
    }
    case DiseaseClass::NonDiseased:
      break;
  }
}

}  // namespace

Scene make_scene(DiseaseClass label, std::uint64_t seed, const SceneOptions& options) {
  if (options.size < 16) throw Error(ErrorKind::InvalidArgument, "scene size must be at least 16");
  const int s = options.size;
  cv::RNG rng(seed * 0x9E3779B97F4A7C15ull + 0x632BE59BD9B4E019ull);

  Scene scene;
  scene.label = label;

  // Background: muted base colour plus blurred noise.
  const int g = rng.uniform(30, 140);
  cv::Mat bg(s, s, CV_8UC3, cv::Scalar(std::clamp(g + rng.uniform(-20, 21), 0, 255),
                                        std::clamp(g + rng.uniform(-20, 21), 0, 255),
                                        std::clamp(g + rng.uniform(-20, 21), 0, 255)));
  cv::Mat noise(s, s, CV_16SC3);
  rng.fill(noise, cv::RNG::UNIFORM, cv::Scalar::all(-30), cv::Scalar::all(31));
  cv::Mat bg16;
  bg.convertTo(bg16, CV_16SC3);
  bg16 += noise;
  bg16.convertTo(scene.image, CV_8UC3);
  cv::GaussianBlur(scene.image, scene.image, cv::Size(3, 3), 0);

  // Subject ellipse.
  const cv::Point centre(s / 2 + rng.uniform(-s / 10, s / 10 + 1), s / 2 + rng.uniform(-s / 10, s / 10 + 1));
  const cv::Size axes(static_cast<int>(s * rng.uniform(0.28, 0.4)), static_cast<int>(s * rng.uniform(0.22, 0.32)));
  const double angle = rng.uniform(0.0, 180.0);
  cv::Mat subject = cv::Mat::zeros(s, s, CV_8UC1);
  cv::ellipse(subject, centre, axes, angle, 0, 360, 255, cv::FILLED, cv::LINE_8);
  const cv::Vec3b tone = kSkinTones[rng.uniform(0, static_cast<int>(kSkinTones.size()))];
  cv::Mat skin(s, s, CV_8UC3, cv::Scalar(tone[0], tone[1], tone[2]));
  cv::Mat skin_noise(s, s, CV_16SC3);
  rng.fill(skin_noise, cv::RNG::UNIFORM, cv::Scalar::all(-10), cv::Scalar::all(11));
  cv::Mat skin16;
  skin.convertTo(skin16, CV_16SC3);
  skin16 += skin_noise;
  skin16.convertTo(skin, CV_8UC3);
  skin.copyTo(scene.image, subject);
  scene.subject = SegmentationMask::from_nonzero(subject);

  // Lesion, clipped to the subject.
  cv::Mat lesion = cv::Mat::zeros(s, s, CV_8UC1);
  if (is_disease(label)) {
    const int extent = static_cast<int>(s * rng.uniform(0.22, 0.3));
    const double th = rng.uniform(0.0, 2.0 * CV_PI);
    const double rr = rng.uniform(0.0, 0.35);
    const cv::Point at(centre.x + static_cast<int>(rr * axes.width * std::cos(th) * 0.6),
                       centre.y + static_cast<int>(rr * axes.height * std::sin(th) * 0.6));
    cv::Mat layer = scene.image.clone();
    draw_motif(layer, lesion, label, at, extent, rng);
    lesion &= subject;
    layer.copyTo(scene.image, lesion);
  }
  scene.lesion = SegmentationMask::from_nonzero(lesion);
  scene.lesion_box = scene.lesion.bounds();

  if (options.clutter) {
    cv::Mat keep_out;
    cv::dilate(subject, keep_out, cv::Mat::ones(5, 5, CV_8UC1));
    for (int k = 0; k < options.clutter_count; ++k) {
      DiseaseClass other;
      do {
        other = kAllClasses[rng.uniform(0, 5)];
      } while (other == label);
      const int extent = static_cast<int>(s * rng.uniform(0.18, 0.26));
      for (int attempt = 0; attempt < 100; ++attempt) {
        const cv::Point at(rng.uniform(extent / 2, s - extent / 2), rng.uniform(extent / 2, s - extent / 2));
        const cv::Rect box(at.x - extent / 2 - 2, at.y - extent / 2 - 2, extent + 4, extent + 4);
        const cv::Rect clipped = box & cv::Rect(0, 0, s, s);
        if (cv::countNonZero(keep_out(clipped)) > 0) continue;
        cv::Mat layer = scene.image.clone();
        cv::Mat motif = cv::Mat::zeros(s, s, CV_8UC1);
        draw_motif(layer, motif, other, at, extent, rng);
        motif.setTo(0, keep_out);
        layer.copyTo(scene.image, motif);
        break;
      }
    }
  }
  return scene;
}

Dataset write_dataset(const fs::path& dir, const WriteOptions& options) {
  Dataset ds;
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");
  for (auto c : kAllClasses) {
    for (std::size_t i = 0; i < options.per_class; ++i) {
      const std::uint64_t seed = options.seed * 1000003ull + index_of(c) * 100003ull + i;
      Scene scene = make_scene(c, seed, options.scene);
      ImageRecord r;
      r.id = fmt::format("{}-{}-{:04d}", options.id_prefix, token(c), i);
      r.path = "images/" + r.id + ".png";
      r.mask_path = "masks/" + r.id + "_subject.png";
      r.label = c;
      r.provenance.source = options.source;
      r.verification = Verification::ExpertVerified;
      r.width_px = scene.image.cols;
      r.height_px = scene.image.rows;
      save_png(dir / r.path, scene.image);
      save_mask(dir / r.mask_path, scene.subject);
      if (is_disease(c) && scene.lesion.count() > 0) {
        r.lesion_mask_path = "masks/" + r.id + "_lesion.png";
        save_mask(dir / r.lesion_mask_path, scene.lesion);
      }
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace lt::synth
