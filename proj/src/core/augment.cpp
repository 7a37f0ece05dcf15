#include "lesion_triage/augment.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <set>

#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"

namespace lt::augment {

namespace {

double draw(std::mt19937_64& rng, double lo, double hi) {
  const double u = std::generate_canonical<double, 53>(rng);
  return lo + u * (hi - lo);
}

std::uint8_t clamp_byte(long v) { return static_cast<std::uint8_t>(std::clamp(v, 0L, 255L)); }

std::mt19937_64 seeded(std::uint64_t seed, std::uint32_t a = 0, std::uint32_t b = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), a, b};
  return std::mt19937_64(seq);
}

}  // namespace

LesionPattern extract_pattern(const cv::Mat& image, const SegmentationMask& lesion_mask,
                              DiseaseClass source_class, std::string source_id) {
  if (image.size() != lesion_mask.pixels().size())
    throw Error(ErrorKind::DimensionMismatch, "image and lesion mask differ in size");
  if (source_class == DiseaseClass::NonDiseased)
    throw Error(ErrorKind::InvalidPattern, "patterns come from disease classes only");
  auto box = lesion_mask.bounds();
  if (!box) throw Error(ErrorKind::EmptyMask, "lesion mask has no set pixels");

  const cv::Rect roi = box->rect();
  const cv::Mat crop = image(roi);
  const cv::Mat mask = lesion_mask.pixels()(roi);
  const double coverage = static_cast<double>(cv::countNonZero(mask)) / roi.area();
  if (coverage < 0.01)
    throw Error(ErrorKind::InvalidPattern, "lesion covers under 1% of its bounding box");

  LesionPattern p;
  p.source_class = source_class;
  p.source_id = std::move(source_id);
  p.rgba.create(roi.height, roi.width, CV_8UC4);
  cv::Vec3d sum(0, 0, 0);
  std::size_t n = 0;
  for (int y = 0; y < roi.height; ++y) {
    for (int x = 0; x < roi.width; ++x) {
      const auto& px = crop.at<cv::Vec3b>(y, x);
      const bool on = mask.at<std::uint8_t>(y, x) != 0;
      p.rgba.at<cv::Vec4b>(y, x) = {px[0], px[1], px[2], static_cast<std::uint8_t>(on ? 255 : 0)};
      if (on) {
        sum += cv::Vec3d(px[0], px[1], px[2]);
        ++n;
      }
    }
  }
  p.mean_color = sum / static_cast<double>(n);
  return p;
}

nlohmann::json to_json(const OverlayRecipe& r) {
  return {{"recipe_id", r.recipe_id},
          {"seed", r.seed},
          {"placement_center", {r.center_x, r.center_y}},
          {"scale", r.scale},
          {"rotation", r.rotation_deg},
          {"complexion_shift", {r.complexion_shift[0], r.complexion_shift[1], r.complexion_shift[2]}},
          {"flip_h", r.flip_h},
          {"flip_v", r.flip_v}};
}

OverlayRecipe recipe_from_json(const nlohmann::json& j) {
  try {
    OverlayRecipe r;
    r.recipe_id = j.at("recipe_id").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.center_x = j.at("placement_center").at(0).get<double>();
    r.center_y = j.at("placement_center").at(1).get<double>();
    r.scale = j.at("scale").get<double>();
    r.rotation_deg = j.at("rotation").get<double>();
    for (int c = 0; c < 3; ++c) r.complexion_shift[c] = j.at("complexion_shift").at(c).get<int>();
    r.flip_h = j.at("flip_h").get<bool>();
    r.flip_v = j.at("flip_v").get<bool>();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad recipe JSON: ") + e.what());
  }
}

cv::Vec3i complexion_shift_toward(const LesionPattern& pattern, const cv::Mat& base_image,
                                  const SegmentationMask& subject, double weight) {
  if (base_image.size() != subject.pixels().size())
    throw Error(ErrorKind::DimensionMismatch, "base image and subject mask differ in size");
  if (subject.count() == 0) throw Error(ErrorKind::EmptyMask, "subject mask is empty");
  const cv::Scalar skin = cv::mean(base_image, subject.pixels());
  cv::Vec3i shift;
  for (int c = 0; c < 3; ++c)
    shift[c] = static_cast<int>(std::lround(weight * (skin[c] - pattern.mean_color[c])));
  return shift;
}

Composite compose_overlay(const ImageRecord& base, const cv::Mat& base_image,
                          const SegmentationMask& base_subject_mask, const LesionPattern& pattern,
                          const OverlayRecipe& recipe, const CompositeOptions& options) {
  if (base.label != DiseaseClass::NonDiseased)
    throw Error(ErrorKind::InvalidArgument, "base image " + base.id + " is not NonDiseased");
  if (base_image.size() != base_subject_mask.pixels().size())
    throw Error(ErrorKind::DimensionMismatch, "base image and subject mask differ in size");
  if (pattern.rgba.empty() || pattern.rgba.type() != CV_8UC4)
    throw Error(ErrorKind::InvalidPattern, "pattern raster must be RGBA");
  if (!(recipe.scale >= 0.1 && recipe.scale <= 3.0))
    throw Error(ErrorKind::InvalidArgument, "recipe scale must lie in [0.1, 3.0]");

  const int W = base_image.cols;
  const int H = base_image.rows;
  if (recipe.center_x < 0 || recipe.center_x > 1 || recipe.center_y < 0 || recipe.center_y > 1)
    throw Error(ErrorKind::PlacementOutsideSubject, "placement centre outside the image");
  const int px = std::clamp(static_cast<int>(std::lround(recipe.center_x * W)), 0, W - 1);
  const int py = std::clamp(static_cast<int>(std::lround(recipe.center_y * H)), 0, H - 1);
  if (base_subject_mask.at(px, py) == 0)
    throw Error(ErrorKind::PlacementOutsideSubject,
                fmt::format("({}, {}) is background in {}", px, py, base.id));

  cv::Mat pat = pattern.rgba.clone();
  if (recipe.flip_h && recipe.flip_v)
    cv::flip(pat, pat, -1);
  else if (recipe.flip_h)
    cv::flip(pat, pat, 1);
  else if (recipe.flip_v)
    cv::flip(pat, pat, 0);

  cv::Mat rgb(pat.size(), CV_8UC3);
  cv::Mat alpha(pat.size(), CV_8UC1);
  for (int y = 0; y < pat.rows; ++y) {
    for (int x = 0; x < pat.cols; ++x) {
      const auto& v = pat.at<cv::Vec4b>(y, x);
      auto& out = rgb.at<cv::Vec3b>(y, x);
      for (int c = 0; c < 3; ++c) out[c] = clamp_byte(static_cast<long>(v[c]) + recipe.complexion_shift[c]);
      alpha.at<std::uint8_t>(y, x) = v[3];
    }
  }

  const cv::Point2f anchor(static_cast<float>(pat.cols / 2), static_cast<float>(pat.rows / 2));
  cv::Mat M = cv::getRotationMatrix2D(anchor, recipe.rotation_deg, recipe.scale);
  M.at<double>(0, 2) += px - anchor.x;
  M.at<double>(1, 2) += py - anchor.y;

  std::vector<cv::Point2d> corners = {{0, 0}, {double(pat.cols), 0}, {0, double(pat.rows)},
                                      {double(pat.cols), double(pat.rows)}};
  cv::transform(corners, corners, M);
  double minx = 1e18, maxx = -1e18, miny = 1e18, maxy = -1e18;
  for (const auto& p : corners) {
    minx = std::min(minx, p.x);
    maxx = std::max(maxx, p.x);
    miny = std::min(miny, p.y);
    maxy = std::max(maxy, p.y);
  }
  if (maxx - minx > W || maxy - miny > H)
    throw Error(ErrorKind::PatternLargerThanBase,
                fmt::format("transformed pattern {:.0f}x{:.0f} exceeds base {}x{}", maxx - minx,
                            maxy - miny, W, H));

  const bool axis_aligned_unit = recipe.scale == 1.0 && std::fmod(recipe.rotation_deg, 360.0) == 0.0;
  const int interp = axis_aligned_unit ? cv::INTER_NEAREST : cv::INTER_LINEAR;
  cv::Mat rgb_canvas, alpha_canvas;
  cv::warpAffine(rgb, rgb_canvas, M, base_image.size(), interp, cv::BORDER_REPLICATE);
  cv::warpAffine(alpha, alpha_canvas, M, base_image.size(), interp, cv::BORDER_CONSTANT, 0);

  cv::Mat weight;
  alpha_canvas.convertTo(weight, CV_32F, 1.0 / 255.0);
  if (options.feather_px > 0) {
    cv::Mat inside = alpha_canvas > 0;
    cv::Mat dist;
    cv::distanceTransform(inside, dist, cv::DIST_L2, cv::DIST_MASK_PRECISE);
    cv::Mat ramp = cv::min(dist / static_cast<float>(options.feather_px), 1.0f);
    weight = weight.mul(ramp);
  }

  Composite out;
  out.image = base_image.clone();
  out.footprint = cv::Mat::zeros(base_image.size(), CV_8UC1);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      const float a = weight.at<float>(y, x);
      if (a <= 0.0f) continue;
      out.footprint.at<std::uint8_t>(y, x) = 1;
      auto& dst = out.image.at<cv::Vec3b>(y, x);
      const auto& src = rgb_canvas.at<cv::Vec3b>(y, x);
      if (a >= 1.0f) {
        dst = src;
        continue;
      }
      for (int c = 0; c < 3; ++c)
        dst[c] = clamp_byte(std::lround(a * src[c] + (1.0f - a) * dst[c]));
    }
  }

  out.recipe = recipe;
  ImageRecord& r = out.record;
  r.id = "aug-" + recipe.recipe_id;
  r.path = options.image_dir + "/" + r.id + ".png";
  r.label = pattern.source_class;
  r.provenance.source = ProvenanceSource::Augmented;
  r.provenance.base_id = base.id;
  r.provenance.recipe_id = recipe.recipe_id;
  r.verification = Verification::Unverified;
  r.split = SplitAssignment::Unassigned;
  r.width_px = W;
  r.height_px = H;
  return out;
}

void TransformConfig::validate() const {
  for (double v : {rotation_range, rescale_range, shift_range_x, shift_range_y, brightness_range,
                   size_jitter, color_jitter})
    if (!(v >= 0.0)) throw Error(ErrorKind::InvalidArgument, "transform ranges must be non-negative");
  for (double v : {rescale_range, brightness_range, size_jitter, color_jitter})
    if (v >= 1.0) throw Error(ErrorKind::InvalidArgument, "multiplicative ranges must be below 1");
}

TransformConfig TransformConfig::training_default() {
  TransformConfig c;
  c.rotation_range = 20.0;
  c.rescale_range = 0.15;
  c.shift_range_x = 0.08;
  c.shift_range_y = 0.08;
  c.brightness_range = 0.15;
  c.allow_flip_h = true;
  c.allow_flip_v = true;
  c.size_jitter = 0.1;
  c.color_jitter = 0.05;
  return c;
}

nlohmann::ordered_json to_json(const TransformConfig& c) {
  return {{"rotation_range", c.rotation_range},     {"rescale_range", c.rescale_range},
          {"shift_range_x", c.shift_range_x},       {"shift_range_y", c.shift_range_y},
          {"brightness_range", c.brightness_range}, {"allow_flip_h", c.allow_flip_h},
          {"allow_flip_v", c.allow_flip_v},         {"size_jitter", c.size_jitter},
          {"color_jitter", c.color_jitter}};
}

TransformConfig transform_config_from_json(const nlohmann::json& j) {
  TransformConfig c;
  try {
    c.rotation_range = j.value("rotation_range", c.rotation_range);
    c.rescale_range = j.value("rescale_range", c.rescale_range);
    c.shift_range_x = j.value("shift_range_x", c.shift_range_x);
    c.shift_range_y = j.value("shift_range_y", c.shift_range_y);
    c.brightness_range = j.value("brightness_range", c.brightness_range);
    c.allow_flip_h = j.value("allow_flip_h", c.allow_flip_h);
    c.allow_flip_v = j.value("allow_flip_v", c.allow_flip_v);
    c.size_jitter = j.value("size_jitter", c.size_jitter);
    c.color_jitter = j.value("color_jitter", c.color_jitter);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::InvalidArgument, std::string("bad transform config: ") + e.what());
  }
  c.validate();
  return c;
}

TransformParams sample_transform(const TransformConfig& config, std::uint64_t seed) {
  config.validate();
  auto rng = seeded(seed, 0x7a3u);
  TransformParams p;
  // Every field consumes one draw so the stream layout is independent of
  // which ranges are enabled.
  p.rotation_deg = draw(rng, -config.rotation_range, config.rotation_range);
  p.rescale = draw(rng, 1.0 - config.rescale_range, 1.0 + config.rescale_range);
  p.shift_x = draw(rng, -config.shift_range_x, config.shift_range_x);
  p.shift_y = draw(rng, -config.shift_range_y, config.shift_range_y);
  p.brightness = draw(rng, 1.0 - config.brightness_range, 1.0 + config.brightness_range);
  const double fh = draw(rng, 0.0, 1.0);
  const double fv = draw(rng, 0.0, 1.0);
  p.flip_h = config.allow_flip_h && fh < 0.5;
  p.flip_v = config.allow_flip_v && fv < 0.5;
  p.stretch_x = draw(rng, 1.0 - config.size_jitter, 1.0 + config.size_jitter);
  p.stretch_y = draw(rng, 1.0 - config.size_jitter, 1.0 + config.size_jitter);
  for (int c = 0; c < 3; ++c) p.color[c] = draw(rng, 1.0 - config.color_jitter, 1.0 + config.color_jitter);
  return p;
}

cv::Mat apply_transform(const cv::Mat& image, const TransformParams& p, cv::Size output_size) {
  cv::Mat out;
  if (image.size() == output_size) {
    out = image.clone();
  } else {
    const bool shrinking = output_size.area() < image.size().area();
    cv::resize(image, out, output_size, 0, 0, shrinking ? cv::INTER_AREA : cv::INTER_LINEAR);
  }

  if (p.flip_h && p.flip_v)
    cv::flip(out, out, -1);
  else if (p.flip_h)
    cv::flip(out, out, 1);
  else if (p.flip_v)
    cv::flip(out, out, 0);

  const double sx = p.rescale * p.stretch_x;
  const double sy = p.rescale * p.stretch_y;
  const bool geometric = p.rotation_deg != 0.0 || sx != 1.0 || sy != 1.0 || p.shift_x != 0.0 ||
                         p.shift_y != 0.0;
  if (geometric) {
    const double cx = out.cols / 2.0;
    const double cy = out.rows / 2.0;
    const double th = p.rotation_deg * CV_PI / 180.0;
    const double c = std::cos(th), s = std::sin(th);
    // dst = R * S * (src - centre) + centre + shift
    cv::Matx23d M(c * sx, s * sy, 0.0, -s * sx, c * sy, 0.0);
    M(0, 2) = cx + p.shift_x * out.cols - (M(0, 0) * cx + M(0, 1) * cy);
    M(1, 2) = cy + p.shift_y * out.rows - (M(1, 0) * cx + M(1, 1) * cy);
    cv::Mat warped;
    cv::warpAffine(out, warped, cv::Mat(M), out.size(), cv::INTER_LINEAR, cv::BORDER_REFLECT_101);
    out = warped;
  }

  const cv::Vec3d gain = p.color * p.brightness;
  if (gain != cv::Vec3d(1.0, 1.0, 1.0)) {
    for (int y = 0; y < out.rows; ++y) {
      auto* row = out.ptr<cv::Vec3b>(y);
      for (int x = 0; x < out.cols; ++x)
        for (int c = 0; c < 3; ++c) row[x][c] = clamp_byte(std::lround(row[x][c] * gain[c]));
    }
  }
  return out;
}

cv::Mat random_transform(const cv::Mat& image, const TransformConfig& config, std::uint64_t seed,
                         cv::Size output_size) {
  return apply_transform(image, sample_transform(config, seed), output_size);
}

PatternLibrary::PatternLibrary(std::span<const LesionPattern> patterns) {
  for (const auto& p : patterns) by_class_[p.source_class].push_back(p);
}

bool PatternLibrary::can_generate(DiseaseClass c) const {
  auto it = by_class_.find(c);
  return it != by_class_.end() && !it->second.empty();
}

LesionPattern PatternLibrary::generate(DiseaseClass c, std::mt19937_64& rng) {
  const auto& pool = by_class_.at(c);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  return pool[pick(rng)];
}

BalanceResult balance_classes(const Dataset& dataset, std::span<const BaseImage> bases,
                              PatternGenerator& patterns, std::size_t target, std::uint64_t seed,
                              const BalanceOptions& options) {
  const auto counts = class_distribution(dataset);
  for (auto c : kAllClasses) {
    if (!is_disease(c)) continue;
    if (counts.at(c) > target)
      throw Error(ErrorKind::InvalidArgument,
                  fmt::format("class {} already has {} records, above target {}", token(c),
                              counts.at(c), target));
    if (counts.at(c) < target && (bases.empty() || !patterns.can_generate(c)))
      throw Error(ErrorKind::InsufficientSources, std::string(token(c)));
  }

  BalanceResult result;
  result.dataset = dataset;
  std::set<std::string> ids;
  for (const auto& r : dataset.records) ids.insert(r.id);

  for (auto c : kAllClasses) {
    if (!is_disease(c)) continue;
    const std::size_t deficit = target - counts.at(c);
    for (std::size_t k = 0; k < deficit; ++k) {
      auto rng = seeded(seed, static_cast<std::uint32_t>(index_of(c)) + 1, static_cast<std::uint32_t>(k));
      LesionPattern pattern = patterns.generate(c, rng);
      std::uniform_int_distribution<std::size_t> pick_base(0, bases.size() - 1);
      const BaseImage& base = bases[pick_base(rng)];
      if (base.subject.count() == 0)
        throw Error(ErrorKind::InsufficientSources, "base " + base.record.id + " has an empty subject mask");

      std::vector<cv::Point> subject_px;
      cv::findNonZero(base.subject.pixels(), subject_px);
      std::uniform_int_distribution<std::size_t> pick_px(0, subject_px.size() - 1);
      const cv::Point at = subject_px[pick_px(rng)];

      OverlayRecipe recipe;
      recipe.seed = rng();
      recipe.center_x = static_cast<double>(at.x) / base.image.cols;
      recipe.center_y = static_cast<double>(at.y) / base.image.rows;
      recipe.rotation_deg = draw(rng, -options.rotation_range, options.rotation_range);
      recipe.scale = draw(rng, options.min_scale, options.max_scale);
      recipe.flip_h = draw(rng, 0.0, 1.0) < 0.5;
      recipe.flip_v = draw(rng, 0.0, 1.0) < 0.5;
      recipe.complexion_shift =
          complexion_shift_toward(pattern, base.image, base.subject, options.complexion_weight);
      recipe.recipe_id = fmt::format("{}-{:016x}-{:05d}", token(c), seed, k);
      while (ids.contains("aug-" + recipe.recipe_id)) recipe.recipe_id += "x";

      std::optional<Composite> comp;
      while (!comp) {
        try {
          comp = compose_overlay(base.record, base.image, base.subject, pattern, recipe, options.composite);
        } catch (const Error& e) {
          if (e.kind() != ErrorKind::PatternLargerThanBase || recipe.scale * 0.8 < 0.1) throw;
          recipe.scale *= 0.8;
        }
      }
      ids.insert(comp->record.id);
      result.dataset.records.push_back(comp->record);
      result.generated.push_back(std::move(*comp));
    }
  }
  return result;
}

BalanceResult balance_classes(const Dataset& dataset, std::span<const BaseImage> bases,
                              std::span<const LesionPattern> patterns, std::size_t target,
                              std::uint64_t seed, const BalanceOptions& options) {
  PatternLibrary library(patterns);
  return balance_classes(dataset, bases, library, target, seed, options);
}

}  // namespace lt::augment
