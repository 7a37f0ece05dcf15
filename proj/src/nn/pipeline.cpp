#include "lesion_triage/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include <fmt/format.h>
#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/nn/modules.hpp"

namespace lt::pipeline {

SaliencyMap gradcam_pp(const cls::ClsModel& model, const cv::Mat& image, DiseaseClass target) {
  const auto& m = model.impl();
  torch::AutoGradMode grad_on(true);
  auto x = nn::to_input(image, m.config.input_size).requires_grad_(true);
  const auto A = m.net->features(x);
  if (A.dim() != 4) throw Error(ErrorKind::NoConvLayer, fmt::format("features are {}-D, expected 4-D", A.dim()));
  const auto score = m.net->head(A)[0][static_cast<std::int64_t>(index_of(target))];

  SaliencyMap out{cv::Mat::zeros(image.rows, image.cols, CV_32FC1)};
  if (!score.requires_grad()) return out;
  const auto grads = torch::autograd::grad({score}, {A}, {}, false, false, true);
  if (grads.empty() || !grads[0].defined()) return out;

  const auto g = grads[0][0].detach();
  const auto a = A[0].detach();
  const auto g2 = g.pow(2);
  const auto g3 = g.pow(3);
  auto denom = 2 * g2 + a.sum({1, 2}, true) * g3;
  denom = torch::where(denom != 0, denom, torch::ones_like(denom));
  const auto alpha = g2 / denom;
  const auto weights = (alpha * torch::relu(g)).sum({1, 2});
  const auto cam = torch::relu((weights.view({-1, 1, 1}) * a).sum(0)).to(torch::kFloat32).contiguous();

  cv::Mat small(static_cast<int>(cam.size(0)), static_cast<int>(cam.size(1)), CV_32FC1);
  std::memcpy(small.data, cam.data_ptr<float>(), sizeof(float) * small.total());
  cv::resize(small, out.values, image.size(), 0, 0, cv::INTER_LINEAR);
  cv::max(out.values, 0.0, out.values);
  double mx = 0.0;
  cv::minMaxLoc(out.values, nullptr, &mx);
  if (mx <= 0.0) {
    out.values.setTo(0.0f);
    return out;
  }
  // Divide per pixel so the peak lands on exactly 1.
  const float peak = static_cast<float>(mx);
  out.values.forEach<float>([peak](float& v, const int*) { v = std::min(1.0f, v / peak); });
  return out;
}

BBox salient_bbox(const SaliencyMap& map, double threshold, const SegmentationMask& subject) {
  if (!(threshold > 0.0 && threshold < 1.0)) throw Error(ErrorKind::InvalidArgument, "threshold must be in (0, 1)");
  if (map.width() != subject.width() || map.height() != subject.height())
    throw Error(ErrorKind::DimensionMismatch, "saliency map and subject mask differ in size");
  const auto subject_box = subject.bounds();
  if (!subject_box) throw Error(ErrorKind::EmptySubjectMask, "no subject pixels");

  double mx = 0.0;
  cv::minMaxLoc(map.values, nullptr, &mx);
  cv::Mat hot = map.values >= static_cast<float>(threshold * mx);
  hot &= subject.pixels() != 0;
  BBox box = *subject_box;
  if (cv::countNonZero(hot) > 0) {
    const cv::Rect r = cv::boundingRect(hot);
    box = {r.x, r.y, r.x + r.width, r.y + r.height};
  }
  const int mx_pad = (box.width() + 5) / 10;
  const int my_pad = (box.height() + 5) / 10;
  return {std::max(0, box.x0 - mx_pad), std::max(0, box.y0 - my_pad), std::min(map.width(), box.x1 + mx_pad),
          std::min(map.height(), box.y1 + my_pad)};
}

namespace {

template <typename Fn>
auto stage(std::vector<StageTiming>& trace, const char* name, Fn&& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&] {
    trace.push_back({name, std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count()});
  };
  try {
    auto out = fn();
    finish();
    return out;
  } catch (const Error& e) {
    throw e.with_context(name);
  } catch (const c10::Error& e) {
    throw Error(ErrorKind::ModelNotLoaded, e.what_without_backtrace()).with_context(name);
  }
}

}  // namespace

ClassificationResult refine_and_classify(const seg::SegModel& seg, const cls::ClsModel& cls, const cv::Mat& image,
                                         double threshold) {
  if (image.empty() || image.type() != CV_8UC3) throw Error(ErrorKind::UndecodableImage, "expected an RGB image");
  ClassificationResult r;
  r.subject = stage(r.stages, "segment", [&] { return seg.segment(image); });
  r.initial = stage(r.stages, "classify_initial", [&] { return cls.classify(image); });
  r.saliency = stage(r.stages, "saliency", [&] { return gradcam_pp(cls, image, r.initial.predicted); });
  r.bbox = stage(r.stages, "bbox", [&] { return salient_bbox(r.saliency, threshold, r.subject); });
  r.refined_input = stage(r.stages, "crop", [&] {
    cv::Mat crop = image(r.bbox.rect()).clone();
    crop.setTo(cv::Scalar::all(0), r.subject.pixels()(r.bbox.rect()) == 0);
    return crop;
  });
  r.refined = stage(r.stages, "classify_refined", [&] { return cls.classify(r.refined_input); });
  r.final_class = r.refined.predicted;
  return r;
}

cv::Mat saliency_overlay(const cv::Mat& image, const SaliencyMap& map, double opacity) {
  if (map.width() != image.cols || map.height() != image.rows)
    throw Error(ErrorKind::DimensionMismatch, "saliency map and image differ in size");
  cv::Mat u8, heat, out;
  map.values.convertTo(u8, CV_8UC1, 255.0);
  cv::applyColorMap(u8, heat, cv::COLORMAP_JET);
  cv::cvtColor(heat, heat, cv::COLOR_BGR2RGB);
  cv::addWeighted(image, 1.0 - opacity, heat, opacity, 0.0, out);
  return out;
}

Evaluation evaluate(const seg::SegModel& seg, const cls::ClsModel& cls, const Dataset& validation,
                    const std::filesystem::path& root, eval::ScoreMode mode, double threshold) {
  std::vector<const ImageRecord*> records;
  for (const auto& r : validation.records) records.push_back(&r);
  std::sort(records.begin(), records.end(), [](auto* a, auto* b) { return a->id < b->id; });

  Evaluation out;
  for (const auto* rec : records) {
    try {
      if (!rec->label) throw Error(ErrorKind::IneligibleRecord, "record has no label");
      const auto res = refine_and_classify(seg, cls, load_image(root / rec->path), threshold);
      out.log.push_back({rec->id, *rec->label, res.initial.predicted, res.refined.predicted,
                         mode == eval::ScoreMode::Initial ? res.initial.confidence() : res.refined.confidence()});
    } catch (const Error& e) {
      throw e.with_context(rec->id);
    }
  }
  out.report = eval::score_predictions(out.log, mode);
  return out;
}

}  // namespace lt::pipeline
