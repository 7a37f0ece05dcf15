#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

#include "lesion_triage/classifier.hpp"
#include "lesion_triage/evaluator.hpp"
#include "lesion_triage/image.hpp"
#include "lesion_triage/segmenter.hpp"

namespace lt::pipeline {

/// Values in [0, 1] (CV_32FC1) at the size of the image it explains.
struct SaliencyMap {
  cv::Mat values;

  int width() const { return values.cols; }
  int height() const { return values.rows; }
};

/// GradCAM++ on the classifier's last convolutional layer, upsampled to the
/// image size and divided by its maximum. All zeros when the target logit
/// does not depend on the activations. Throws Error(NoConvLayer) or
/// Error(ModelNotLoaded).
SaliencyMap gradcam_pp(const cls::ClsModel& model, const cv::Mat& image, DiseaseClass target);

/// Box around pixels with saliency >= threshold * max inside the subject,
/// or around the whole subject when none qualify, grown by 10% of its size
/// per side and clipped. Throws Error(EmptySubjectMask),
/// Error(DimensionMismatch) or Error(InvalidArgument).
BBox salient_bbox(const SaliencyMap& map, double threshold, const SegmentationMask& subject);

struct StageTiming {
  std::string name;
  double millis = 0.0;
};

struct ClassificationResult {
  ClassProbabilities initial;
  SegmentationMask subject;
  SaliencyMap saliency;
  BBox bbox;
  cv::Mat refined_input;  // crop with background zeroed
  ClassProbabilities refined;
  DiseaseClass final_class = DiseaseClass::NonDiseased;
  std::vector<StageTiming> stages;
};

/// segment -> classify_initial -> saliency -> bbox -> crop -> classify_refined.
/// Stage failures are rethrown with the stage name as context.
ClassificationResult refine_and_classify(const seg::SegModel& seg, const cls::ClsModel& cls, const cv::Mat& image,
                                         double threshold = 0.5);

/// Jet heatmap blended over the image at `opacity`.
cv::Mat saliency_overlay(const cv::Mat& image, const SaliencyMap& map, double opacity = 0.4);

struct Evaluation {
  std::vector<eval::PredictionEntry> log;  // ordered by image id
  eval::EvaluationReport report;
};

/// Runs the pipeline over every record (images resolved below `root`) and
/// scores the chosen mode. Errors carry the image id as context.
Evaluation evaluate(const seg::SegModel& seg, const cls::ClsModel& cls, const Dataset& validation,
                    const std::filesystem::path& root, eval::ScoreMode mode, double threshold = 0.5);

}  // namespace lt::pipeline
