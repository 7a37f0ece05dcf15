#pragma once

#include <condition_variable>
#include <cstddef>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesion_triage/classifier.hpp"
#include "lesion_triage/segmenter.hpp"
#include "lesion_triage/service/analytics.hpp"
#include "lesion_triage/service/education.hpp"
#include "lesion_triage/service/questionnaire.hpp"
#include "lesion_triage/service/store.hpp"

namespace lt::service {

inline constexpr std::size_t kDefaultMaxUploadBytes = 10u << 20;

struct ServiceConfig {
  std::filesystem::path model_dir = "models";
  std::filesystem::path store_path = "lesion-triage.db";
  std::filesystem::path content_path = "content/education.yaml";
  std::size_t max_upload_bytes = kDefaultMaxUploadBytes;
  std::string review_token;  // empty disables the review endpoints
  int workers = 1;
  double saliency_threshold = 0.5;

  /// Defaults overridden by LT_MODEL_DIR, LT_STORE_PATH,
  /// LT_MAX_UPLOAD_BYTES, LT_REVIEW_TOKEN and LT_CONTENT_PATH.
  static ServiceConfig from_env();
};

/// Submission intake, the classification job queue and the review and
/// analytics queries. The HTTP layer in http.hpp is a thin adapter.
class Service {
 public:
  /// Loads segmenter.pt and classifier.pt from config.model_dir.
  static std::unique_ptr<Service> open(const ServiceConfig& config);
  Service(ServiceConfig config, seg::SegModel seg, cls::ClsModel cls);
  ~Service();
  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Starts the workers and re-enqueues submissions left Pending by an
  /// earlier process.
  void start();
  void stop();
  /// Blocks until the queue is empty and no job is running.
  void wait_idle();

  /// Throws Error(PayloadTooLarge), Error(UndecodableImage) or
  /// Error(InvalidQuestionnaire).
  Submission submit_scan(const std::string& image_bytes, const Questionnaire& q);
  Submission submit_scan(const std::string& image_bytes, std::string_view questionnaire_json);

  /// Throws Error(NotFound).
  Submission submission(std::string_view id) const;
  /// Response body for GET /v1/scans/{id}.
  nlohmann::ordered_json result_json(std::string_view id) const;
  /// PNG overlay; Error(NotFound) until the submission is Classified.
  std::string saliency_png(std::string_view id) const;

  /// Bounds are YYYY-MM-DD or full UTC timestamps, inclusive; empty means
  /// open. Throws Error(InvalidRange).
  AnalyticsSummary analytics(std::string_view from, std::string_view to) const;

  ImageRecord review_verdict(std::string_view record_id, Verdict v, std::string_view reviewer,
                             std::string_view note);
  nlohmann::ordered_json review_queue_json(std::size_t offset, std::size_t limit) const;
  /// Constant-time comparison against the configured token.
  bool authorized(std::string_view bearer) const;

  EducationEntry education(DiseaseClass c) const { return education_.get(c); }
  void reload_education() { education_.reload(); }

  Store& store() { return store_; }
  const ServiceConfig& config() const { return config_; }

 private:
  void enqueue(std::string id);
  void worker_loop();
  void process(const std::string& id);

  ServiceConfig config_;
  seg::SegModel seg_;
  cls::ClsModel cls_;
  Store store_;
  EducationLibrary education_;

  std::mutex qmu_;
  std::condition_variable qcv_;
  std::condition_variable idle_cv_;
  std::deque<std::string> queue_;
  std::size_t running_ = 0;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

/// Normalizes an analytics bound: dates widen to the start or end of the
/// day. Throws Error(InvalidRange).
std::string normalize_bound(std::string_view s, bool upper);

}  // namespace lt::service
