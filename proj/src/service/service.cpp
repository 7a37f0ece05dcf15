#include "lesion_triage/service/service.hpp"

#include <cstdlib>
#include <regex>

#include <fmt/format.h>

#include "lesion_triage/error.hpp"
#include "lesion_triage/image.hpp"
#include "lesion_triage/pipeline.hpp"

namespace lt::service {

namespace {

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

nlohmann::ordered_json error_json(const Error& e) {
  return {{"error", to_string(e.kind())}, {"detail", e.detail()}, {"context", e.context()}};
}

nlohmann::ordered_json result_to_json(const pipeline::ClassificationResult& r) {
  nlohmann::ordered_json j;
  j["final_class"] = token(r.final_class);
  j["final_class_name"] = display_name(r.final_class);
  j["confidence"] = r.refined.at(r.final_class);
  j["initial"] = to_json(r.initial);
  j["refined"] = to_json(r.refined);
  j["bbox"] = {{"x0", r.bbox.x0}, {"y0", r.bbox.y0}, {"x1", r.bbox.x1}, {"y1", r.bbox.y1}};
  auto& st = j["stages"] = nlohmann::ordered_json::array();
  for (const auto& s : r.stages) st.push_back({{"name", s.name}, {"millis", s.millis}});
  return j;
}

}  // namespace

ServiceConfig ServiceConfig::from_env() {
  ServiceConfig c;
  if (auto v = env("LT_MODEL_DIR")) c.model_dir = *v;
  if (auto v = env("LT_STORE_PATH")) c.store_path = *v;
  if (auto v = env("LT_CONTENT_PATH")) c.content_path = *v;
  if (auto v = env("LT_REVIEW_TOKEN")) c.review_token = *v;
  if (auto v = env("LT_MAX_UPLOAD_BYTES")) {
    char* end = nullptr;
    const auto n = std::strtoull(v->c_str(), &end, 10);
    if (*end != '\0' || n == 0) throw Error(ErrorKind::InvalidArgument, "LT_MAX_UPLOAD_BYTES must be a positive integer");
    c.max_upload_bytes = static_cast<std::size_t>(n);
  }
  return c;
}

std::string normalize_bound(std::string_view s, bool upper) {
  if (s.empty()) return upper ? "9999-12-31T23:59:59.999Z" : "0000-01-01T00:00:00.000Z";
  static const std::regex date(R"(\d{4}-\d{2}-\d{2})");
  static const std::regex stamp(R"((\d{4}-\d{2}-\d{2})T(\d{2}:\d{2}:\d{2})(\.(\d{1,3}))?Z)");
  const std::string str(s);
  std::smatch m;
  if (std::regex_match(str, date)) return str + (upper ? "T23:59:59.999Z" : "T00:00:00.000Z");
  if (std::regex_match(str, m, stamp)) {
    std::string frac = m[4].matched ? m[4].str() : std::string();
    frac.resize(3, upper && !m[4].matched ? '9' : '0');
    return fmt::format("{}T{}.{}Z", m[1].str(), m[2].str(), frac);
  }
  throw Error(ErrorKind::InvalidRange, fmt::format("unparseable bound '{}'", s));
}

std::unique_ptr<Service> Service::open(const ServiceConfig& config) {
  auto seg = seg::SegModel::load(config.model_dir / "segmenter.pt");
  auto cls = cls::ClsModel::load(config.model_dir / "classifier.pt");
  return std::make_unique<Service>(config, std::move(seg), std::move(cls));
}

Service::Service(ServiceConfig config, seg::SegModel seg, cls::ClsModel cls)
    : config_(std::move(config)),
      seg_(std::move(seg)),
      cls_(std::move(cls)),
      store_(config_.store_path),
      education_(config_.content_path) {
  if (config_.workers < 1) throw Error(ErrorKind::InvalidArgument, "workers must be >= 1");
}

Service::~Service() { stop(); }

void Service::start() {
  {
    std::lock_guard lock(qmu_);
    if (!workers_.empty()) return;
    stopping_ = false;
  }
  for (auto& id : store_.pending_ids()) enqueue(std::move(id));
  for (int i = 0; i < config_.workers; ++i) workers_.emplace_back([this] { worker_loop(); });
}

void Service::stop() {
  {
    std::lock_guard lock(qmu_);
    stopping_ = true;
  }
  qcv_.notify_all();
  for (auto& t : workers_) t.join();
  workers_.clear();
  std::lock_guard lock(qmu_);
  queue_.clear();
}

void Service::wait_idle() {
  std::unique_lock lock(qmu_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && running_ == 0; });
}

void Service::enqueue(std::string id) {
  {
    std::lock_guard lock(qmu_);
    queue_.push_back(std::move(id));
  }
  qcv_.notify_one();
}

void Service::worker_loop() {
  for (;;) {
    std::string id;
    {
      std::unique_lock lock(qmu_);
      qcv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (stopping_) return;
      id = std::move(queue_.front());
      queue_.pop_front();
      ++running_;
    }
    process(id);
    {
      std::lock_guard lock(qmu_);
      --running_;
    }
    idle_cv_.notify_all();
  }
}

void Service::process(const std::string& id) {
  try {
    const auto sub = store_.find_submission(id);
    if (!sub || sub->status != SubmissionStatus::Pending) return;
    const auto image = decode_image(store_.read_blob(sub->image_sha));
    const auto r = pipeline::refine_and_classify(seg_, cls_, image, config_.saliency_threshold);
    const auto png = encode_png(pipeline::saliency_overlay(image, r.saliency));
    const auto sha = store_.put_blob(std::string_view(reinterpret_cast<const char*>(png.data()), png.size()));
    store_.mark_classified(id, result_to_json(r), sha);
  } catch (const Error& e) {
    store_.mark_failed(id, error_json(e));
  } catch (const std::exception& e) {
    store_.mark_failed(id, {{"error", "Internal"}, {"detail", e.what()}});
  }
}

Submission Service::submit_scan(const std::string& image_bytes, const Questionnaire& q) {
  if (image_bytes.size() > config_.max_upload_bytes)
    throw Error(ErrorKind::PayloadTooLarge,
                fmt::format("{} bytes exceeds the {} byte limit", image_bytes.size(), config_.max_upload_bytes));
  decode_image(image_bytes);
  const auto sha = store_.put_blob(image_bytes);
  auto sub = store_.insert_submission(q, sha);
  enqueue(sub.id);
  return sub;
}

Submission Service::submit_scan(const std::string& image_bytes, std::string_view questionnaire_json) {
  return submit_scan(image_bytes, parse_questionnaire(questionnaire_json));
}

Submission Service::submission(std::string_view id) const {
  auto sub = store_.find_submission(id);
  if (!sub) throw Error(ErrorKind::NotFound, std::string(id));
  return *sub;
}

nlohmann::ordered_json Service::result_json(std::string_view id) const {
  const auto sub = submission(id);
  nlohmann::ordered_json j;
  j["id"] = sub.id;
  j["status"] = token(sub.status);
  j["created_at"] = sub.created_at;
  j["updated_at"] = sub.updated_at;
  j["questionnaire"] = to_json(sub.questionnaire);
  if (sub.status == SubmissionStatus::Classified) {
    j["result"] = sub.result;
    j["final_class"] = sub.result["final_class"];
    j["confidence"] = sub.result["confidence"];
    j["saliency_url"] = fmt::format("/v1/scans/{}/saliency.png", sub.id);
    j["education"] = to_json(education(parse_class(sub.result["final_class"].get<std::string>())));
  } else if (sub.status == SubmissionStatus::Failed) {
    j["error"] = sub.error;
  }
  return j;
}

std::string Service::saliency_png(std::string_view id) const {
  const auto sub = submission(id);
  if (sub.status != SubmissionStatus::Classified || sub.saliency_sha.empty())
    throw Error(ErrorKind::NotFound, fmt::format("no saliency overlay for {} yet", id));
  return store_.read_blob(sub.saliency_sha);
}

AnalyticsSummary Service::analytics(std::string_view from, std::string_view to) const {
  const auto lo = normalize_bound(from, false), hi = normalize_bound(to, true);
  if (lo > hi) throw Error(ErrorKind::InvalidRange, fmt::format("from {} is after to {}", from, to));
  return summarize(store_.questionnaires_between(lo, hi), std::string(from), std::string(to));
}

ImageRecord Service::review_verdict(std::string_view record_id, Verdict v, std::string_view reviewer,
                                    std::string_view note) {
  return store_.apply_verdict(record_id, v, reviewer, note);
}

nlohmann::ordered_json Service::review_queue_json(std::size_t offset, std::size_t limit) const {
  nlohmann::ordered_json j;
  j["total"] = store_.review_queue_size();
  j["offset"] = offset;
  j["limit"] = limit;
  auto& items = j["items"] = nlohmann::ordered_json::array();
  for (const auto& s : store_.review_queue(offset, limit)) {
    const auto& r = s.record;
    nlohmann::ordered_json item;
    item["id"] = r.id;
    item["label"] = r.label ? nlohmann::ordered_json(token(*r.label)) : nlohmann::ordered_json();
    item["base_id"] = r.provenance.base_id;
    item["recipe_id"] = r.provenance.recipe_id;
    item["recipe"] = r.extra.contains("recipe") ? r.extra["recipe"] : nlohmann::ordered_json();
    item["image_url"] = nullptr;
    item["base_image_url"] = nullptr;
    if (!s.image_sha.empty()) item["image_url"] = fmt::format("/v1/records/{}/image", r.id);
    if (!s.base_image_sha.empty()) item["base_image_url"] = fmt::format("/v1/records/{}/base-image", r.id);
    items.push_back(std::move(item));
  }
  return j;
}

bool Service::authorized(std::string_view bearer) const {
  const auto& t = config_.review_token;
  if (t.empty() || bearer.size() != t.size()) return false;
  unsigned char diff = 0;
  for (std::size_t i = 0; i < t.size(); ++i) diff |= static_cast<unsigned char>(t[i] ^ bearer[i]);
  return diff == 0;
}

}  // namespace lt::service
