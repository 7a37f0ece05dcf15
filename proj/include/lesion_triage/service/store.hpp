#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesion_triage/dataset.hpp"
#include "lesion_triage/service/questionnaire.hpp"

struct sqlite3;

namespace lt::service {

enum class SubmissionStatus { Pending, Classified, Failed };
std::string_view token(SubmissionStatus s);

struct Submission {
  std::string id;
  std::string image_sha;
  Questionnaire questionnaire;
  SubmissionStatus status = SubmissionStatus::Pending;
  nlohmann::json result;  // null unless Classified
  nlohmann::json error;   // null unless Failed
  std::string saliency_sha;
  std::string created_at;
  std::string updated_at;
};

enum class Verdict { Verified, Rejected };
std::string_view token(Verdict v);
/// verified|rejected; throws Error(InvalidArgument).
Verdict parse_verdict(std::string_view s);

struct AuditEntry {
  std::int64_t seq = 0;
  std::string record_id;
  std::string action;  // verified, rejected or reset
  std::string actor;
  std::string note;
  std::string at;
};

/// A review-queue row: record plus the content hashes of its composited
/// and base images.
struct StoredRecord {
  ImageRecord record;
  std::string image_sha;
  std::string base_image_sha;
};

/// UTC now as YYYY-MM-DDTHH:MM:SS.mmmZ.
std::string utc_now();

/// Single-file SQLite database plus a content-addressed blob directory
/// (`<store>.blobs/ab/abcdef...`). One connection guarded by a mutex, so
/// every write is serialized. Schema: docs/store-schema.md.
class Store {
 public:
  explicit Store(const std::filesystem::path& path);
  ~Store();
  Store(const Store&) = delete;
  Store& operator=(const Store&) = delete;

  const std::filesystem::path& path() const { return path_; }

  // blobs
  /// Stores bytes once under their SHA-256 and bumps the upload count.
  std::string put_blob(std::string_view bytes);
  std::string read_blob(std::string_view sha) const;
  std::filesystem::path blob_path(std::string_view sha) const;
  std::size_t upload_count(std::string_view sha) const;

  // submissions
  Submission insert_submission(const Questionnaire& q, const std::string& image_sha,
                               std::optional<std::string> created_at = std::nullopt);
  std::optional<Submission> find_submission(std::string_view id) const;
  std::vector<std::string> pending_ids() const;
  void mark_classified(std::string_view id, const nlohmann::json& result, const std::string& saliency_sha);
  void mark_failed(std::string_view id, const nlohmann::json& error);
  /// Questionnaires with from <= created_at <= to (string comparison of
  /// normalized timestamps).
  std::vector<Questionnaire> questionnaires_between(std::string_view from, std::string_view to) const;
  std::size_t submission_count() const;

  // review records
  /// Inserts a manifest record with its image bytes. An id that already
  /// exists keeps its stored verification; returns false in that case.
  bool import_record(const ImageRecord& r, std::string_view image_bytes, std::string_view base_image_bytes = {});
  std::optional<StoredRecord> find_record(std::string_view id) const;
  std::vector<ImageRecord> scan_records() const;
  /// Unverified augmented records ordered by id.
  std::vector<StoredRecord> review_queue(std::size_t offset, std::size_t limit) const;
  std::size_t review_queue_size() const;
  /// Throws Error(NotFound), Error(NotAugmented) or Error(AlreadyReviewed).
  ImageRecord apply_verdict(std::string_view id, Verdict v, std::string_view reviewer, std::string_view note);
  /// Puts a reviewed record back to Unverified. Not reachable over HTTP.
  ImageRecord admin_reset(std::string_view id, std::string_view admin, std::string_view note);
  std::vector<AuditEntry> audit_log(std::string_view record_id) const;
  /// The stored records as a dataset, verification states included.
  Dataset export_dataset() const;

 private:
  void exec(const char* sql) const;
  std::optional<StoredRecord> find_record_locked(std::string_view id) const;
  void write_record_locked(const ImageRecord& r);
  void audit_locked(std::string_view id, std::string_view action, std::string_view actor, std::string_view note);

  std::filesystem::path path_;
  std::filesystem::path blob_dir_;
  sqlite3* db_ = nullptr;
  mutable std::mutex mu_;
};

}  // namespace lt::service
