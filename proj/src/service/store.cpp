#include "lesion_triage/service/store.hpp"

#include <chrono>
#include <random>
#include <sstream>

#include <fmt/chrono.h>
#include <fmt/format.h>
#include <sqlite3.h>

#include "lesion_triage/error.hpp"
#include "lesion_triage/hash.hpp"
#include "lesion_triage/manifest.hpp"

namespace lt::service {

namespace {

constexpr const char* kSchema = R"sql(
CREATE TABLE IF NOT EXISTS images (
  sha TEXT PRIMARY KEY,
  size_bytes INTEGER NOT NULL,
  upload_count INTEGER NOT NULL,
  first_seen TEXT NOT NULL
);
CREATE TABLE IF NOT EXISTS submissions (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  id TEXT NOT NULL UNIQUE,
  image_sha TEXT NOT NULL REFERENCES images(sha),
  questionnaire TEXT NOT NULL,
  country TEXT NOT NULL,
  status TEXT NOT NULL CHECK (status IN ('Pending', 'Classified', 'Failed')),
  result TEXT,
  error TEXT,
  saliency_sha TEXT,
  created_at TEXT NOT NULL,
  updated_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS submissions_created ON submissions(created_at);
CREATE INDEX IF NOT EXISTS submissions_status ON submissions(status);
CREATE TABLE IF NOT EXISTS records (
  id TEXT PRIMARY KEY,
  manifest_line TEXT NOT NULL,
  source TEXT NOT NULL,
  verification TEXT NOT NULL,
  image_sha TEXT,
  base_image_sha TEXT,
  updated_at TEXT NOT NULL
);
CREATE INDEX IF NOT EXISTS records_queue ON records(source, verification);
CREATE TABLE IF NOT EXISTS review_audit (
  seq INTEGER PRIMARY KEY AUTOINCREMENT,
  record_id TEXT NOT NULL,
  action TEXT NOT NULL,
  actor TEXT NOT NULL,
  note TEXT NOT NULL,
  at TEXT NOT NULL
);
)sql";

[[noreturn]] void fail(sqlite3* db, std::string_view what) {
  throw Error(ErrorKind::Io, fmt::format("{}: {}", what, sqlite3_errmsg(db)));
}

class Stmt {
 public:
  Stmt(sqlite3* db, const char* sql) : db_(db) {
    if (sqlite3_prepare_v2(db, sql, -1, &s_, nullptr) != SQLITE_OK) fail(db, "prepare");
  }
  ~Stmt() { sqlite3_finalize(s_); }
  Stmt(const Stmt&) = delete;
  Stmt& operator=(const Stmt&) = delete;

  Stmt& bind(int i, std::string_view v) {
    sqlite3_bind_text(s_, i, v.data(), static_cast<int>(v.size()), SQLITE_TRANSIENT);
    return *this;
  }
  Stmt& bind(int i, std::int64_t v) {
    sqlite3_bind_int64(s_, i, v);
    return *this;
  }
  Stmt& bind_null(int i) {
    sqlite3_bind_null(s_, i);
    return *this;
  }
  /// True while rows remain.
  bool step() {
    const int rc = sqlite3_step(s_);
    if (rc == SQLITE_ROW) return true;
    if (rc == SQLITE_DONE) return false;
    fail(db_, "step");
  }
  void run() {
    while (step()) {
    }
  }
  std::string text(int col) const {
    const auto* p = sqlite3_column_text(s_, col);
    return p ? std::string(reinterpret_cast<const char*>(p), sqlite3_column_bytes(s_, col)) : std::string();
  }
  bool is_null(int col) const { return sqlite3_column_type(s_, col) == SQLITE_NULL; }
  std::int64_t integer(int col) const { return sqlite3_column_int64(s_, col); }

 private:
  sqlite3* db_;
  sqlite3_stmt* s_ = nullptr;
};

class Transaction {
 public:
  explicit Transaction(sqlite3* db) : db_(db) {
    if (sqlite3_exec(db, "BEGIN IMMEDIATE", nullptr, nullptr, nullptr) != SQLITE_OK) fail(db, "begin");
  }
  ~Transaction() {
    if (!done_) sqlite3_exec(db_, "ROLLBACK", nullptr, nullptr, nullptr);
  }
  void commit() {
    if (sqlite3_exec(db_, "COMMIT", nullptr, nullptr, nullptr) != SQLITE_OK) fail(db_, "commit");
    done_ = true;
  }

 private:
  sqlite3* db_;
  bool done_ = false;
};

SubmissionStatus parse_status(std::string_view s) {
  if (s == "Classified") return SubmissionStatus::Classified;
  if (s == "Failed") return SubmissionStatus::Failed;
  return SubmissionStatus::Pending;
}

std::string new_id() {
  static std::mutex mu;
  static std::mt19937_64 rng{std::random_device{}()};
  std::lock_guard lock(mu);
  return fmt::format("s_{:016x}{:08x}", rng(), static_cast<std::uint32_t>(rng()));
}

ImageRecord parse_record_line(const std::string& line) {
  std::istringstream in(line);
  auto ds = parse_manifest(in);
  return std::move(ds.records.at(0));
}

}  // namespace

std::string_view token(SubmissionStatus s) {
  switch (s) {
    case SubmissionStatus::Pending: return "Pending";
    case SubmissionStatus::Classified: return "Classified";
    case SubmissionStatus::Failed: return "Failed";
  }
  return "?";
}

std::string_view token(Verdict v) { return v == Verdict::Verified ? "verified" : "rejected"; }

Verdict parse_verdict(std::string_view s) {
  if (s == "verified") return Verdict::Verified;
  if (s == "rejected") return Verdict::Rejected;
  throw Error(ErrorKind::InvalidArgument, fmt::format("verdict must be verified or rejected, got '{}'", s));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  return fmt::format("{:%Y-%m-%dT%H:%M:%S}.{:03d}Z", fmt::gmtime(std::chrono::system_clock::to_time_t(now)), ms);
}

Store::Store(const std::filesystem::path& path) : path_(path) {
  blob_dir_ = path;
  blob_dir_ += ".blobs";
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::filesystem::create_directories(blob_dir_, ec);
  if (ec) throw Error(ErrorKind::Io, fmt::format("cannot create {}: {}", blob_dir_.string(), ec.message()));
  if (sqlite3_open_v2(path.c_str(), &db_, SQLITE_OPEN_READWRITE | SQLITE_OPEN_CREATE | SQLITE_OPEN_FULLMUTEX,
                      nullptr) != SQLITE_OK) {
    const std::string msg = db_ ? sqlite3_errmsg(db_) : "out of memory";
    sqlite3_close(db_);
    throw Error(ErrorKind::Io, fmt::format("cannot open store {}: {}", path.string(), msg));
  }
  sqlite3_busy_timeout(db_, 5000);
  exec("PRAGMA journal_mode=WAL");
  exec("PRAGMA synchronous=NORMAL");
  exec("PRAGMA foreign_keys=ON");
  exec(kSchema);
}

Store::~Store() { sqlite3_close(db_); }

void Store::exec(const char* sql) const {
  char* err = nullptr;
  if (sqlite3_exec(db_, sql, nullptr, nullptr, &err) != SQLITE_OK) {
    std::string msg = err ? err : "unknown";
    sqlite3_free(err);
    throw Error(ErrorKind::Io, fmt::format("store: {}", msg));
  }
}

std::filesystem::path Store::blob_path(std::string_view sha) const {
  if (sha.size() < 3) throw Error(ErrorKind::InvalidArgument, "bad blob hash");
  return blob_dir_ / std::string(sha.substr(0, 2)) / std::string(sha);
}

std::string Store::put_blob(std::string_view bytes) {
  const auto sha = sha256_hex(bytes);
  const auto p = blob_path(sha);
  std::lock_guard lock(mu_);
  if (!std::filesystem::exists(p)) {
    std::filesystem::create_directories(p.parent_path());
    write_file_atomic(p, std::string(bytes));
  }
  Stmt(db_,
       "INSERT INTO images(sha, size_bytes, upload_count, first_seen) VALUES(?1, ?2, 1, ?3) "
       "ON CONFLICT(sha) DO UPDATE SET upload_count = upload_count + 1")
      .bind(1, sha)
      .bind(2, static_cast<std::int64_t>(bytes.size()))
      .bind(3, utc_now())
      .run();
  return sha;
}

std::string Store::read_blob(std::string_view sha) const {
  const auto p = blob_path(sha);
  if (!std::filesystem::exists(p)) throw Error(ErrorKind::NotFound, fmt::format("blob {}", sha));
  return read_file(p);
}

std::size_t Store::upload_count(std::string_view sha) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT upload_count FROM images WHERE sha = ?1");
  s.bind(1, sha);
  return s.step() ? static_cast<std::size_t>(s.integer(0)) : 0;
}

Submission Store::insert_submission(const Questionnaire& q, const std::string& image_sha,
                                    std::optional<std::string> created_at) {
  Submission sub;
  sub.image_sha = image_sha;
  sub.questionnaire = q;
  sub.created_at = created_at.value_or(utc_now());
  sub.updated_at = sub.created_at;
  std::lock_guard lock(mu_);
  for (int attempt = 0;; ++attempt) {
    sub.id = new_id();
    Stmt s(db_,
           "INSERT OR IGNORE INTO submissions(id, image_sha, questionnaire, country, status, created_at, updated_at) "
           "VALUES(?1, ?2, ?3, ?4, 'Pending', ?5, ?5)");
    s.bind(1, sub.id).bind(2, image_sha).bind(3, to_json(q).dump()).bind(4, q.country).bind(5, sub.created_at).run();
    if (sqlite3_changes(db_) == 1) break;
    if (attempt > 8) throw Error(ErrorKind::Io, "could not allocate a submission id");
  }
  return sub;
}

std::optional<Submission> Store::find_submission(std::string_view id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "SELECT id, image_sha, questionnaire, status, result, error, saliency_sha, created_at, updated_at "
         "FROM submissions WHERE id = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  Submission sub;
  sub.id = s.text(0);
  sub.image_sha = s.text(1);
  sub.questionnaire = parse_questionnaire(std::string_view(s.text(2)));
  sub.status = parse_status(s.text(3));
  if (!s.is_null(4)) sub.result = nlohmann::json::parse(s.text(4));
  if (!s.is_null(5)) sub.error = nlohmann::json::parse(s.text(5));
  sub.saliency_sha = s.text(6);
  sub.created_at = s.text(7);
  sub.updated_at = s.text(8);
  return sub;
}

std::vector<std::string> Store::pending_ids() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT id FROM submissions WHERE status = 'Pending' ORDER BY seq");
  std::vector<std::string> out;
  while (s.step()) out.push_back(s.text(0));
  return out;
}

void Store::mark_classified(std::string_view id, const nlohmann::json& result, const std::string& saliency_sha) {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "UPDATE submissions SET status = 'Classified', result = ?2, saliency_sha = ?3, error = NULL, "
         "updated_at = max(?4, created_at) WHERE id = ?1");
  s.bind(1, id).bind(2, result.dump()).bind(3, saliency_sha).bind(4, utc_now()).run();
  if (sqlite3_changes(db_) != 1) throw Error(ErrorKind::NotFound, std::string(id));
}

void Store::mark_failed(std::string_view id, const nlohmann::json& error) {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "UPDATE submissions SET status = 'Failed', error = ?2, updated_at = max(?3, created_at) WHERE id = ?1");
  s.bind(1, id).bind(2, error.dump()).bind(3, utc_now()).run();
  if (sqlite3_changes(db_) != 1) throw Error(ErrorKind::NotFound, std::string(id));
}

std::vector<Questionnaire> Store::questionnaires_between(std::string_view from, std::string_view to) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT questionnaire FROM submissions WHERE created_at >= ?1 AND created_at <= ?2 ORDER BY seq");
  s.bind(1, from).bind(2, to);
  std::vector<Questionnaire> out;
  while (s.step()) out.push_back(parse_questionnaire(std::string_view(s.text(0))));
  return out;
}

std::size_t Store::submission_count() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT count(*) FROM submissions");
  s.step();
  return static_cast<std::size_t>(s.integer(0));
}

bool Store::import_record(const ImageRecord& r, std::string_view image_bytes, std::string_view base_image_bytes) {
  const auto image_sha = image_bytes.empty() ? std::string() : put_blob(image_bytes);
  const auto base_sha = base_image_bytes.empty() ? std::string() : put_blob(base_image_bytes);
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "INSERT OR IGNORE INTO records(id, manifest_line, source, verification, image_sha, base_image_sha, "
         "updated_at) VALUES(?1, ?2, ?3, ?4, ?5, ?6, ?7)");
  s.bind(1, r.id)
      .bind(2, format_record(r))
      .bind(3, token(r.provenance.source))
      .bind(4, token(r.verification))
      .bind(5, image_sha)
      .bind(6, base_sha)
      .bind(7, utc_now())
      .run();
  return sqlite3_changes(db_) == 1;
}

std::optional<StoredRecord> Store::find_record_locked(std::string_view id) const {
  Stmt s(db_, "SELECT manifest_line, image_sha, base_image_sha FROM records WHERE id = ?1");
  s.bind(1, id);
  if (!s.step()) return std::nullopt;
  return StoredRecord{parse_record_line(s.text(0)), s.text(1), s.text(2)};
}

std::optional<StoredRecord> Store::find_record(std::string_view id) const {
  std::lock_guard lock(mu_);
  return find_record_locked(id);
}

void Store::write_record_locked(const ImageRecord& r) {
  Stmt s(db_, "UPDATE records SET manifest_line = ?2, verification = ?3, updated_at = ?4 WHERE id = ?1");
  s.bind(1, r.id).bind(2, format_record(r)).bind(3, token(r.verification)).bind(4, utc_now()).run();
}

void Store::audit_locked(std::string_view id, std::string_view action, std::string_view actor, std::string_view note) {
  Stmt(db_, "INSERT INTO review_audit(record_id, action, actor, note, at) VALUES(?1, ?2, ?3, ?4, ?5)")
      .bind(1, id)
      .bind(2, action)
      .bind(3, actor)
      .bind(4, note)
      .bind(5, utc_now())
      .run();
}

std::vector<ImageRecord> Store::scan_records() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT manifest_line FROM records ORDER BY id");
  std::vector<ImageRecord> out;
  while (s.step()) out.push_back(parse_record_line(s.text(0)));
  return out;
}

std::vector<StoredRecord> Store::review_queue(std::size_t offset, std::size_t limit) const {
  std::lock_guard lock(mu_);
  Stmt s(db_,
         "SELECT manifest_line, image_sha, base_image_sha FROM records "
         "WHERE source = 'augmented' AND verification = 'unverified' ORDER BY id LIMIT ?1 OFFSET ?2");
  s.bind(1, static_cast<std::int64_t>(limit)).bind(2, static_cast<std::int64_t>(offset));
  std::vector<StoredRecord> out;
  while (s.step()) out.push_back({parse_record_line(s.text(0)), s.text(1), s.text(2)});
  return out;
}

std::size_t Store::review_queue_size() const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT count(*) FROM records WHERE source = 'augmented' AND verification = 'unverified'");
  s.step();
  return static_cast<std::size_t>(s.integer(0));
}

ImageRecord Store::apply_verdict(std::string_view id, Verdict v, std::string_view reviewer, std::string_view note) {
  if (reviewer.empty()) throw Error(ErrorKind::InvalidArgument, "reviewer is required");
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  auto found = find_record_locked(id);
  if (!found) throw Error(ErrorKind::NotFound, std::string(id));
  auto& r = found->record;
  if (!r.is_augmented()) throw Error(ErrorKind::NotAugmented, std::string(id));
  if (r.verification != Verification::Unverified) throw Error(ErrorKind::AlreadyReviewed, std::string(id));
  r.verification = v == Verdict::Verified ? Verification::ExpertVerified : Verification::Rejected;
  write_record_locked(r);
  audit_locked(id, token(v), reviewer, note);
  tx.commit();
  return r;
}

ImageRecord Store::admin_reset(std::string_view id, std::string_view admin, std::string_view note) {
  std::lock_guard lock(mu_);
  Transaction tx(db_);
  auto found = find_record_locked(id);
  if (!found) throw Error(ErrorKind::NotFound, std::string(id));
  auto& r = found->record;
  r.verification = Verification::Unverified;
  write_record_locked(r);
  audit_locked(id, "reset", admin, note);
  tx.commit();
  return r;
}

std::vector<AuditEntry> Store::audit_log(std::string_view record_id) const {
  std::lock_guard lock(mu_);
  Stmt s(db_, "SELECT seq, record_id, action, actor, note, at FROM review_audit WHERE record_id = ?1 ORDER BY seq");
  s.bind(1, record_id);
  std::vector<AuditEntry> out;
  while (s.step()) out.push_back({s.integer(0), s.text(1), s.text(2), s.text(3), s.text(4), s.text(5)});
  return out;
}

Dataset Store::export_dataset() const {
  Dataset ds;
  ds.records = scan_records();
  return ds;
}

}  // namespace lt::service
