#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <set>
#include <thread>

#include <httplib.h>

#include "doctest.h"
#include "lesion_triage/error.hpp"
#include "lesion_triage/image.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/service/http.hpp"
#include "lesion_triage/service/service.hpp"
#include "lesion_triage/synth.hpp"
#include "support/table2_log.hpp"
#include "support/test_support.hpp"

using namespace lt;
using namespace lt::service;

namespace {

const std::filesystem::path kContent = std::filesystem::path(LT_SOURCE_DIR) / "content" / "education.yaml";

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected lt::Error");
  return ErrorKind::Io;
}

std::string field_of(const nlohmann::json& j) {
  try {
    parse_questionnaire(j);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidQuestionnaire) return e.detail();
  }
  return "";
}

nlohmann::json valid_questionnaire() {
  return {{"age_band", "18-30"}, {"country", "US"}, {"symptoms", {"none_other"}}, {"last_contact", "under1mo"}};
}

std::string png_bytes(DiseaseClass c, std::uint64_t seed) {
  const auto png = encode_png(synth::make_scene(c, seed, {.size = 32}).image);
  return {png.begin(), png.end()};
}

struct Models {
  seg::SegModel seg;
  cls::ClsModel cls;
};

const Models& models() {
  static const Models m = [] {
    std::vector<seg::TrainPair> pairs;
    for (int i = 0; i < 6; ++i) {
      const auto s = synth::make_scene(kAllClasses[i % kNumClasses], 900 + i, {.size = 32});
      pairs.push_back({s.image, s.subject});
    }
    seg::SegModelConfig sc;
    sc.input_size = 32;
    sc.depth = 2;
    sc.base_channels = 8;
    sc.epochs = 25;
    sc.learning_rate = 1e-2;
    sc.batch_size = 3;
    auto cc = cls::ClsModelConfig::small_cnn(32);
    cc.width = 8;
    return Models{seg::SegModel::train(pairs, sc), cls::ClsModel::create(cc)};
  }();
  return m;
}

ServiceConfig config_in(const test::TempDir& dir) {
  ServiceConfig c;
  c.store_path = dir / "store.db";
  c.content_path = kContent;
  c.review_token = "secret-token";
  c.max_upload_bytes = 64 * 1024;
  return c;
}

std::unique_ptr<Service> make_service(const ServiceConfig& c) {
  return std::make_unique<Service>(c, models().seg, models().cls);
}

// Independent group-by over raw questionnaires.
std::map<std::string, std::map<std::string, std::size_t>> brute_tally(const std::vector<Questionnaire>& qs,
                                                                       const std::set<std::string>& top) {
  std::map<std::string, std::map<std::string, std::size_t>> t;
  for (const auto& q : qs) {
    for (const std::string col : {std::string("all"), top.count(q.country) ? q.country : std::string("other")}) {
      auto& m = t[col];
      ++m["total"];
      ++m[std::string("age:") + std::string(token(q.age_band))];
      ++m[std::string("contact:") + std::string(token(q.last_contact))];
      for (auto s : q.symptoms) ++m[std::string("sym:") + std::string(token(s))];
    }
  }
  return t;
}

std::size_t count_of(const std::vector<Tally>& ts, std::string_view key) {
  for (const auto& t : ts)
    if (t.key == key) return t.count;
  FAIL("missing key " << key);
  return 0;
}

}  // namespace

TEST_CASE("questionnaire validation") {
  const auto q = parse_questionnaire(nlohmann::json{
      {"age_band", "over50"}, {"country", "sg"}, {"symptoms", {"penile_pain", "penile_discharge"}},
      {"last_contact", "1to3mo"}});
  CHECK(q.age_band == AgeBand::Over50);
  CHECK(q.country == "SG");
  CHECK(q.symptoms == std::set{Symptom::PenilePain, Symptom::PenileDischarge});
  CHECK(q.last_contact == LastContact::From1To3Mo);
  CHECK(parse_questionnaire(std::string_view(to_json(q).dump())) == q);

  auto j = valid_questionnaire();
  CHECK(field_of(j).empty());
  j["age_band"] = "51+";
  CHECK(field_of(j) == "age_band");
  j = valid_questionnaire();
  j["country"] = "USA";
  CHECK(field_of(j) == "country");
  j["country"] = "1A";
  CHECK(field_of(j) == "country");
  j = valid_questionnaire();
  j["symptoms"] = nlohmann::json::array();
  CHECK(field_of(j) == "symptoms");
  j["symptoms"] = {"none_other", "penile_pain"};
  CHECK(field_of(j) == "symptoms");
  j["symptoms"] = {"itching"};
  CHECK(field_of(j) == "symptoms");
  j["symptoms"] = {"penile_pain", "penile_pain"};
  CHECK(field_of(j) == "symptoms");
  j = valid_questionnaire();
  j.erase("last_contact");
  CHECK(field_of(j) == "last_contact");
  CHECK(kind_of([] { parse_questionnaire(std::string_view("{not json")); }) == ErrorKind::InvalidQuestionnaire);
}

TEST_CASE("percent rendering is half-up at one decimal") {
  CHECK(format_percent(0, 0) == "-");
  CHECK(format_percent(271, 437) == "62.0");
  CHECK(format_percent(1, 8) == "12.5");
  CHECK(format_percent(1, 16) == "6.3");
  CHECK(format_percent(1, 1) == "100.0");
  CHECK(format_percent(0, 5) == "0.0");
  // rendered tenths t must satisfy |1000 c / n - t| <= 1/2, ties upward
  for (std::size_t n = 1; n <= 400; ++n)
    for (std::size_t c = 0; c <= n; ++c) {
      const auto s = format_percent(c, n);
      const auto dot = s.find('.');
      REQUIRE(dot != std::string::npos);
      REQUIRE(s.size() == dot + 2);
      const long t = std::stol(s.substr(0, dot)) * 10 + (s[dot + 1] - '0');
      const long diff2 = 2 * (static_cast<long>(c) * 1000 - t * static_cast<long>(n));
      REQUIRE(std::abs(diff2) <= static_cast<long>(n));
      if (std::abs(diff2) == static_cast<long>(n)) REQUIRE(diff2 < 0);
    }
}

TEST_CASE("published user table from a synthetic log") {
  const auto qs = test::table2_questionnaires();
  REQUIRE(qs.size() == 437);
  test::TempDir dir;
  auto svc = make_service(config_in(dir));
  const auto sha = svc->store().put_blob(png_bytes(DiseaseClass::NonDiseased, 1));
  for (std::size_t i = 0; i < qs.size(); ++i) svc->store().insert_submission(qs[i], sha, test::table2_timestamp(i));
  // outside the window
  svc->store().insert_submission(qs[0], sha, "2023-06-30T23:59:59.999Z");
  svc->store().insert_submission(qs[0], sha, "2023-11-01T00:00:00.000Z");

  const auto s = svc->analytics("2023-07-01", "2023-10-31");
  REQUIRE(s.total == 437);
  REQUIRE(s.columns.size() == 7);
  for (std::size_t k = 0; k < 5; ++k) {
    CHECK(s.country[k].key == test::kTable2Counts[k].code);
    CHECK(s.country[k].count == static_cast<std::size_t>(test::kTable2Counts[k].total));
    CHECK(s.country[k].percent == test::kTable2Printed[k + 1].total_share);
  }
  CHECK(s.country[5].key == "other");
  CHECK(s.country[5].count == 0);
  CHECK(s.columns[6].total == 0);
  CHECK(s.columns[6].age_band[0].percent == "-");
  for (std::size_t col = 0; col < 6; ++col) {
    const auto& got = s.columns[col];
    const auto& want = test::kTable2Printed[col];
    CHECK(got.country == want.code);
    for (std::size_t k = 0; k < 3; ++k) CHECK(got.age_band[k].percent == want.age[k]);
    for (std::size_t k = 0; k < 4; ++k) CHECK(got.symptoms[k].percent == want.symptoms[k]);
    for (std::size_t k = 0; k < 4; ++k) CHECK(got.last_contact[k].percent == want.contact[k]);
  }
  const auto& all = s.columns[0];
  CHECK(all.symptoms[0].count == 140);
  CHECK(all.symptoms[1].count == 110);
  CHECK(all.symptoms[2].count == 114);
  CHECK(all.symptoms[3].count == 242);

  CHECK(svc->analytics("", "").total == 439);
  const auto empty = svc->analytics("2020-01-01", "2020-12-31");
  CHECK(empty.total == 0);
  for (const auto& t : empty.columns[0].symptoms) CHECK(t.percent == "-");
  CHECK(to_json(empty)["total"] == 0);

  CHECK(kind_of([&] { svc->analytics("2023-10-01", "2023-07-01"); }) == ErrorKind::InvalidRange);
  CHECK(kind_of([&] { svc->analytics("last week", ""); }) == ErrorKind::InvalidRange);
  CHECK_NOTHROW(svc->analytics("2023-07-01T00:00:00Z", "2023-07-01T00:00:00.5Z"));
}

TEST_CASE("analytics equals a brute-force group-by on random logs") {
  std::mt19937_64 rng(2024);
  const std::vector<std::string> countries = {"US", "SG", "CA", "GB", "VN", "NG", "KE", "IN", "BR"};
  for (int trial = 0; trial < 40; ++trial) {
    std::vector<Questionnaire> qs(rng() % 300);
    for (auto& q : qs) {
      q.country = countries[rng() % (2 + trial % 8)];
      q.age_band = kAllAgeBands[rng() % 3];
      q.last_contact = kAllLastContacts[rng() % 4];
      if (rng() % 3 == 0) {
        q.symptoms = {Symptom::NoneOther};
      } else {
        for (int k = 0; k < 3; ++k)
          if (rng() % 2) q.symptoms.insert(kAllSymptoms[k]);
        if (q.symptoms.empty()) q.symptoms.insert(Symptom::PenilePain);
      }
    }
    const auto s = summarize(qs);
    std::set<std::string> top;
    for (std::size_t k = 0; k + 1 < s.country.size(); ++k) top.insert(s.country[k].key);
    // top five really are the five largest
    std::map<std::string, std::size_t> per;
    for (const auto& q : qs) ++per[q.country];
    for (const auto& [code, n] : per)
      if (!top.count(code))
        for (const auto& t : top) CHECK(per[t] >= n);
    CHECK(top.size() == std::min<std::size_t>(5, per.size()));

    auto oracle = brute_tally(qs, top);
    std::size_t country_sum = 0;
    for (const auto& t : s.country) country_sum += t.count;
    CHECK(country_sum == s.total);
    CHECK(s.total == qs.size());
    for (const auto& col : s.columns) {
      auto& want = oracle[col.country];
      CHECK(col.total == want["total"]);
      std::size_t age = 0, contact = 0;
      for (auto a : kAllAgeBands) {
        CHECK(count_of(col.age_band, token(a)) == want[std::string("age:") + std::string(token(a))]);
        age += count_of(col.age_band, token(a));
      }
      for (auto c : kAllLastContacts) {
        CHECK(count_of(col.last_contact, token(c)) == want[std::string("contact:") + std::string(token(c))]);
        contact += count_of(col.last_contact, token(c));
      }
      for (auto x : kAllSymptoms) {
        CHECK(count_of(col.symptoms, token(x)) == want[std::string("sym:") + std::string(token(x))]);
        CHECK(count_of(col.symptoms, token(x)) <= col.total);
      }
      CHECK(age == col.total);
      CHECK(contact == col.total);
    }
  }
}

TEST_CASE("submission intake") {
  test::TempDir dir;
  auto svc = make_service(config_in(dir));
  const auto q = parse_questionnaire(valid_questionnaire());
  CHECK(kind_of([&] { svc->submit_scan("", q); }) == ErrorKind::UndecodableImage);
  CHECK(kind_of([&] { svc->submit_scan("definitely not an image", q); }) == ErrorKind::UndecodableImage);
  CHECK(kind_of([&] { svc->submit_scan(std::string(64 * 1024 + 1, 'x'), q); }) == ErrorKind::PayloadTooLarge);
  CHECK(kind_of([&] { svc->submit_scan(png_bytes(DiseaseClass::NonDiseased, 1), "{}"); }) ==
        ErrorKind::InvalidQuestionnaire);
  CHECK(svc->store().submission_count() == 0);
  CHECK(kind_of([&] { svc->result_json("s_nope"); }) == ErrorKind::NotFound);

  const auto img = png_bytes(DiseaseClass::HerpesEruption, 2);
  std::set<std::string> ids;
  for (int i = 0; i < 1000; ++i) ids.insert(svc->submit_scan(img, q).id);
  CHECK(ids.size() == 1000);
  CHECK(svc->store().submission_count() == 1000);
  const auto pending = svc->store().pending_ids();
  CHECK(std::set<std::string>(pending.begin(), pending.end()) == ids);
  const auto sha = svc->store().find_submission(*ids.begin())->image_sha;
  CHECK(svc->store().upload_count(sha) == 1000);
  CHECK(svc->store().read_blob(sha) == img);
  std::size_t blobs = 0;
  for (const auto& e : std::filesystem::recursive_directory_iterator(dir / "store.db.blobs"))
    blobs += e.is_regular_file();
  CHECK(blobs == 1);
  const auto pend = svc->result_json(*ids.begin());
  CHECK(pend["status"] == "Pending");
  CHECK_FALSE(pend.contains("result"));
  CHECK_FALSE(pend.contains("education"));
}

TEST_CASE("pending submissions survive a restart and are classified") {
  test::TempDir dir;
  const auto cfg = config_in(dir);
  const auto q = parse_questionnaire(valid_questionnaire());
  std::vector<std::string> ids;
  {
    auto svc = make_service(cfg);
    for (int i = 0; i < 3; ++i) ids.push_back(svc->submit_scan(png_bytes(kAllClasses[i], 10 + i), q).id);
  }
  auto svc = make_service(cfg);
  svc->start();
  svc->wait_idle();
  for (const auto& id : ids) {
    const auto j = svc->result_json(id);
    REQUIRE(j["status"] == "Classified");
    const auto cls = parse_class(j["final_class"].get<std::string>());
    CHECK(j["education"]["class"] == token(cls));
    CHECK(j["education"]["symptoms_text"] == svc->education(cls).symptoms_text);
    CHECK(j["confidence"].get<double>() == j["result"]["refined"]["probs"][std::string(token(cls))].get<double>());
    CHECK(j["saliency_url"] == "/v1/scans/" + id + "/saliency.png");
    const auto overlay = decode_image(svc->saliency_png(id));
    CHECK(overlay.cols == 32);
    CHECK(j["created_at"].get<std::string>() <= j["updated_at"].get<std::string>());
  }
  svc->stop();
}

TEST_CASE("review verdicts") {
  test::TempDir dir;
  auto svc = make_service(config_in(dir));
  auto& store = svc->store();
  std::mt19937_64 rng(9);
  std::vector<std::string> aug;
  for (int i = 0; i < 50; ++i) {
    auto r = test::make_record(fmt::format("aug-{:02d}", i), kAllClasses[i % 5], ProvenanceSource::Augmented);
    r.verification = Verification::Unverified;
    CHECK(store.import_record(r, "composite-" + r.id, "base"));
    aug.push_back(r.id);
  }
  for (int i = 0; i < 7; ++i) store.import_record(test::make_record(fmt::format("clin-{}", i), kAllClasses[i % 6]), "c");
  CHECK(store.review_queue_size() == 50);
  CHECK_FALSE(store.import_record(test::make_record("aug-00", DiseaseClass::GenitalWarts), ""));

  std::size_t verified = 0;
  for (const auto& id : aug) {
    const bool ok = rng() % 2;
    verified += ok;
    const auto r = svc->review_verdict(id, ok ? Verdict::Verified : Verdict::Rejected, "dr-a", "looks fine");
    CHECK(r.verification == (ok ? Verification::ExpertVerified : Verification::Rejected));
  }
  std::size_t eligible = 0, eligible_aug = 0;
  for (const auto& r : store.scan_records()) {
    eligible += training_eligible(r);
    eligible_aug += training_eligible(r) && r.is_augmented();
  }
  CHECK(eligible_aug == verified);
  CHECK(eligible == verified + 7);
  CHECK(store.review_queue_size() == 0);

  CHECK(kind_of([&] { svc->review_verdict("aug-00", Verdict::Verified, "dr-b", ""); }) == ErrorKind::AlreadyReviewed);
  CHECK(kind_of([&] { svc->review_verdict("clin-0", Verdict::Verified, "dr-b", ""); }) == ErrorKind::NotAugmented);
  CHECK(kind_of([&] { svc->review_verdict("nope", Verdict::Verified, "dr-b", ""); }) == ErrorKind::NotFound);
  const auto log = store.audit_log("aug-00");
  REQUIRE(log.size() == 1);
  CHECK(log[0].actor == "dr-a");
  CHECK(log[0].note == "looks fine");
  CHECK_FALSE(log[0].at.empty());

  CHECK(store.admin_reset("aug-00", "admin", "re-review").verification == Verification::Unverified);
  CHECK(store.review_queue_size() == 1);
  CHECK(store.audit_log("aug-00").size() == 2);
  CHECK(svc->review_verdict("aug-00", Verdict::Rejected, "dr-b", "").verification == Verification::Rejected);
}

TEST_CASE("verification never moves backward through verdicts") {
  test::TempDir dir;
  auto svc = make_service(config_in(dir));
  std::mt19937_64 rng(31);
  for (int i = 0; i < 20; ++i) {
    auto r = test::make_record(fmt::format("a{}", i), DiseaseClass::PenileCancer, ProvenanceSource::Augmented);
    r.verification = Verification::Unverified;
    svc->store().import_record(r, "");
  }
  std::map<std::string, Verification> seen;
  for (int step = 0; step < 400; ++step) {
    const auto id = fmt::format("a{}", rng() % 20);
    try {
      svc->review_verdict(id, rng() % 2 ? Verdict::Verified : Verdict::Rejected, "r", "");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::AlreadyReviewed);
    }
    const auto now = svc->store().find_record(id)->record.verification;
    if (seen.count(id) && seen[id] != Verification::Unverified) CHECK(now == seen[id]);
    seen[id] = now;
  }
}

TEST_CASE("education content") {
  EducationLibrary lib(kContent);
  std::set<std::string> texts;
  for (auto c : kAllClasses) {
    const auto e = lib.get(c);
    CHECK(e.cls == c);
    texts.insert(e.symptoms_text + e.confirmatory_testing_text + e.treatment_text);
    CHECK_FALSE(e.resource_links.empty());
  }
  CHECK(texts.size() == kNumClasses);
  const auto syph = lib.get(DiseaseClass::SyphiliticChancre).confirmatory_testing_text;
  CHECK(syph.find("erologic") != std::string::npos);
  CHECK(lib.get(DiseaseClass::NonDiseased).confirmatory_testing_text.find("screening") != std::string::npos);

  test::TempDir dir;
  const auto path = dir / "education.yaml";
  std::filesystem::copy_file(kContent, path);
  EducationLibrary edit(path);
  auto text = read_file(path);
  const std::string marker = "Penicillin injection is the standard treatment.";
  REQUIRE(text.find(marker) != std::string::npos);
  text.replace(text.find(marker), marker.size(), "Edited treatment text.");
  write_file_atomic(path, text);
  CHECK(edit.get(DiseaseClass::SyphiliticChancre).treatment_text.find("Penicillin") != std::string::npos);
  edit.reload();
  CHECK(edit.get(DiseaseClass::SyphiliticChancre).treatment_text.find("Edited treatment text.") == 0);

  // dropping an entry fails validation and keeps the last good content
  text.replace(text.find("\ncandidiasis:"), 13, "\ncandidosis:");
  write_file_atomic(path, text);
  try {
    edit.reload();
    FAIL("no throw");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MissingContent);
    CHECK(e.detail() == "candidiasis");
  }
  CHECK(edit.get(DiseaseClass::PenileCandidiasis).symptoms_text.find("itching") != std::string::npos);
  CHECK(kind_of([&] { EducationLibrary bad(path); }) == ErrorKind::MissingContent);
}

TEST_CASE("http endpoints") {
  test::TempDir dir;
  auto svc = make_service(config_in(dir));
  auto r = test::make_record("aug-1", DiseaseClass::GenitalWarts, ProvenanceSource::Augmented);
  r.verification = Verification::Unverified;
  r.extra["recipe"] = {{"recipe_id", "warts-1"}, {"scale", 1.2}};
  svc->store().import_record(r, png_bytes(DiseaseClass::GenitalWarts, 3), png_bytes(DiseaseClass::NonDiseased, 3));
  svc->start();
  HttpServer http(*svc);
  const int port = http.start("127.0.0.1", 0);
  httplib::Client cli("127.0.0.1", port);

  const httplib::MultipartFormDataItems form = {
      {"image", png_bytes(DiseaseClass::HerpesEruption, 4), "scan.png", "image/png"},
      {"questionnaire", valid_questionnaire().dump(), "", "application/json"},
  };
  auto res = cli.Post("/v1/scans", form);
  REQUIRE(res);
  CHECK(res->status == 202);
  const auto id = nlohmann::json::parse(res->body)["id"].get<std::string>();
  svc->wait_idle();
  res = cli.Get("/v1/scans/" + id);
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto body = nlohmann::json::parse(res->body);
  CHECK(body["status"] == "Classified");
  CHECK(body["education"]["class"] == body["final_class"]);
  res = cli.Get(body["saliency_url"].get<std::string>());
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  CHECK(decode_image(res->body).cols == 32);

  CHECK(cli.Get("/v1/scans/s_missing")->status == 404);
  const httplib::MultipartFormDataItems empty = {
      {"image", "", "scan.png", "image/png"}, {"questionnaire", valid_questionnaire().dump(), "", ""}};
  res = cli.Post("/v1/scans", empty);
  CHECK(res->status == 422);
  CHECK(nlohmann::json::parse(res->body)["error"] == "UndecodableImage");
  const httplib::MultipartFormDataItems big = {
      {"image", std::string(70 * 1024, 'x'), "scan.png", "image/png"},
      {"questionnaire", valid_questionnaire().dump(), "", ""}};
  res = cli.Post("/v1/scans", big);
  CHECK(res->status == 413);
  CHECK(nlohmann::json::parse(res->body)["error"] == "PayloadTooLarge");
  auto bad_q = valid_questionnaire();
  bad_q["last_contact"] = "yesterday";
  res = cli.Post("/v1/scans", httplib::MultipartFormDataItems{{"image", png_bytes(DiseaseClass::NonDiseased, 5), "a.png", ""},
                                                               {"questionnaire", bad_q.dump(), "", ""}});
  CHECK(res->status == 422);
  CHECK(nlohmann::json::parse(res->body)["field"] == "last_contact");

  res = cli.Get("/v1/analytics/summary?from=2000-01-01&to=2100-01-01");
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["total"] == 1);
  CHECK(cli.Get("/v1/analytics/summary?from=2023-02-01&to=2023-01-01")->status == 400);

  res = cli.Get("/v1/education/syphilis");
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["confirmatory_testing_text"].get<std::string>().find("erologic") !=
        std::string::npos);
  CHECK(cli.Get("/v1/education/flu")->status == 404);

  const std::string verdict = R"({"verdict":"verified","reviewer":"dr-x","note":"ok"})";
  CHECK(cli.Get("/v1/review/queue")->status == 401);
  CHECK(cli.Post("/v1/review/aug-1", verdict, "application/json")->status == 401);
  httplib::Headers wrong = {{"Authorization", "Bearer nope"}};
  CHECK(cli.Post("/v1/review/aug-1", wrong, verdict, "application/json")->status == 401);

  cli.set_bearer_token_auth("secret-token");
  res = cli.Get("/v1/review/queue?limit=10");
  REQUIRE(res->status == 200);
  auto queue = nlohmann::json::parse(res->body);
  REQUIRE(queue["items"].size() == 1);
  CHECK(queue["items"][0]["recipe"]["recipe_id"] == "warts-1");
  CHECK(cli.Get(queue["items"][0]["image_url"].get<std::string>())->body ==
        png_bytes(DiseaseClass::GenitalWarts, 3));
  CHECK(cli.Get(queue["items"][0]["base_image_url"].get<std::string>())->status == 200);
  CHECK(cli.Get("/v1/review/queue?limit=abc")->status == 400);

  res = cli.Post("/v1/review/aug-1", verdict, "application/json");
  CHECK(res->status == 200);
  CHECK(nlohmann::json::parse(res->body)["training_eligible"] == true);
  CHECK(cli.Post("/v1/review/aug-1", verdict, "application/json")->status == 409);
  CHECK(cli.Post("/v1/review/missing", verdict, "application/json")->status == 404);
  CHECK(cli.Post("/v1/review/aug-1", R"({"verdict":"maybe"})", "application/json")->status == 400);
  CHECK(nlohmann::json::parse(cli.Get("/v1/review/queue")->body)["items"].empty());

  http.stop();
  svc->stop();
}

TEST_CASE("config from the environment") {
  setenv("LT_MAX_UPLOAD_BYTES", "1234", 1);
  setenv("LT_REVIEW_TOKEN", "tok", 1);
  setenv("LT_STORE_PATH", "/tmp/x.db", 1);
  setenv("LT_MODEL_DIR", "/tmp/models", 1);
  auto c = ServiceConfig::from_env();
  CHECK(c.max_upload_bytes == 1234);
  CHECK(c.review_token == "tok");
  CHECK(c.store_path == "/tmp/x.db");
  CHECK(c.model_dir == "/tmp/models");
  setenv("LT_MAX_UPLOAD_BYTES", "lots", 1);
  CHECK_THROWS_AS(ServiceConfig::from_env(), Error);
  unsetenv("LT_MAX_UPLOAD_BYTES");
  CHECK(ServiceConfig::from_env().max_upload_bytes == kDefaultMaxUploadBytes);
  for (auto v : {"LT_REVIEW_TOKEN", "LT_STORE_PATH", "LT_MODEL_DIR"}) unsetenv(v);
  test::TempDir dir;
  auto cfg = config_in(dir);
  cfg.model_dir = dir / "none";
  CHECK(kind_of([&] { Service::open(cfg); }) == ErrorKind::ModelNotLoaded);
}
