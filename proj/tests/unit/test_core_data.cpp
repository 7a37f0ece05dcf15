#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "lesion_triage/error.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/split.hpp"
#include "support/test_support.hpp"

using namespace lt;

namespace {

std::string line_for(const std::string& id, const std::string& label, const std::string& source) {
  std::string s = fmt::format(
      R"({{"id":"{}","path":"img/{}.png","label":"{}","provenance":{{"source":"{}"}},"verification":"verified","split":"unassigned","width_px":32,"height_px":32)",
      id, id, label, source);
  if (source == "augmented") s += fmt::format(R"(,"base_id":"b-{}","recipe_id":"rc-{}")", id, id);
  return s + "}";
}

Dataset parse(const std::string& text) {
  std::istringstream in(text);
  return parse_manifest(in);
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

TEST_CASE("empty manifest yields an empty dataset") {
  test::TempDir dir;
  std::ofstream(dir / "m.jsonl").close();
  const Dataset ds = load_manifest(dir / "m.jsonl");
  CHECK(ds.empty());
  for (const auto& [c, n] : class_distribution(ds)) CHECK(n == 0);
  CHECK(class_distribution(ds).size() == kNumClasses);
}

TEST_CASE("one record per class gives a distribution of ones") {
  std::string text;
  const char* tokens[] = {"warts", "hsv", "cancer", "candidiasis", "syphilis", "none"};
  for (int i = 0; i < 6; ++i) text += line_for(fmt::format("r{}", i), tokens[i], "clinician") + "\n";
  const Dataset ds = parse(text);
  REQUIRE(ds.size() == 6);
  for (const auto& [c, n] : class_distribution(ds)) CHECK(n == 1);
  CHECK(ds.records[2].label == DiseaseClass::PenileCancer);
}

TEST_CASE("2,627-record manifest with a 30/30/40 provenance mix") {
  // Enumerate the mix directly: 30% clinician, 30% app, remainder augmented.
  const std::size_t total = 2627;
  const std::size_t clinician = (total * 30 + 50) / 100;
  const std::size_t app = (total * 30 + 50) / 100;
  std::string text;
  for (std::size_t i = 0; i < total; ++i) {
    const char* src = i < clinician ? "clinician" : i < clinician + app ? "app" : "augmented";
    text += line_for(fmt::format("img{:05d}", i), "warts", src) + "\n";
  }
  const Dataset ds = parse(text);
  std::map<ProvenanceSource, std::size_t> tally;
  for (const auto& r : ds.records) ++tally[r.provenance.source];
  CHECK(tally[ProvenanceSource::Clinician] == 788);
  CHECK(tally[ProvenanceSource::AppSourced] == 788);
  CHECK(tally[ProvenanceSource::Augmented] == 1051);
  CHECK(ds.records.front().id == "img00000");
  CHECK(ds.records.back().id == "img02626");
}

TEST_CASE("class_distribution of the published validation composition") {
  const std::pair<DiseaseClass, int> shape[] = {
      {DiseaseClass::GenitalWarts, 45},      {DiseaseClass::HerpesEruption, 43},
      {DiseaseClass::PenileCancer, 29},      {DiseaseClass::PenileCandidiasis, 40},
      {DiseaseClass::SyphiliticChancre, 37}, {DiseaseClass::NonDiseased, 45}};
  Dataset ds;
  int k = 0;
  for (auto [c, n] : shape)
    for (int i = 0; i < n; ++i) ds.records.push_back(test::make_record(fmt::format("v{}", k++), c));
  const auto dist = class_distribution(ds);
  std::size_t sum = 0;
  for (auto [c, n] : shape) {
    CHECK(dist.at(c) == static_cast<std::size_t>(n));
    sum += dist.at(c);
  }
  CHECK(sum == 239);
}

TEST_CASE("class_distribution matches a linear-scan tally on random sets") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    Dataset ds = test::random_dataset(rng, 100);
    ds.records[trial].label.reset();  // one unlabeled record
    std::array<std::size_t, kNumClasses> oracle{};
    for (const auto& r : ds.records)
      if (r.label) ++oracle[static_cast<std::size_t>(*r.label)];
    const auto dist = class_distribution(ds);
    std::size_t sum = 0;
    for (auto c : kAllClasses) {
      CHECK(dist.at(c) == oracle[index_of(c)]);
      sum += dist.at(c);
    }
    CHECK(sum == 99);
  }
}

TEST_CASE("manifest errors carry the offending detail") {
  SUBCASE("malformed JSON reports the line number") {
    try {
      parse(line_for("a", "warts", "clinician") + "\n{not json\n");
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::MalformedLine);
      CHECK(e.detail().find("line 2") != std::string::npos);
    }
  }
  SUBCASE("missing required key") {
    CHECK(kind_of([] { parse(R"({"id":"a","path":"p","label":"warts"})"); }) == ErrorKind::MalformedLine);
  }
  SUBCASE("augmented record without recipe") {
    CHECK(kind_of([] {
            parse(R"({"id":"a","path":"p","label":"warts","provenance":{"source":"augmented"},"verification":"unverified","split":"unassigned","width_px":1,"height_px":1})");
          }) == ErrorKind::MalformedLine);
  }
  SUBCASE("duplicate id") {
    CHECK(kind_of([] { parse(line_for("a", "warts", "clinician") + "\n" + line_for("a", "hsv", "app")); }) ==
          ErrorKind::DuplicateId);
  }
  SUBCASE("unknown class token") {
    try {
      parse(line_for("a", "lichen", "clinician"));
      FAIL("no throw");
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::UnknownClass);
      CHECK(e.detail() == "lichen");
    }
  }
}

TEST_CASE("canonical manifests round-trip byte for byte, unknown keys included") {
  const std::string canonical =
      R"({"id":"a1","path":"img/a1.png","label":"warts","provenance":{"source":"clinician","origin_note":"Sri Lanka","contributor":7},"verification":"verified","split":"train","width_px":640,"height_px":480,"mask_path":"m/a1.png","site":"north","tags":["x",1]})"
      "\n"
      R"({"id":"a2","path":"img/a2.png","label":"unlabeled","provenance":{"source":"augmented"},"verification":"unverified","split":"unassigned","width_px":64,"height_px":64,"base_id":"b","recipe_id":"r","lesion_mask_path":"m/a2l.png"})"
      "\n";
  const Dataset ds = parse(canonical);
  CHECK(format_manifest(ds) == canonical);
  CHECK_FALSE(ds.records[1].label.has_value());
  CHECK(ds.records[0].extra.contains("site"));

  test::TempDir dir;
  save_manifest(ds, dir / "m.jsonl");
  CHECK(read_file(dir / "m.jsonl") == canonical);
  CHECK(load_manifest(dir / "m.jsonl") == ds);
}

TEST_CASE("validation quotas use floor plus largest remainder") {
  ClassCounts counts{{DiseaseClass::GenitalWarts, 100}};
  auto q = validation_quotas(counts, 0.91);
  CHECK(q.at(DiseaseClass::GenitalWarts) == 9);

  // 3 x 5 records at 10%: exact 0.5 each, total round(1.5) = 2 -> first two classes get one.
  ClassCounts even{{DiseaseClass::GenitalWarts, 5}, {DiseaseClass::HerpesEruption, 5}, {DiseaseClass::PenileCancer, 5}};
  q = validation_quotas(even, 0.9);
  CHECK(q.at(DiseaseClass::GenitalWarts) == 1);
  CHECK(q.at(DiseaseClass::HerpesEruption) == 1);
  CHECK(q.at(DiseaseClass::PenileCancer) == 0);
}

TEST_CASE("stratified_split of one class at 0.91") {
  Dataset ds;
  for (int i = 0; i < 100; ++i) ds.records.push_back(test::make_record(fmt::format("w{}", i), DiseaseClass::GenitalWarts));
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    auto split = stratified_split(ds, 0.91, seed);
    CHECK(split.train.size() == 91);
    CHECK(split.validation.size() == 9);
    for (const auto& r : split.train.records) CHECK(r.split == SplitAssignment::Train);
    for (const auto& r : split.validation.records) CHECK(r.split == SplitAssignment::Validation);
  }
}

TEST_CASE("stratified_split of a 2,627-record manifest lands near the published 239") {
  // Class sizes proportional to the published validation composition.
  const std::size_t sizes[] = {495, 473, 319, 440, 407, 493};
  Dataset ds;
  for (std::size_t c = 0; c < kNumClasses; ++c)
    for (std::size_t i = 0; i < sizes[c]; ++i)
      ds.records.push_back(test::make_record(fmt::format("c{}-{}", c, i), kAllClasses[c]));
  REQUIRE(ds.size() == 2627);
  auto split = stratified_split(ds, 0.91, 7);
  CHECK(split.validation.size() >= 235);
  CHECK(split.validation.size() <= 241);
  CHECK(split.train.size() + split.validation.size() == 2627);
}

TEST_CASE("stratified_split is deterministic and independent of record order") {
  std::mt19937_64 rng(5);
  Dataset ds = test::random_dataset(rng, 300);
  auto ids = [](const Dataset& d) {
    std::set<std::string> s;
    for (const auto& r : d.records) s.insert(r.id);
    return s;
  };
  const auto a = stratified_split(ds, 0.8, 42);
  const auto b = stratified_split(ds, 0.8, 42);
  CHECK(ids(a.validation) == ids(b.validation));
  CHECK(a.train == b.train);

  Dataset shuffled = ds;
  std::shuffle(shuffled.records.begin(), shuffled.records.end(), rng);
  CHECK(ids(stratified_split(shuffled, 0.8, 42).validation) == ids(a.validation));
  CHECK(ids(stratified_split(ds, 0.8, 43).validation) != ids(a.validation));
}

TEST_CASE("excluding augmented records from validation") {
  std::mt19937_64 rng(9);
  Dataset ds = test::random_dataset(rng, 400, 0.5);
  auto split = stratified_split(ds, 0.9, 3, false);
  for (const auto& r : split.validation.records) CHECK_FALSE(r.is_augmented());
  CHECK(split.train.size() + split.validation.size() == ds.size());
}

TEST_CASE("stratified_split rejects bad input") {
  Dataset ds;
  CHECK(kind_of([&] { stratified_split(ds, 0.91, 1); }) == ErrorKind::EmptyClass);
  ds.records.push_back(test::make_record("a", DiseaseClass::GenitalWarts));
  CHECK(kind_of([&] { stratified_split(ds, 1.0, 1); }) == ErrorKind::InvalidArgument);
  CHECK(kind_of([&] { stratified_split(ds, 0.0, 1); }) == ErrorKind::InvalidArgument);
  ds.records.push_back(test::make_record("b", DiseaseClass::GenitalWarts, ProvenanceSource::Augmented));
  ds.records.back().verification = Verification::Unverified;
  CHECK(kind_of([&] { stratified_split(ds, 0.5, 1); }) == ErrorKind::IneligibleRecord);
  ds.records.back().verification = Verification::ExpertVerified;
  ds.records.back().label.reset();
  CHECK(kind_of([&] { stratified_split(ds, 0.5, 1); }) == ErrorKind::IneligibleRecord);
}

TEST_CASE("split partition and stratification hold on random manifests") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> frac(0.05, 0.95);
  std::uniform_int_distribution<std::size_t> size(1, 150);
  for (int trial = 0; trial < 200; ++trial) {
    const Dataset ds = test::random_dataset(rng, size(rng));
    const double f = frac(rng);
    const auto split = stratified_split(ds, f, rng());
    std::multiset<std::string> in, out;
    for (const auto& r : ds.records) in.insert(r.id);
    for (const auto& r : split.train.records) out.insert(r.id);
    for (const auto& r : split.validation.records) out.insert(r.id);
    REQUIRE(in == out);
    const auto all = class_distribution(ds);
    const auto val = class_distribution(split.validation);
    for (auto c : kAllClasses) {
      if (all.at(c) == 0) continue;
      const double n = static_cast<double>(all.at(c));
      CHECK(std::abs(val.at(c) / n - (1.0 - f)) < 1.0 / n);
    }
  }
}
