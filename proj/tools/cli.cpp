#include "cli.hpp"

#include <csignal>
#include <filesystem>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "lesion_triage/augment.hpp"
#include "lesion_triage/classifier.hpp"
#include "lesion_triage/evaluator.hpp"
#include "lesion_triage/hash.hpp"
#include "lesion_triage/image.hpp"
#include "lesion_triage/ingest.hpp"
#include "lesion_triage/manifest.hpp"
#include "lesion_triage/pipeline.hpp"
#include "lesion_triage/segmenter.hpp"
#include "lesion_triage/service/http.hpp"
#include "lesion_triage/service/service.hpp"
#include "lesion_triage/split.hpp"

#ifndef LT_GIT_DESCRIBE
#define LT_GIT_DESCRIBE "unknown"
#endif
#ifndef LT_VERSION
#define LT_VERSION "0.0.0"
#endif

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace lt::cli {

namespace {

struct Common {
  std::string out_dir = ".";
  std::uint64_t seed = kDefaultSeed;
  std::vector<std::string> sets;
  CLI::Option* seed_opt = nullptr;

  bool seed_given() const { return seed_opt && seed_opt->count() > 0; }
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out-dir", c.out_dir, "Directory for run-header.json and reports")->capture_default_str();
  c.seed_opt = sub->add_option("--seed", c.seed, "Random seed")->capture_default_str();
  sub->add_option("--set", c.sets, "Config override key=value (repeatable)")->allow_extra_args(false);
}

fs::path root_of(const fs::path& manifest) {
  return manifest.has_parent_path() ? manifest.parent_path() : fs::path(".");
}

std::string rel(const fs::path& p, const fs::path& base) {
  return fs::relative(fs::absolute(p), fs::absolute(base)).generic_string();
}

json overridden(json base, const Common& c) {
  try {
    return apply_overrides(std::move(base), c.sets);
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(e.what());
  }
}

template <class F>
auto checked_config(F&& f) {
  try {
    return f();
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::InvalidArgument) throw UsageError(e.detail());
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw UsageError(e.what());
  }
}

void write_header(const Common& c, std::string_view sub, std::uint64_t seed, const json& config) {
  fs::create_directories(c.out_dir);
  json h;
  h["tool"] = "lesion-triage";
  h["version"] = LT_VERSION;
  h["subcommand"] = sub;
  h["seed"] = seed;
  h["config_hash"] = sha256_hex(config.dump());
  h["git_describe"] = LT_GIT_DESCRIBE;
  h["config"] = config;
  write_file_atomic(fs::path(c.out_dir) / "run-header.json", h.dump(2) + "\n");
}

std::uint64_t seed_of(const json& cfg) { return cfg.at("seed").get<std::uint64_t>(); }

// ingest ---------------------------------------------------------------

struct IngestArgs {
  std::string input, manifest, source = "clinician", note;
  bool verified = false;
};

int do_ingest(const IngestArgs& a, const Common& c, std::ostream& out) {
  json cfg{{"input", a.input}, {"manifest", a.manifest}, {"source", a.source}, {"verified", a.verified},
           {"origin_note", a.note}, {"seed", c.seed}};
  cfg = overridden(cfg, c);
  IngestOptions o;
  o.source = checked_config([&] { return parse_source(cfg["source"].get<std::string>()); });
  if (o.source == ProvenanceSource::Augmented) throw UsageError("ingest cannot create augmented records");
  o.verification = cfg["verified"].get<bool>() ? Verification::ExpertVerified : Verification::Unverified;
  o.origin_note = cfg["origin_note"].get<std::string>();
  const fs::path manifest = cfg["manifest"].get<std::string>();
  const auto ds = ingest_directory(cfg["input"].get<std::string>(), root_of(manifest), o);
  save_manifest(ds, manifest);
  write_header(c, "ingest", seed_of(cfg), cfg);
  json summary{{"records", ds.size()}};
  for (const auto& [cls, n] : class_distribution(ds)) summary["classes"][std::string(token(cls))] = n;
  out << summary.dump() << "\n";
  return kOk;
}

// augment --------------------------------------------------------------

struct AugmentArgs {
  std::string manifest, output;
  std::size_t target = 0;
};

int do_augment(const AugmentArgs& a, const Common& c, std::ostream& out) {
  augment::BalanceOptions defaults;
  json cfg{{"manifest", a.manifest},
           {"output", a.output},
           {"target", a.target},
           {"seed", c.seed},
           {"rotation_range", defaults.rotation_range},
           {"min_scale", defaults.min_scale},
           {"max_scale", defaults.max_scale},
           {"complexion_weight", defaults.complexion_weight},
           {"feather_px", defaults.composite.feather_px},
           {"image_dir", defaults.composite.image_dir}};
  cfg = overridden(cfg, c);
  augment::BalanceOptions opt;
  opt.rotation_range = cfg["rotation_range"];
  opt.min_scale = cfg["min_scale"];
  opt.max_scale = cfg["max_scale"];
  opt.complexion_weight = cfg["complexion_weight"];
  opt.composite.feather_px = cfg["feather_px"];
  opt.composite.image_dir = cfg["image_dir"];

  const fs::path in = cfg["manifest"].get<std::string>(), outp = cfg["output"].get<std::string>();
  if (fs::exists(outp) && fs::equivalent(in, outp))
    throw UsageError("--output must differ from --manifest; augment never rewrites its input");
  const auto in_root = root_of(in), out_root = root_of(outp);
  auto ds = load_manifest(in);

  std::vector<augment::BaseImage> bases;
  std::vector<augment::LesionPattern> patterns;
  for (const auto& r : ds.records) {
    if (!training_eligible(r)) continue;
    if (*r.label == DiseaseClass::NonDiseased && !r.mask_path.empty()) {
      bases.push_back({r, load_image(in_root / r.path), load_mask(in_root / r.mask_path)});
    } else if (is_disease(*r.label) && !r.is_augmented() && !r.lesion_mask_path.empty()) {
      patterns.push_back(augment::extract_pattern(load_image(in_root / r.path), load_mask(in_root / r.lesion_mask_path),
                                                  *r.label, r.id));
    }
  }
  auto result = augment::balance_classes(ds, bases, patterns, cfg["target"].get<std::size_t>(), seed_of(cfg), opt);

  for (auto& r : result.dataset.records) {
    if (r.is_augmented() && !ds.find(r.id)) continue;
    r.path = rel(in_root / r.path, out_root);
    if (!r.mask_path.empty()) r.mask_path = rel(in_root / r.mask_path, out_root);
    if (!r.lesion_mask_path.empty()) r.lesion_mask_path = rel(in_root / r.lesion_mask_path, out_root);
  }
  std::map<std::string, const augment::Composite*> by_id;
  for (const auto& comp : result.generated) {
    save_png(out_root / comp.record.path, comp.image);
    by_id[comp.record.id] = &comp;
  }
  for (auto& r : result.dataset.records)
    if (const auto it = by_id.find(r.id); it != by_id.end()) r.extra["recipe"] = augment::to_json(it->second->recipe);
  save_manifest(result.dataset, outp);
  write_header(c, "augment", seed_of(cfg), cfg);
  out << json{{"records", result.dataset.size()}, {"generated", result.generated.size()}}.dump() << "\n";
  return kOk;
}

// split ----------------------------------------------------------------

struct SplitArgs {
  std::string manifest;
  double fraction = 0.91;
  bool exclude_augmented = false;
};

int do_split(const SplitArgs& a, const Common& c, std::ostream& out) {
  json cfg{{"manifest", a.manifest},
           {"fraction", a.fraction},
           {"seed", c.seed},
           {"include_augmented_in_validation", !a.exclude_augmented}};
  cfg = overridden(cfg, c);
  const fs::path path = cfg["manifest"].get<std::string>();
  auto ds = load_manifest(path);
  Dataset eligible;
  for (const auto& r : ds.records)
    if (training_eligible(r)) eligible.records.push_back(r);
  const double fraction = cfg["fraction"];
  if (!(fraction > 0.0 && fraction < 1.0)) throw UsageError("--fraction must lie strictly between 0 and 1");
  const auto res =
      stratified_split(eligible, fraction, seed_of(cfg), cfg["include_augmented_in_validation"].get<bool>());
  std::map<std::string, SplitAssignment> assigned;
  for (const auto& r : res.train.records) assigned[r.id] = SplitAssignment::Train;
  for (const auto& r : res.validation.records) assigned[r.id] = SplitAssignment::Validation;
  std::size_t unassigned = 0;
  for (auto& r : ds.records) {
    const auto it = assigned.find(r.id);
    r.split = it == assigned.end() ? SplitAssignment::Unassigned : it->second;
    unassigned += it == assigned.end();
  }
  save_manifest(ds, path);
  write_header(c, "split", seed_of(cfg), cfg);
  out << json{{"train", res.train.size()}, {"validation", res.validation.size()}, {"unassigned", unassigned}}.dump()
      << "\n";
  return kOk;
}

// training -------------------------------------------------------------

struct TrainArgs {
  std::string manifest, model_dir = "models", split = "train";
};

bool in_split(const ImageRecord& r, const std::string& split) {
  return split == "all" || r.split == parse_split(split);
}

int do_train_seg(const TrainArgs& a, const Common& c, std::ostream& out) {
  json cfg = seg::to_json(seg::SegModelConfig{});
  if (c.seed_given()) cfg["seed"] = c.seed;
  cfg = overridden(cfg, c);
  const auto config = checked_config([&] {
    auto k = seg::seg_config_from_json(cfg);
    k.validate();
    return k;
  });
  const fs::path manifest = a.manifest;
  const auto root = root_of(manifest);
  const auto ds = load_manifest(manifest);
  std::vector<seg::TrainPair> pairs;
  for (const auto& r : ds.records) {
    if (r.mask_path.empty() || !in_split(r, a.split)) continue;
    if (r.verification == Verification::Rejected || (r.is_augmented() && r.verification != Verification::ExpertVerified))
      continue;
    pairs.push_back({load_image(root / r.path), load_mask(root / r.mask_path)});
  }
  const auto model = seg::SegModel::train(pairs, config);
  fs::create_directories(a.model_dir);
  model.save(fs::path(a.model_dir) / "segmenter.pt");
  json header = cfg;
  header["manifest"] = a.manifest;
  header["split"] = a.split;
  write_header(c, "train-seg", config.seed, header);
  out << json{{"pairs", pairs.size()}, {"final_loss", model.loss_log().back()}, {"training_hash", model.training_hash()}}
             .dump()
      << "\n";
  return kOk;
}

int do_train_cls(const TrainArgs& a, const Common& c, std::ostream& out) {
  json cfg = cls::to_json(cls::ClsModelConfig{});
  if (c.seed_given()) cfg["seed"] = c.seed;
  cfg["transform"] = augment::to_json(augment::TransformConfig::training_default());
  cfg = overridden(cfg, c);
  const auto config = checked_config([&] {
    auto k = cls::cls_config_from_json(cfg);
    k.validate();
    return k;
  });
  const auto transforms = checked_config([&] { return augment::transform_config_from_json(cfg["transform"]); });
  const fs::path manifest = a.manifest;
  const auto ds = load_manifest(manifest);
  Dataset train;
  for (const auto& r : ds.records)
    if (in_split(r, a.split)) train.records.push_back(r);
  const auto model = cls::train_classifier(train, root_of(manifest), config, transforms);
  fs::create_directories(a.model_dir);
  model.save(fs::path(a.model_dir) / "classifier.pt");
  json header = cfg;
  header["manifest"] = a.manifest;
  header["split"] = a.split;
  write_header(c, "train-cls", config.seed, header);
  const auto& last = model.epoch_log().back();
  out << json{{"records", train.size()},
              {"final_loss", last.loss},
              {"final_accuracy", last.accuracy},
              {"dataset_hash", model.dataset_hash()}}
             .dump()
      << "\n";
  return kOk;
}

// evaluation -----------------------------------------------------------

void write_reports(const eval::EvaluationReport& report, const std::string& format, const fs::path& dir) {
  const std::map<std::string, std::pair<eval::ReportFormat, const char*>> formats = {
      {"markdown", {eval::ReportFormat::Markdown, "report.md"}},
      {"json", {eval::ReportFormat::Json, "report.json"}},
      {"csv", {eval::ReportFormat::Csv, "report.csv"}},
  };
  fs::create_directories(dir);
  for (const auto& [name, f] : formats)
    if (format == "all" || format == name) write_file_atomic(dir / f.second, eval::render_report(report, f.first));
}

struct EvalArgs {
  std::string manifest, model_dir = "models", mode = "refined", format = "all";
  double threshold = 0.5;
};

int do_eval(const EvalArgs& a, const Common& c, std::ostream& out) {
  json cfg{{"manifest", a.manifest}, {"model_dir", a.model_dir}, {"mode", a.mode},
           {"threshold", a.threshold}, {"format", a.format},     {"seed", c.seed}};
  cfg = overridden(cfg, c);
  const auto mode = checked_config([&] { return eval::parse_score_mode(cfg["mode"].get<std::string>()); });
  const fs::path manifest = cfg["manifest"].get<std::string>();
  const fs::path models = cfg["model_dir"].get<std::string>();
  const auto seg = seg::SegModel::load(models / "segmenter.pt");
  const auto cls = cls::ClsModel::load(models / "classifier.pt");
  const auto ds = load_manifest(manifest);
  Dataset validation;
  for (const auto& r : ds.records)
    if (r.split == SplitAssignment::Validation) validation.records.push_back(r);
  if (validation.empty()) throw Error(ErrorKind::EmptyInput, "manifest has no validation records; run split first");
  const auto ev = pipeline::evaluate(seg, cls, validation, root_of(manifest), mode, cfg["threshold"].get<double>());
  const fs::path dir = c.out_dir;
  fs::create_directories(dir);
  write_file_atomic(dir / "predictions.csv", eval::format_prediction_log(ev.log));
  write_reports(ev.report, cfg["format"].get<std::string>(), dir);
  write_header(c, "eval", seed_of(cfg), cfg);
  out << json{{"images", ev.report.n_images},
              {"overall_accuracy", ev.report.overall ? json(*ev.report.overall) : json()}}
             .dump()
      << "\n";
  return kOk;
}

struct ReportArgs {
  std::string predictions, mode = "refined", format = "all";
  double ci_level = 0.95;
};

int do_report(const ReportArgs& a, const Common& c, std::ostream& out) {
  json cfg{{"predictions", a.predictions}, {"mode", a.mode}, {"format", a.format},
           {"ci_level", a.ci_level},       {"seed", c.seed}};
  cfg = overridden(cfg, c);
  const auto mode = checked_config([&] { return eval::parse_score_mode(cfg["mode"].get<std::string>()); });
  std::istringstream in(read_file(cfg["predictions"].get<std::string>()));
  const auto log = eval::parse_prediction_log(in);
  const auto report = eval::score_predictions(log, mode, cfg["ci_level"].get<double>());
  write_reports(report, cfg["format"].get<std::string>(), c.out_dir);
  write_header(c, "report", seed_of(cfg), cfg);
  out << eval::render_report(report, eval::ReportFormat::Markdown);
  return kOk;
}

struct InferArgs {
  std::string model_dir = "models", image;
  double threshold = 0.5;
};

int do_infer(const InferArgs& a, const Common& c, std::ostream& out) {
  json cfg{{"model_dir", a.model_dir}, {"image", a.image}, {"threshold", a.threshold}, {"seed", c.seed}};
  cfg = overridden(cfg, c);
  const fs::path models = cfg["model_dir"].get<std::string>();
  const fs::path image_path = cfg["image"].get<std::string>();
  const auto seg = seg::SegModel::load(models / "segmenter.pt");
  const auto cls = cls::ClsModel::load(models / "classifier.pt");
  const auto image = load_image(image_path);
  const auto r = pipeline::refine_and_classify(seg, cls, image, cfg["threshold"].get<double>());
  fs::create_directories(c.out_dir);
  const auto overlay = fs::path(c.out_dir) / (image_path.stem().string() + ".saliency.png");
  save_png(overlay, pipeline::saliency_overlay(image, r.saliency));
  write_header(c, "infer", seed_of(cfg), cfg);
  json j;
  j["image"] = image_path.string();
  j["final_class"] = token(r.final_class);
  j["confidence"] = r.refined.at(r.final_class);
  j["initial"] = to_json(r.initial);
  j["refined"] = to_json(r.refined);
  j["bbox"] = {r.bbox.x0, r.bbox.y0, r.bbox.x1, r.bbox.y1};
  j["saliency_overlay"] = overlay.string();
  out << j.dump() << "\n";
  return kOk;
}

// serve ----------------------------------------------------------------

struct ServeArgs {
  std::string host = "127.0.0.1", manifest, model_dir, store, content;
  int port = 8080;
  int workers = 1;
  std::size_t max_upload = 0;
};

void import_review_records(service::Store& store, const fs::path& manifest) {
  const auto ds = load_manifest(manifest);
  const auto root = root_of(manifest);
  for (const auto& r : ds.records) {
    std::string base;
    if (r.is_augmented())
      if (const auto* b = ds.find(r.provenance.base_id)) base = read_file(root / b->path);
    store.import_record(r, read_file(root / r.path), base);
  }
}

int do_serve(const ServeArgs& a, const Common& c, std::ostream& out) {
  auto sc = service::ServiceConfig::from_env();
  if (!a.model_dir.empty()) sc.model_dir = a.model_dir;
  if (!a.store.empty()) sc.store_path = a.store;
  if (!a.content.empty()) sc.content_path = a.content;
  if (a.max_upload) sc.max_upload_bytes = a.max_upload;
  sc.workers = a.workers;
  json cfg{{"host", a.host},
           {"port", a.port},
           {"model_dir", sc.model_dir.string()},
           {"store_path", sc.store_path.string()},
           {"content_path", sc.content_path.string()},
           {"max_upload_bytes", sc.max_upload_bytes},
           {"workers", sc.workers},
           {"manifest", a.manifest},
           {"seed", c.seed}};
  cfg = overridden(cfg, c);
  if (sc.workers < 1) throw UsageError("--workers must be at least 1");

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  auto svc = service::Service::open(sc);
  if (!a.manifest.empty()) import_review_records(svc->store(), a.manifest);
  svc->start();
  service::HttpServer http(*svc);
  const int port = http.bind(a.host, a.port);
  write_header(c, "serve", seed_of(cfg), cfg);
  out << json{{"listening", fmt::format("http://{}:{}", a.host, port)}, {"store", sc.store_path.string()}}.dump()
      << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&stop_signals, &sig);
    http.stop();
  });
  http.listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  svc->stop();
  return kOk;
}

void print_error(std::ostream& err, std::string_view kind, std::string_view detail, std::string_view context,
                 int code) {
  err << json{{"error", kind}, {"detail", detail}, {"context", context}, {"exit_code", code}}.dump() << "\n";
}

}  // namespace

int exit_code(ErrorKind kind) {
  switch (category(kind)) {
    case ErrorCategory::Usage: return kUsage;
    case ErrorCategory::Model: return kModel;
    case ErrorCategory::Data:
    case ErrorCategory::Service: return kData;
  }
  return kData;
}

json apply_overrides(json base, const std::vector<std::string>& sets) {
  for (const auto& s : sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw UsageError(fmt::format("override '{}' is not key=value", s));
    const std::string key = s.substr(0, eq), raw = s.substr(eq + 1);
    json* slot = &base;
    std::size_t start = 0;
    for (;;) {
      const auto dot = key.find('.', start);
      const auto part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!slot->is_object() || !slot->contains(part)) throw UsageError(fmt::format("unknown config key '{}'", key));
      slot = &(*slot)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    auto value = json::parse(raw, nullptr, false);
    if (value.is_discarded()) value = raw;
    const bool ok = (slot->is_boolean() && value.is_boolean()) || (slot->is_string() && value.is_string()) ||
                    (slot->is_number_float() && value.is_number()) ||
                    (slot->is_number_unsigned() && value.is_number_unsigned()) ||
                    (slot->is_number_integer() && !slot->is_number_unsigned() && value.is_number_integer());
    if (slot->is_string() && !value.is_string()) value = raw;  // e.g. image_dir=123
    else if (!ok)
      throw UsageError(fmt::format("override '{}' expects a {}", key, slot->type_name()));
    if (slot->is_number_float()) value = value.get<double>();
    *slot = value;
  }
  return base;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Penile lesion image triage: data preparation, training, evaluation and serving.", "lesion-triage"};
  app.set_version_flag("--version", std::string(LT_VERSION) + " (" + LT_GIT_DESCRIBE + ")");
  app.set_config("--config", "lesion-triage.toml", "TOML config merged under explicit flags");
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  Common common;
  std::function<int()> action;

  IngestArgs ingest;
  auto* s = app.add_subcommand("ingest", "Build a manifest from a directory of class-named folders");
  s->add_option("--input", ingest.input, "Directory with <class>/ subfolders")->required();
  s->add_option("--manifest", ingest.manifest, "Manifest to write")->required();
  s->add_option("--source", ingest.source, "clinician, web_scraped or app_sourced")->capture_default_str();
  s->add_flag("--verified", ingest.verified, "Mark records expert-verified");
  s->add_option("--origin-note", ingest.note, "Free-text provenance note");
  add_common(s, common);
  s->callback([&] { action = [&] { return do_ingest(ingest, common, out); }; });

  AugmentArgs aug;
  s = app.add_subcommand("augment", "Top up disease classes with composited lesions");
  s->add_option("--manifest", aug.manifest, "Input manifest")->required();
  s->add_option("--output", aug.output, "Output manifest (images go next to it)")->required();
  s->add_option("--target", aug.target, "Records per disease class")->required();
  add_common(s, common);
  s->callback([&] { action = [&] { return do_augment(aug, common, out); }; });

  SplitArgs split;
  s = app.add_subcommand("split", "Stratified train/validation split, rewriting the manifest");
  s->add_option("--manifest", split.manifest, "Manifest to update in place")->required();
  s->add_option("--fraction", split.fraction, "Training fraction")->capture_default_str();
  s->add_flag("--exclude-augmented-from-validation", split.exclude_augmented,
              "Keep augmented records out of the validation set");
  add_common(s, common);
  s->callback([&] { action = [&] { return do_split(split, common, out); }; });

  TrainArgs tseg, tcls;
  for (auto [name, args, desc] : {std::tuple{"train-seg", &tseg, "Train the subject segmenter"},
                                  std::tuple{"train-cls", &tcls, "Train the lesion classifier"}}) {
    s = app.add_subcommand(name, desc);
    s->add_option("--manifest", args->manifest, "Manifest")->required();
    s->add_option("--model-dir", args->model_dir, "Model output directory")->capture_default_str();
    s->add_option("--split", args->split, "train, validation, unassigned or all")
        ->capture_default_str()
        ->check(CLI::IsMember({"train", "validation", "unassigned", "all"}));
    add_common(s, common);
  }
  app.get_subcommand("train-seg")->callback([&] { action = [&] { return do_train_seg(tseg, common, out); }; });
  app.get_subcommand("train-cls")->callback([&] { action = [&] { return do_train_cls(tcls, common, out); }; });

  EvalArgs ev;
  s = app.add_subcommand("eval", "Run the pipeline over the validation split and write reports");
  s->add_option("--manifest", ev.manifest, "Manifest")->required();
  s->add_option("--model-dir", ev.model_dir, "Directory with segmenter.pt and classifier.pt")->capture_default_str();
  s->add_option("--mode", ev.mode, "initial or refined")->capture_default_str();
  s->add_option("--format", ev.format, "all, markdown, json or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "markdown", "json", "csv"}));
  s->add_option("--threshold", ev.threshold, "Saliency threshold")->capture_default_str();
  add_common(s, common);
  s->callback([&] { action = [&] { return do_eval(ev, common, out); }; });

  ReportArgs rep;
  s = app.add_subcommand("report", "Score a prediction log");
  s->add_option("--predictions", rep.predictions, "predictions.csv")->required();
  s->add_option("--mode", rep.mode, "initial or refined")->capture_default_str();
  s->add_option("--format", rep.format, "all, markdown, json or csv")
      ->capture_default_str()
      ->check(CLI::IsMember({"all", "markdown", "json", "csv"}));
  s->add_option("--ci-level", rep.ci_level, "Confidence level")->capture_default_str();
  add_common(s, common);
  s->callback([&] { action = [&] { return do_report(rep, common, out); }; });

  InferArgs inf;
  s = app.add_subcommand("infer", "Classify one image");
  s->add_option("--image", inf.image, "Image file")->required();
  s->add_option("--model-dir", inf.model_dir, "Directory with segmenter.pt and classifier.pt")->capture_default_str();
  s->add_option("--threshold", inf.threshold, "Saliency threshold")->capture_default_str();
  add_common(s, common);
  s->callback([&] { action = [&] { return do_infer(inf, common, out); }; });

  ServeArgs srv;
  s = app.add_subcommand("serve", "HTTP service (see README for environment variables)");
  s->add_option("--host", srv.host, "Bind address")->capture_default_str();
  s->add_option("--port", srv.port, "Port (0 picks a free one)")->capture_default_str();
  s->add_option("--manifest", srv.manifest, "Records to load for expert review");
  s->add_option("--model-dir", srv.model_dir, "Overrides LT_MODEL_DIR");
  s->add_option("--store", srv.store, "Overrides LT_STORE_PATH");
  s->add_option("--content", srv.content, "Education YAML (default content/education.yaml)");
  s->add_option("--max-upload-bytes", srv.max_upload, "Overrides LT_MAX_UPLOAD_BYTES");
  s->add_option("--workers", srv.workers, "Classification workers")->capture_default_str();
  add_common(s, common);
  s->callback([&] { action = [&] { return do_serve(srv, common, out); }; });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    if (rc == 0) return kOk;
    print_error(err, "Usage", e.what(), "", kUsage);
    return kUsage;
  }

  try {
    return action();
  } catch (const UsageError& e) {
    print_error(err, "Usage", e.what(), "", kUsage);
    return kUsage;
  } catch (const Error& e) {
    const int code = exit_code(e.kind());
    print_error(err, to_string(e.kind()), e.detail(), e.context(), code);
    return code;
  } catch (const std::exception& e) {
    print_error(err, "Internal", e.what(), "", kData);
    return kData;
  }
}

}  // namespace lt::cli
