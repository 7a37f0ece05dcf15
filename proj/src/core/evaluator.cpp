#include "lesion_triage/evaluator.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/distributions/beta.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/published.hpp"

namespace lt::eval {

ConfusionCounts confusion_counts(std::span<const DiseaseClass> predictions,
                                 std::span<const DiseaseClass> labels, DiseaseClass cls) {
  if (predictions.size() != labels.size())
    throw Error(ErrorKind::LengthMismatch,
                fmt::format("{} predictions vs {} labels", predictions.size(), labels.size()));
  if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no predictions to score");
  ConfusionCounts c;
  c.cls = cls;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const bool pred = predictions[i] == cls;
    const bool actual = labels[i] == cls;
    if (pred && actual)
      ++c.tp;
    else if (pred)
      ++c.fp;
    else if (actual)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

Interval exact_binomial_ci(std::size_t successes, std::size_t trials, double level) {
  if (trials < 1 || successes > trials || !(level > 0.0 && level < 1.0))
    throw Error(ErrorKind::InvalidArgument,
                fmt::format("exact_binomial_ci({}, {}, {})", successes, trials, level));
  using boost::math::beta_distribution;
  const double tail = (1.0 - level) / 2.0;
  const auto s = static_cast<double>(successes);
  const auto n = static_cast<double>(trials);
  Interval ci;
  ci.low = successes == 0 ? 0.0 : boost::math::quantile(beta_distribution<double>(s, n - s + 1.0), tail);
  ci.high = successes == trials
                ? 1.0
                : boost::math::quantile(beta_distribution<double>(s + 1.0, n - s), 1.0 - tail);
  return ci;
}

MetricRow compute_metrics(const ConfusionCounts& counts, double ci_level) {
  MetricRow row;
  row.cls = counts.cls;
  row.counts = counts;
  row.n_images = counts.tp + counts.fn;
  row.ci_level = ci_level;

  auto ratio = [&](std::size_t num, std::size_t den, const char* name, std::optional<double>& point,
                   std::optional<Interval>& ci) {
    if (den == 0) {
      row.undefined.emplace_back(name);
      return;
    }
    point = static_cast<double>(num) / static_cast<double>(den);
    ci = exact_binomial_ci(num, den, ci_level);
  };
  ratio(counts.tp, counts.tp + counts.fn, "recall", row.recall, row.recall_ci);
  ratio(counts.tp, counts.tp + counts.fp, "precision", row.precision, row.precision_ci);
  ratio(counts.tn, counts.tn + counts.fp, "specificity", row.specificity, row.specificity_ci);

  if (row.recall && row.precision && (*row.recall + *row.precision) > 0.0)
    row.f1 = 2.0 * *row.precision * *row.recall / (*row.precision + *row.recall);
  else if (row.recall && row.precision)
    row.f1 = 0.0;
  else
    row.undefined.emplace_back("f1");
  return row;
}

double overall_accuracy(std::span<const MetricRow> rows) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& r : rows) {
    if (!r.f1) continue;
    sum += *r.f1;
    ++n;
  }
  if (n == 0) throw Error(ErrorKind::EmptyRows, "no rows with a defined F1");
  return sum / static_cast<double>(n);
}

std::string_view token(ScoreMode mode) { return mode == ScoreMode::Initial ? "initial" : "refined"; }

ScoreMode parse_score_mode(std::string_view tok) {
  if (tok == "initial") return ScoreMode::Initial;
  if (tok == "refined") return ScoreMode::Refined;
  throw Error(ErrorKind::InvalidArgument, "mode must be initial or refined, got '" + std::string(tok) + "'");
}

std::string format_prediction_log(std::span<const PredictionEntry> entries) {
  std::string out = "image_id,label,initial_pred,refined_pred,confidence\n";
  for (const auto& e : entries)
    out += fmt::format("{},{},{},{},{:.6f}\n", e.image_id, token(e.label), token(e.initial_pred),
                       token(e.refined_pred), e.confidence);
  return out;
}

std::vector<PredictionEntry> parse_prediction_log(std::istream& in) {
  std::vector<PredictionEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("image_id,", 0) == 0) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5)
      throw Error(ErrorKind::MalformedLine, fmt::format("prediction log line {}: expected 5 cells", line_no));
    PredictionEntry e;
    e.image_id = cells[0];
    e.label = parse_class(cells[1]);
    e.initial_pred = parse_class(cells[2]);
    e.refined_pred = parse_class(cells[3]);
    try {
      e.confidence = std::stod(cells[4]);
    } catch (const std::exception&) {
      throw Error(ErrorKind::MalformedLine, fmt::format("prediction log line {}: bad confidence", line_no));
    }
    out.push_back(std::move(e));
  }
  return out;
}

EvaluationReport score_predictions(std::span<const PredictionEntry> log, ScoreMode mode, double ci_level) {
  std::vector<DiseaseClass> preds, labels;
  preds.reserve(log.size());
  labels.reserve(log.size());
  for (const auto& e : log) {
    preds.push_back(mode == ScoreMode::Initial ? e.initial_pred : e.refined_pred);
    labels.push_back(e.label);
  }
  EvaluationReport report;
  report.mode = mode;
  report.n_images = log.size();
  for (auto c : kAllClasses) report.rows.push_back(compute_metrics(confusion_counts(preds, labels, c), ci_level));
  try {
    report.overall = overall_accuracy(report.rows);
  } catch (const Error&) {
    report.notes.push_back("overall accuracy undefined: no class has a defined F1");
  }
  for (const auto& r : report.rows)
    for (const auto& name : r.undefined)
      report.notes.push_back(fmt::format("{}: {} undefined (zero denominator)", display_name(r.cls), name));
  for (auto& note : published_f1_discrepancy(report.rows)) report.notes.push_back(std::move(note));
  return report;
}

ReportFormat parse_report_format(std::string_view tok) {
  if (tok == "markdown" || tok == "md") return ReportFormat::Markdown;
  if (tok == "json") return ReportFormat::Json;
  if (tok == "csv") return ReportFormat::Csv;
  throw Error(ErrorKind::UnknownFormat, "'" + std::string(tok) + "' (expected markdown, json or csv)");
}

double round_half_up(double value, int decimals) {
  const double scale = std::pow(10.0, decimals);
  // The nudge keeps products like 0.8685 * 1000 = 868.4999999 on the upper side.
  return std::floor(value * scale + 0.5 + 1e-9) / scale;
}

namespace {

std::string fixed3(const std::optional<double>& v) {
  return v ? fmt::format("{:.3f}", round_half_up(*v, 3)) : std::string();
}

std::string with_ci(const std::optional<double>& v, const std::optional<Interval>& ci) {
  if (!v) return "-";
  return fmt::format("{:.3f} ({:.3f} - {:.3f})", round_half_up(*v, 3), round_half_up(ci->low, 3),
                     round_half_up(ci->high, 3));
}

nlohmann::ordered_json json_ratio(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(round_half_up(*v, 3)) : nlohmann::ordered_json(nullptr);
}

nlohmann::ordered_json json_ci(const std::optional<Interval>& ci) {
  if (!ci) return nullptr;
  return nlohmann::ordered_json::array({round_half_up(ci->low, 3), round_half_up(ci->high, 3)});
}

std::string render_markdown(const EvaluationReport& rep) {
  const int level = static_cast<int>(std::lround((rep.rows.empty() ? 0.95 : rep.rows[0].ci_level) * 100));
  std::string out = fmt::format("## Validation results ({} classification, n={})\n\n", token(rep.mode), rep.n_images);
  out += fmt::format(
      "| | No. Images (n={}) | True Positive | False Positive | True Negative | False Negative | "
      "Recall or Sensitivity ({}% CI) | Precision ({}% CI) | Specificity ({}% CI) | F1-Score |\n",
      rep.n_images, level, level, level);
  out += "|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& r : rep.rows) {
    out += fmt::format("| {} | {} | {} | {} | {} | {} | {} | {} | {} | {} |\n", display_name(r.cls),
                       r.n_images, r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn,
                       with_ci(r.recall, r.recall_ci), with_ci(r.precision, r.precision_ci),
                       with_ci(r.specificity, r.specificity_ci), r.f1 ? fixed3(r.f1) : "-");
  }
  out += fmt::format("\nOverall accuracy (mean F1): {}\n", rep.overall ? fixed3(rep.overall) : "-");
  if (!rep.notes.empty()) {
    out += "\nNotes:\n";
    for (const auto& n : rep.notes) out += "- " + n + "\n";
  }
  return out;
}

std::string render_json(const EvaluationReport& rep) {
  nlohmann::ordered_json doc;
  doc["mode"] = std::string(token(rep.mode));
  doc["n_images"] = rep.n_images;
  doc["ci_level"] = rep.rows.empty() ? 0.95 : rep.rows[0].ci_level;
  auto rows = nlohmann::ordered_json::array();
  for (const auto& r : rep.rows) {
    nlohmann::ordered_json j;
    j["class"] = std::string(token(r.cls));
    j["name"] = std::string(display_name(r.cls));
    j["n_images"] = r.n_images;
    j["tp"] = r.counts.tp;
    j["fp"] = r.counts.fp;
    j["tn"] = r.counts.tn;
    j["fn"] = r.counts.fn;
    j["recall"] = json_ratio(r.recall);
    j["recall_ci"] = json_ci(r.recall_ci);
    j["precision"] = json_ratio(r.precision);
    j["precision_ci"] = json_ci(r.precision_ci);
    j["specificity"] = json_ratio(r.specificity);
    j["specificity_ci"] = json_ci(r.specificity_ci);
    j["f1"] = json_ratio(r.f1);
    rows.push_back(std::move(j));
  }
  doc["rows"] = std::move(rows);
  doc["overall_accuracy"] = json_ratio(rep.overall);
  doc["notes"] = rep.notes;
  return doc.dump(2) + "\n";
}

std::string render_csv(const EvaluationReport& rep) {
  std::string out =
      "class,n_images,tp,fp,tn,fn,recall,recall_low,recall_high,precision,precision_low,"
      "precision_high,specificity,specificity_low,specificity_high,f1\n";
  auto lo = [](const std::optional<Interval>& ci) {
    return ci ? fmt::format("{:.3f}", round_half_up(ci->low, 3)) : std::string();
  };
  auto hi = [](const std::optional<Interval>& ci) {
    return ci ? fmt::format("{:.3f}", round_half_up(ci->high, 3)) : std::string();
  };
  for (const auto& r : rep.rows) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", token(r.cls), r.n_images,
                       r.counts.tp, r.counts.fp, r.counts.tn, r.counts.fn, fixed3(r.recall),
                       lo(r.recall_ci), hi(r.recall_ci), fixed3(r.precision), lo(r.precision_ci),
                       hi(r.precision_ci), fixed3(r.specificity), lo(r.specificity_ci),
                       hi(r.specificity_ci), fixed3(r.f1));
  }
  out += fmt::format("overall,{},,,,,,,,,,,,,,{}\n", rep.n_images, fixed3(rep.overall));
  return out;
}

}  // namespace

std::string render_report(const EvaluationReport& report, ReportFormat format) {
  switch (format) {
    case ReportFormat::Markdown: return render_markdown(report);
    case ReportFormat::Json: return render_json(report);
    case ReportFormat::Csv: return render_csv(report);
  }
  throw Error(ErrorKind::UnknownFormat, "unhandled report format");
}

}  // namespace lt::eval
