#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "lesion_triage/service/questionnaire.hpp"

namespace lt::service {

struct Tally {
  std::string key;
  std::size_t count = 0;
  std::string percent;  // of the column total, one decimal, "-" for an empty column
};

/// One column of the summary: all submissions, one of the top countries,
/// or everything else.
struct AnalyticsColumn {
  std::string country;  // "all", an ISO code, or "other"
  std::size_t total = 0;
  std::vector<Tally> age_band;
  std::vector<Tally> symptoms;  // multi-select, may sum past 100%
  std::vector<Tally> last_contact;
};

struct AnalyticsSummary {
  std::string from, to;
  std::size_t total = 0;
  std::vector<Tally> country;  // top five by count (ties by code), then "other"
  std::vector<AnalyticsColumn> columns;  // "all", the same five, "other"
};

/// 100 * count / total rounded half-up to one decimal; "-" when total is 0.
std::string format_percent(std::size_t count, std::size_t total);

AnalyticsSummary summarize(const std::vector<Questionnaire>& submissions, std::string from = {},
                           std::string to = {});
nlohmann::ordered_json to_json(const AnalyticsSummary& s);

}  // namespace lt::service
