#include "lesion_triage/service/analytics.hpp"

#include <algorithm>
#include <map>

#include <fmt/format.h>

namespace lt::service {

namespace {

constexpr std::size_t kTopCountries = 5;

template <class E, std::size_t N>
std::vector<Tally> tallies(const std::array<E, N>& all, const std::map<E, std::size_t>& counts, std::size_t total) {
  std::vector<Tally> out;
  for (E e : all) {
    const auto it = counts.find(e);
    const std::size_t n = it == counts.end() ? 0 : it->second;
    out.push_back({std::string(token(e)), n, format_percent(n, total)});
  }
  return out;
}

AnalyticsColumn column(std::string name, const std::vector<const Questionnaire*>& rows) {
  std::map<AgeBand, std::size_t> age;
  std::map<Symptom, std::size_t> sym;
  std::map<LastContact, std::size_t> contact;
  for (const auto* q : rows) {
    ++age[q->age_band];
    for (auto s : q->symptoms) ++sym[s];
    ++contact[q->last_contact];
  }
  AnalyticsColumn c;
  c.country = std::move(name);
  c.total = rows.size();
  c.age_band = tallies(kAllAgeBands, age, c.total);
  c.symptoms = tallies(kAllSymptoms, sym, c.total);
  c.last_contact = tallies(kAllLastContacts, contact, c.total);
  return c;
}

nlohmann::ordered_json to_json(const std::vector<Tally>& ts) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& t : ts) a.push_back({{"key", t.key}, {"count", t.count}, {"percent", t.percent}});
  return a;
}

}  // namespace

std::string format_percent(std::size_t count, std::size_t total) {
  if (total == 0) return "-";
  // tenths of a percent, exact integer half-up
  const std::size_t tenths = (count * 2000 + total) / (2 * total);
  return fmt::format("{}.{}", tenths / 10, tenths % 10);
}

AnalyticsSummary summarize(const std::vector<Questionnaire>& submissions, std::string from, std::string to) {
  AnalyticsSummary s;
  s.from = std::move(from);
  s.to = std::move(to);
  s.total = submissions.size();

  std::map<std::string, std::vector<const Questionnaire*>> by_country;
  std::vector<const Questionnaire*> all;
  for (const auto& q : submissions) {
    by_country[q.country].push_back(&q);
    all.push_back(&q);
  }
  std::vector<std::pair<std::string, std::size_t>> ranked;
  for (const auto& [code, rows] : by_country) ranked.emplace_back(code, rows.size());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > kTopCountries) ranked.resize(kTopCountries);

  s.columns.push_back(column("all", all));
  std::vector<const Questionnaire*> other;
  for (const auto& [code, rows] : by_country) {
    if (std::none_of(ranked.begin(), ranked.end(), [&](const auto& r) { return r.first == code; }))
      other.insert(other.end(), rows.begin(), rows.end());
  }
  for (const auto& [code, n] : ranked) {
    s.country.push_back({code, n, format_percent(n, s.total)});
    s.columns.push_back(column(code, by_country[code]));
  }
  s.country.push_back({"other", other.size(), format_percent(other.size(), s.total)});
  s.columns.push_back(column("other", other));
  return s;
}

nlohmann::ordered_json to_json(const AnalyticsSummary& s) {
  nlohmann::ordered_json j;
  j["from"] = s.from;
  j["to"] = s.to;
  j["total"] = s.total;
  j["country"] = to_json(s.country);
  auto& cols = j["columns"] = nlohmann::ordered_json::array();
  for (const auto& c : s.columns) {
    cols.push_back({{"country", c.country},
                    {"total", c.total},
                    {"age_band", to_json(c.age_band)},
                    {"symptoms", to_json(c.symptoms)},
                    {"last_contact", to_json(c.last_contact)}});
  }
  return j;
}

}  // namespace lt::service
