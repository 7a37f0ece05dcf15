#pragma once

#include <array>
#include <string>
#include <vector>

#include <fmt/format.h>

#include "lesion_triage/service/questionnaire.hpp"

namespace lt::test {

// Per-country counts of the published user table, in its column order.
struct CountryCounts {
  const char* code;
  int total;
  std::array<int, 3> age;       // 18-30, 31-50, over50
  std::array<int, 4> symptoms;  // pain, discharge, urination, none/other
  std::array<int, 4> contact;   // under1mo, 1to3mo, over3mo, never
};

inline constexpr std::array<CountryCounts, 5> kTable2Counts = {{
    {"US", 271, {176, 87, 8}, {84, 70, 81, 149}, {169, 70, 27, 5}},
    {"SG", 64, {37, 23, 4}, {26, 12, 8, 38}, {30, 27, 4, 3}},
    {"CA", 41, {26, 14, 1}, {11, 10, 9, 24}, {20, 14, 6, 1}},
    {"GB", 40, {25, 13, 2}, {11, 11, 10, 21}, {21, 10, 8, 1}},
    {"VN", 21, {13, 7, 1}, {8, 7, 6, 10}, {8, 8, 4, 1}},
}};

// Percentages as printed; rows are total share, age, symptoms, contact.
struct PrintedColumn {
  const char* code;  // "all" for the overall column
  const char* total_share;
  std::array<const char*, 3> age;
  std::array<const char*, 4> symptoms;
  std::array<const char*, 4> contact;
};

inline constexpr std::array<PrintedColumn, 6> kTable2Printed = {{
    {"all", "-", {"63.4", "33.0", "3.7"}, {"32.0", "25.2", "26.1", "55.4"}, {"56.8", "29.5", "11.2", "2.5"}},
    {"US", "62.0", {"64.9", "32.1", "3.0"}, {"31.0", "25.8", "29.9", "55.0"}, {"62.4", "25.8", "10.0", "1.8"}},
    {"SG", "14.6", {"57.8", "35.9", "6.3"}, {"40.6", "18.8", "12.5", "59.4"}, {"46.9", "42.2", "6.3", "4.7"}},
    {"CA", "9.4", {"63.4", "34.1", "2.4"}, {"26.8", "24.4", "22.0", "58.5"}, {"48.8", "34.1", "14.6", "2.4"}},
    {"GB", "9.2", {"62.5", "32.5", "5.0"}, {"27.5", "27.5", "25.0", "52.5"}, {"52.5", "25.0", "20.0", "2.5"}},
    {"VN", "4.8", {"61.9", "33.3", "4.8"}, {"38.1", "33.3", "28.6", "47.6"}, {"38.1", "38.1", "19.0", "4.8"}},
}};

/// Questionnaires reproducing kTable2Counts. Within a country the users who
/// did not pick none_other receive the other symptoms round-robin, so every
/// one of them reports at least one and no symptom twice.
inline std::vector<service::Questionnaire> table2_questionnaires() {
  using namespace service;
  std::vector<Questionnaire> out;
  for (const auto& c : kTable2Counts) {
    std::vector<Questionnaire> rows(c.total);
    for (auto& q : rows) q.country = c.code;
    auto fill = [&](const auto& counts, auto assign) {
      int i = 0;
      for (std::size_t k = 0; k < counts.size(); ++k)
        for (int n = 0; n < counts[k]; ++n) assign(rows[i++], k);
    };
    fill(c.age, [](Questionnaire& q, std::size_t k) { q.age_band = kAllAgeBands[k]; });
    fill(c.contact, [](Questionnaire& q, std::size_t k) { q.last_contact = kAllLastContacts[k]; });
    const int none = c.symptoms[3];
    const int rest = c.total - none;
    for (int i = rest; i < c.total; ++i) rows[i].symptoms.insert(Symptom::NoneOther);
    int slot = 0;
    for (std::size_t k = 0; k < 3; ++k)
      for (int n = 0; n < c.symptoms[k]; ++n) rows[slot++ % rest].symptoms.insert(kAllSymptoms[k]);
    out.insert(out.end(), rows.begin(), rows.end());
  }
  return out;
}

/// Spread across July to October 2023.
inline std::string table2_timestamp(std::size_t i) {
  const int month = 7 + static_cast<int>(i % 4);
  return fmt::format("2023-{:02d}-{:02d}T{:02d}:{:02d}:00.000Z", month, 1 + i % 28, i % 24, i % 60);
}

}  // namespace lt::test
