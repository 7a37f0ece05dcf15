#pragma once

#include <array>
#include <set>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace lt::service {

enum class AgeBand { From18To30, From31To50, Over50 };
enum class Symptom { PenilePain, PenileDischarge, PainBurningUrination, NoneOther };
enum class LastContact { Under1Mo, From1To3Mo, Over3Mo, Never };

inline constexpr std::array kAllAgeBands = {AgeBand::From18To30, AgeBand::From31To50, AgeBand::Over50};
inline constexpr std::array kAllSymptoms = {Symptom::PenilePain, Symptom::PenileDischarge,
                                            Symptom::PainBurningUrination, Symptom::NoneOther};
inline constexpr std::array kAllLastContacts = {LastContact::Under1Mo, LastContact::From1To3Mo,
                                                LastContact::Over3Mo, LastContact::Never};

// Wire tokens: 18-30|31-50|over50, penile_pain|..., under1mo|1to3mo|...
std::string_view token(AgeBand a);
std::string_view token(Symptom s);
std::string_view token(LastContact c);

struct Questionnaire {
  AgeBand age_band = AgeBand::From18To30;
  std::string country;  // ISO 3166-1 alpha-2, upper case
  std::set<Symptom> symptoms;
  LastContact last_contact = LastContact::Never;

  bool operator==(const Questionnaire&) const = default;
};

/// Throws Error(InvalidQuestionnaire) with the offending field name as the
/// detail. Country codes are upper-cased; none_other cannot be combined
/// with another symptom.
Questionnaire parse_questionnaire(const nlohmann::json& j);
Questionnaire parse_questionnaire(std::string_view text);
nlohmann::ordered_json to_json(const Questionnaire& q);

}  // namespace lt::service
