#include "lesion_triage/service/questionnaire.hpp"

#include <algorithm>
#include <cctype>

#include "lesion_triage/error.hpp"

namespace lt::service {

namespace {

[[noreturn]] void bad(std::string_view field) { throw Error(ErrorKind::InvalidQuestionnaire, std::string(field)); }

template <class E, std::size_t N>
E parse_enum(const nlohmann::json& j, std::string_view field, const std::array<E, N>& all) {
  if (!j.is_string()) bad(field);
  const auto s = j.get<std::string>();
  for (E e : all)
    if (token(e) == s) return e;
  bad(field);
}

}  // namespace

std::string_view token(AgeBand a) {
  switch (a) {
    case AgeBand::From18To30: return "18-30";
    case AgeBand::From31To50: return "31-50";
    case AgeBand::Over50: return "over50";
  }
  return "?";
}

std::string_view token(Symptom s) {
  switch (s) {
    case Symptom::PenilePain: return "penile_pain";
    case Symptom::PenileDischarge: return "penile_discharge";
    case Symptom::PainBurningUrination: return "pain_burning_urination";
    case Symptom::NoneOther: return "none_other";
  }
  return "?";
}

std::string_view token(LastContact c) {
  switch (c) {
    case LastContact::Under1Mo: return "under1mo";
    case LastContact::From1To3Mo: return "1to3mo";
    case LastContact::Over3Mo: return "over3mo";
    case LastContact::Never: return "never";
  }
  return "?";
}

Questionnaire parse_questionnaire(const nlohmann::json& j) {
  if (!j.is_object()) bad("questionnaire");
  Questionnaire q;
  q.age_band = parse_enum(j.value("age_band", nlohmann::json()), "age_band", kAllAgeBands);

  const auto country = j.value("country", nlohmann::json());
  if (!country.is_string()) bad("country");
  q.country = country.get<std::string>();
  if (q.country.size() != 2 || !std::all_of(q.country.begin(), q.country.end(), [](unsigned char c) {
        return std::isalpha(c);
      }))
    bad("country");
  for (auto& c : q.country) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));

  const auto symptoms = j.value("symptoms", nlohmann::json());
  if (!symptoms.is_array() || symptoms.empty()) bad("symptoms");
  for (const auto& s : symptoms) {
    if (!q.symptoms.insert(parse_enum(s, "symptoms", kAllSymptoms)).second) bad("symptoms");
  }
  if (q.symptoms.count(Symptom::NoneOther) && q.symptoms.size() > 1) bad("symptoms");

  q.last_contact = parse_enum(j.value("last_contact", nlohmann::json()), "last_contact", kAllLastContacts);
  return q;
}

Questionnaire parse_questionnaire(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) bad("questionnaire");
  return parse_questionnaire(j);
}

nlohmann::ordered_json to_json(const Questionnaire& q) {
  nlohmann::ordered_json j;
  j["age_band"] = token(q.age_band);
  j["country"] = q.country;
  auto& s = j["symptoms"] = nlohmann::ordered_json::array();
  for (auto v : q.symptoms) s.push_back(token(v));
  j["last_contact"] = token(q.last_contact);
  return j;
}

}  // namespace lt::service
