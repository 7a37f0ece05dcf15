#include "lesion_triage/service/education.hpp"

#include <yaml-cpp/yaml.h>

#include "lesion_triage/error.hpp"

namespace lt::service {

namespace {

std::string text(const YAML::Node& node, const char* key, DiseaseClass c) {
  const auto v = node[key];
  if (!v || !v.IsScalar() || v.as<std::string>().empty())
    throw Error(ErrorKind::MissingContent, std::string(token(c)) + "." + key);
  return v.as<std::string>();
}

}  // namespace

nlohmann::ordered_json to_json(const EducationEntry& e) {
  return {{"class", token(e.cls)},
          {"title", e.title},
          {"symptoms_text", e.symptoms_text},
          {"confirmatory_testing_text", e.confirmatory_testing_text},
          {"treatment_text", e.treatment_text},
          {"resource_links", e.resource_links}};
}

std::array<EducationEntry, kNumClasses> load_education(const std::filesystem::path& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path.string());
  } catch (const YAML::BadFile&) {
    throw Error(ErrorKind::Io, "cannot read " + path.string());
  } catch (const YAML::Exception& e) {
    throw Error(ErrorKind::MissingContent, path.string() + ": " + e.what());
  }
  if (!root.IsMap()) throw Error(ErrorKind::MissingContent, path.string() + ": expected a map of classes");

  std::array<EducationEntry, kNumClasses> out;
  for (auto c : kAllClasses) {
    const auto node = root[std::string(token(c))];
    if (!node || !node.IsMap()) throw Error(ErrorKind::MissingContent, std::string(token(c)));
    auto& e = out[index_of(c)];
    e.cls = c;
    e.title = node["title"] ? node["title"].as<std::string>() : std::string(display_name(c));
    e.symptoms_text = text(node, "symptoms", c);
    e.confirmatory_testing_text = text(node, "confirmatory_testing", c);
    e.treatment_text = text(node, "treatment", c);
    if (const auto links = node["resources"]) {
      if (!links.IsSequence()) throw Error(ErrorKind::MissingContent, std::string(token(c)) + ".resources");
      for (const auto& l : links) e.resource_links.push_back(l.as<std::string>());
    }
  }
  return out;
}

EducationLibrary::EducationLibrary(std::filesystem::path path) : path_(std::move(path)) { reload(); }

void EducationLibrary::reload() {
  auto fresh = load_education(path_);
  std::lock_guard lock(mu_);
  entries_ = std::move(fresh);
}

EducationEntry EducationLibrary::get(DiseaseClass c) const {
  std::lock_guard lock(mu_);
  return entries_[index_of(c)];
}

}  // namespace lt::service
