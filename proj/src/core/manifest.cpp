#include "lesion_triage/manifest.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "lesion_triage/error.hpp"

namespace lt {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

const std::set<std::string> kKnownKeys = {
    "id",         "path",     "label",   "provenance", "verification",   "split",
    "width_px",   "height_px", "base_id", "recipe_id", "mask_path", "lesion_mask_path"};

[[noreturn]] void malformed(std::size_t line_no, const std::string& why) {
  throw Error(ErrorKind::MalformedLine, "line " + std::to_string(line_no) + ": " + why);
}

std::string require_string(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string()) malformed(line_no, std::string("missing string key '") + key + "'");
  return it->get<std::string>();
}

int require_dim(const json& obj, const char* key, std::size_t line_no) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer() || it->get<long long>() <= 0)
    malformed(line_no, std::string("'") + key + "' must be a positive integer");
  return static_cast<int>(it->get<long long>());
}

ImageRecord parse_record(const json& obj, std::size_t line_no) {
  if (!obj.is_object()) malformed(line_no, "not a JSON object");
  ImageRecord r;
  r.id = require_string(obj, "id", line_no);
  if (r.id.empty()) malformed(line_no, "empty id");
  r.path = require_string(obj, "path", line_no);

  const std::string label = require_string(obj, "label", line_no);
  if (label != "unlabeled") r.label = parse_class(label);

  auto prov = obj.find("provenance");
  if (prov == obj.end() || !prov->is_object()) malformed(line_no, "missing object 'provenance'");
  try {
    r.provenance.source = parse_source(require_string(*prov, "source", line_no));
    r.verification = parse_verification(require_string(obj, "verification", line_no));
    r.split = parse_split(require_string(obj, "split", line_no));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::MalformedLine) throw;
    malformed(line_no, e.detail());
  }
  for (const auto& [k, v] : prov->items()) {
    if (k == "source") continue;
    if (k == "origin_note" && v.is_string())
      r.provenance.origin_note = v.get<std::string>();
    else
      r.provenance_extra[k] = v;
  }

  r.width_px = require_dim(obj, "width_px", line_no);
  r.height_px = require_dim(obj, "height_px", line_no);

  if (r.is_augmented()) {
    r.provenance.base_id = require_string(obj, "base_id", line_no);
    r.provenance.recipe_id = require_string(obj, "recipe_id", line_no);
  } else if (obj.contains("base_id") || obj.contains("recipe_id")) {
    malformed(line_no, "base_id/recipe_id only allowed on augmented records");
  }
  if (auto it = obj.find("mask_path"); it != obj.end()) {
    if (!it->is_string()) malformed(line_no, "'mask_path' must be a string");
    r.mask_path = it->get<std::string>();
  }
  if (auto it = obj.find("lesion_mask_path"); it != obj.end()) {
    if (!it->is_string()) malformed(line_no, "'lesion_mask_path' must be a string");
    r.lesion_mask_path = it->get<std::string>();
  }
  for (const auto& [k, v] : obj.items())
    if (!kKnownKeys.contains(k)) r.extra[k] = v;
  return r;
}

}  // namespace

Dataset parse_manifest(std::istream& in) {
  Dataset ds;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(line);
    } catch (const json::parse_error& e) {
      malformed(line_no, e.what());
    }
    ImageRecord r = parse_record(obj, line_no);
    if (!seen.insert(r.id).second) throw Error(ErrorKind::DuplicateId, r.id);
    ds.records.push_back(std::move(r));
  }
  return ds;
}

Dataset load_manifest(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open manifest " + path.string());
  return parse_manifest(in);
}

std::string format_record(const ImageRecord& r) {
  json obj;
  obj["id"] = r.id;
  obj["path"] = r.path;
  obj["label"] = r.label ? std::string(token(*r.label)) : std::string("unlabeled");
  json prov;
  prov["source"] = std::string(token(r.provenance.source));
  if (!r.provenance.origin_note.empty()) prov["origin_note"] = r.provenance.origin_note;
  for (const auto& [k, v] : r.provenance_extra.items()) prov[k] = v;
  obj["provenance"] = std::move(prov);
  obj["verification"] = std::string(token(r.verification));
  obj["split"] = std::string(token(r.split));
  obj["width_px"] = r.width_px;
  obj["height_px"] = r.height_px;
  if (r.is_augmented()) {
    obj["base_id"] = r.provenance.base_id;
    obj["recipe_id"] = r.provenance.recipe_id;
  }
  if (!r.mask_path.empty()) obj["mask_path"] = r.mask_path;
  if (!r.lesion_mask_path.empty()) obj["lesion_mask_path"] = r.lesion_mask_path;
  for (const auto& [k, v] : r.extra.items()) obj[k] = v;
  return obj.dump();
}

std::string format_manifest(const Dataset& dataset) {
  std::string out;
  for (const auto& r : dataset.records) {
    out += format_record(r);
    out += '\n';
  }
  return out;
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error(ErrorKind::Io, "short write to " + tmp.string());
  }
  fs::rename(tmp, path);
}

void save_manifest(const Dataset& dataset, const fs::path& path) {
  write_file_atomic(path, format_manifest(dataset));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace lt
