#include "lesion_triage/ingest.hpp"

#include <algorithm>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "lesion_triage/error.hpp"

namespace lt {

namespace {

bool is_image(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  const auto stem = p.stem().string();
  if (stem.ends_with(".mask") || stem.ends_with(".lesion")) return false;
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp";
}

std::string rel(const std::filesystem::path& p, const std::filesystem::path& base) {
  return std::filesystem::relative(std::filesystem::absolute(p), std::filesystem::absolute(base)).generic_string();
}

}  // namespace

Dataset ingest_directory(const std::filesystem::path& root, const std::filesystem::path& manifest_dir,
                         const IngestOptions& options) {
  if (!std::filesystem::is_directory(root)) throw Error(ErrorKind::Io, "not a directory: " + root.string());
  std::vector<std::filesystem::path> dirs;
  for (const auto& e : std::filesystem::directory_iterator(root))
    if (e.is_directory()) dirs.push_back(e.path());
  std::sort(dirs.begin(), dirs.end());

  Dataset ds;
  std::set<std::string> ids;
  for (const auto& dir : dirs) {
    const auto name = dir.filename().string();
    std::optional<DiseaseClass> label;
    if (name != "unlabeled") label = parse_class(name);

    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::directory_iterator(dir))
      if (e.is_regular_file() && is_image(e.path())) files.push_back(e.path());
    std::sort(files.begin(), files.end());

    for (const auto& f : files) {
      const cv::Mat img = cv::imread(f.string(), cv::IMREAD_UNCHANGED);
      if (img.empty()) throw Error(ErrorKind::UndecodableImage, f.string());
      ImageRecord r;
      r.id = name + "-" + f.stem().string();
      if (!ids.insert(r.id).second) throw Error(ErrorKind::DuplicateId, r.id);
      r.path = rel(f, manifest_dir);
      r.label = label;
      r.provenance.source = options.source;
      r.provenance.origin_note = options.origin_note;
      r.verification = options.verification;
      r.width_px = img.cols;
      r.height_px = img.rows;
      const auto mask = dir / (f.stem().string() + ".mask.png");
      const auto lesion = dir / (f.stem().string() + ".lesion.png");
      if (std::filesystem::exists(mask)) r.mask_path = rel(mask, manifest_dir);
      if (std::filesystem::exists(lesion)) r.lesion_mask_path = rel(lesion, manifest_dir);
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

}  // namespace lt
