#include "lesion_triage/image.hpp"

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lesion_triage/error.hpp"
#include "lesion_triage/manifest.hpp"

namespace lt {

cv::Mat decode_image(std::span<const std::uint8_t> bytes) {
  if (bytes.empty()) throw Error(ErrorKind::UndecodableImage, "empty payload");
  cv::Mat buf(1, static_cast<int>(bytes.size()), CV_8UC1, const_cast<std::uint8_t*>(bytes.data()));
  cv::Mat bgr = cv::imdecode(buf, cv::IMREAD_COLOR);
  if (bgr.empty()) throw Error(ErrorKind::UndecodableImage, "not a decodable image");
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

cv::Mat decode_image(const std::string& bytes) {
  return decode_image(std::span(reinterpret_cast<const std::uint8_t*>(bytes.data()), bytes.size()));
}

cv::Mat load_image(const std::filesystem::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const Error& e) {
    throw e.with_context(path.string());
  }
}

std::vector<std::uint8_t> encode_png(const cv::Mat& rgb) {
  cv::Mat bgr;
  if (rgb.channels() == 3)
    cv::cvtColor(rgb, bgr, cv::COLOR_RGB2BGR);
  else
    bgr = rgb;
  std::vector<std::uint8_t> out;
  if (!cv::imencode(".png", bgr, out)) throw Error(ErrorKind::Io, "PNG encode failed");
  return out;
}

void save_png(const std::filesystem::path& path, const cv::Mat& rgb) {
  auto bytes = encode_png(rgb);
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

SegmentationMask SegmentationMask::from_nonzero(const cv::Mat& raster) {
  CV_Assert(raster.type() == CV_8UC1);
  cv::Mat m;
  cv::compare(raster, 0, m, cv::CMP_NE);  // 0 / 255
  m /= 255;
  return SegmentationMask(m);
}

SegmentationMask SegmentationMask::from_binary(const cv::Mat& raster) {
  if (raster.type() != CV_8UC1) throw Error(ErrorKind::NonBinaryMask, "mask must be 8-bit single channel");
  double lo = 0, hi = 0;
  if (!raster.empty()) cv::minMaxLoc(raster, &lo, &hi);
  if (lo < 0 || hi > 1) throw Error(ErrorKind::NonBinaryMask, "mask values must be 0 or 1");
  return SegmentationMask(raster.clone());
}

SegmentationMask SegmentationMask::zeros(int width, int height) {
  return SegmentationMask(cv::Mat::zeros(height, width, CV_8UC1));
}

std::size_t SegmentationMask::count() const {
  return pixels_.empty() ? 0 : static_cast<std::size_t>(cv::countNonZero(pixels_));
}

std::optional<BBox> SegmentationMask::bounds() const {
  if (count() == 0) return std::nullopt;
  cv::Rect r = cv::boundingRect(pixels_);
  return BBox{r.x, r.y, r.x + r.width, r.y + r.height};
}

SegmentationMask load_mask(const std::filesystem::path& path) {
  cv::Mat raw = cv::imread(path.string(), cv::IMREAD_GRAYSCALE);
  if (raw.empty()) throw Error(ErrorKind::UndecodableImage, "cannot read mask " + path.string());
  return SegmentationMask::from_nonzero(raw);
}

void save_mask(const std::filesystem::path& path, const SegmentationMask& mask) {
  cv::Mat out = mask.pixels() * 255;
  std::vector<std::uint8_t> bytes;
  if (!cv::imencode(".png", out, bytes, {cv::IMWRITE_PNG_BILEVEL, 1}))
    throw Error(ErrorKind::Io, "mask encode failed");
  write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
}

SegmentationMask resize_mask(const SegmentationMask& mask, int width, int height) {
  if (mask.width() == width && mask.height() == height) return mask;
  cv::Mat out;
  cv::resize(mask.pixels(), out, cv::Size(width, height), 0, 0, cv::INTER_NEAREST);
  return SegmentationMask::from_binary(out);
}

double mask_iou(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorKind::DimensionMismatch, "masks differ in size");
  const int inter = cv::countNonZero(a.pixels() & b.pixels());
  const int uni = cv::countNonZero(a.pixels() | b.pixels());
  return uni == 0 ? 1.0 : static_cast<double>(inter) / uni;
}

}  // namespace lt
