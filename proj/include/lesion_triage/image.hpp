#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <opencv2/core.hpp>

namespace lt {

// Rasters are cv::Mat. Colour images are CV_8UC3 in RGB channel order
// throughout the library; conversion from OpenCV's BGR happens only at
// decode/encode time.

cv::Mat decode_image(std::span<const std::uint8_t> bytes);
cv::Mat decode_image(const std::string& bytes);
cv::Mat load_image(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_png(const cv::Mat& rgb);
void save_png(const std::filesystem::path& path, const cv::Mat& rgb);

/// Pixel box with exclusive upper corner: x0 <= x < x1, y0 <= y < y1.
struct BBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
  bool valid() const { return x0 < x1 && y0 < y1; }
  bool contains(int x, int y) const { return x >= x0 && x < x1 && y >= y0 && y < y1; }
  cv::Rect rect() const { return {x0, y0, x1 - x0, y1 - y0}; }
  bool operator==(const BBox&) const = default;
};

/// Binary background (0) / subject (1) raster, CV_8UC1.
class SegmentationMask {
 public:
  SegmentationMask() = default;
  /// Takes any single-channel 8-bit raster; non-zero becomes 1.
  static SegmentationMask from_nonzero(const cv::Mat& raster);
  /// Throws Error(NonBinaryMask) unless every value is 0 or 1.
  static SegmentationMask from_binary(const cv::Mat& raster);
  static SegmentationMask zeros(int width, int height);

  const cv::Mat& pixels() const { return pixels_; }
  cv::Mat& pixels() { return pixels_; }
  int width() const { return pixels_.cols; }
  int height() const { return pixels_.rows; }
  bool empty() const { return pixels_.empty(); }
  std::uint8_t at(int x, int y) const { return pixels_.at<std::uint8_t>(y, x); }
  std::size_t count() const;
  /// Tight box around the 1-pixels, nullopt when none are set.
  std::optional<BBox> bounds() const;

 private:
  explicit SegmentationMask(cv::Mat m) : pixels_(std::move(m)) {}
  cv::Mat pixels_;
};

/// Reads any 8-bit image and treats non-zero as subject.
SegmentationMask load_mask(const std::filesystem::path& path);
/// 1-bit PNG.
void save_mask(const std::filesystem::path& path, const SegmentationMask& mask);

/// Nearest-neighbour resize that keeps values binary.
SegmentationMask resize_mask(const SegmentationMask& mask, int width, int height);

/// |a & b| / |a | b|, 1.0 when both are empty. Throws Error(DimensionMismatch).
double mask_iou(const SegmentationMask& a, const SegmentationMask& b);

}  // namespace lt
