#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace bedsal {

/// Interleaved raster, row-major, `channels` values per pixel.
template <typename T>
class Image {
 public:
  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels),
        data_(static_cast<std::size_t>(width) * height * channels, fill) {}

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int channels() const noexcept { return channels_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  T& at(int x, int y, int c = 0) noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }
  const T& at(int x, int y, int c = 0) const noexcept {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * channels_ + c];
  }

  std::vector<T>& data() noexcept { return data_; }
  const std::vector<T>& data() const noexcept { return data_; }

  bool operator==(const Image& other) const = default;

 private:
  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

/// 8-bit RGB, channel order R, G, B.
using RgbImage = Image<std::uint8_t>;
/// Normalized depth in [0,255]; larger is farther.
using DepthImage = Image<double>;
/// Saliency ground truth in [0,1].
using GroundTruth = Image<double>;
/// Per-pixel saliency score in [0,1].
using SaliencyMap = Image<double>;
/// Per-pixel superpixel id.
using LabelMap = Image<int>;

inline constexpr int kGridSide = 20;
inline constexpr int kGridCells = kGridSide * kGridSide;

/// One 20x20 feature layer, row-major (cell row i, cell column j at i*20+j).
using Layer = std::array<double, kGridCells>;

inline constexpr int kHistBins = 8;
using DepthHistogram = std::array<double, kHistBins>;

/// Bin index of a [0,255] depth in the fixed 8-interval histogram.
inline int depth_bin(double depth) noexcept {
  int bin = static_cast<int>(depth / 32.0);
  if (bin < 0) return 0;
  if (bin >= kHistBins) return kHistBins - 1;
  return bin;
}

}  // namespace bedsal
