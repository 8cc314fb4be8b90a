#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "bedsal/image.hpp"
#include "bedsal/slic.hpp"

namespace bedsal::lowfeat {

/// Pixel span [begin, end) of one grid row or column.
struct Span {
  int begin = 0;
  int end = 0;
};

/// Floor-based 20x20 tiling of a width x height image.
class GridGeometry {
 public:
  GridGeometry(int width, int height);

  Span rows(int i) const { return {i * height_ / kGridSide, (i + 1) * height_ / kGridSide}; }
  Span cols(int j) const { return {j * width_ / kGridSide, (j + 1) * width_ / kGridSide}; }
  int cell_area(int i, int j) const;
  int max_cell_area() const;
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

 private:
  int width_;
  int height_;
};

struct GridStats {
  std::array<double, kGridCells> mean_depth{};
  std::array<DepthHistogram, kGridCells> depth_hist{};
  std::array<slic::Lab, kGridCells> mean_lab{};
  std::array<double, kGridCells> area{};
  double max_area = 0.0;
};

GridStats grid_stats(const DepthImage& depth, const RgbImage& rgb);

/// Half the sum over bins of (x-y)^2/(x+y); empty bins contribute 0.
double chi_square(std::span<const double, kHistBins> x, std::span<const double, kHistBins> y);

enum class DistanceMode { Histogram, MeanDepth };

/// Channel 0 filled with the focused superpixel's mean depth, or with the
/// cell-pooled map of every pixel's superpixel mean depth.
enum class FocusLayer { Constant, Rasterized };

struct LowLevelOptions {
  DistanceMode mode = DistanceMode::Histogram;
  FocusLayer focus = FocusLayer::Constant;
};

/// Cell-averaged superpixel mean depth, already scaled to [0,1].
Layer rasterized_focus_layer(const slic::Partition& part, const slic::SuperpixelStats& sp);

using LowLayers = std::array<Layer, 4>;

/// The four depth layers for superpixel `p`, scaled to about [0,1]:
/// focused mean depth, grid mean depth, their difference, and the histogram
/// distance (or the focused mean depth again in MeanDepth mode). The distance
/// compares the superpixel histogram rescaled to the cell's pixel count with
/// the cell histogram, divided by the largest cell area.
LowLayers low_level_layers(int p, const slic::SuperpixelStats& sp, const GridStats& grid,
                           const LowLevelOptions& options = {},
                           const Layer* rasterized = nullptr);

using ColorLayers = std::array<Layer, 7>;

/// Focused mean Lab (3 constant layers), grid mean Lab (3), and Lab distance.
ColorLayers color_layers(int p, const slic::SuperpixelStats& sp, const GridStats& grid);

/// C x 20 x 20 input tensor, channel-major.
struct FeatureStack {
  int channels = 0;
  std::vector<double> values;

  const double* channel(int c) const { return values.data() + static_cast<std::size_t>(c) * kGridCells; }
};

/// Concatenates 4 low-level layers, 0 or 6 enclosure layers and 0 or 7 color
/// layers in that order.
FeatureStack assemble_stack(std::span<const Layer> low, std::span<const Layer> bed,
                            std::span<const Layer> color);

}  // namespace bedsal::lowfeat
