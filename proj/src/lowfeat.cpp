#include "bedsal/lowfeat.hpp"

#include <algorithm>
#include <cmath>

#include "bedsal/error.hpp"

namespace bedsal::lowfeat {

namespace {

constexpr double kDepthScale = 1.0 / 255.0;

double scale_l(double l) { return l / 100.0; }
double scale_ab(double v) { return (v + 128.0) / 255.0; }
constexpr double kLabDistanceScale = 1.0 / 150.0;

// Superpixel histogram rescaled to a cell's pixel count, so identical depth
// distributions compare as equal regardless of region size.
DepthHistogram scaled_hist(const DepthHistogram& h, double factor) {
  DepthHistogram out;
  for (int b = 0; b < kHistBins; ++b) out[b] = h[b] * factor;
  return out;
}

}  // namespace

GridGeometry::GridGeometry(int width, int height) : width_(width), height_(height) {
  if (width < kGridSide || height < kGridSide)
    throw Error(ErrorCode::ImageTooSmall, "grid needs at least 20x20 pixels");
}

int GridGeometry::cell_area(int i, int j) const {
  const Span r = rows(i), c = cols(j);
  return (r.end - r.begin) * (c.end - c.begin);
}

int GridGeometry::max_cell_area() const {
  int best = 0;
  for (int i = 0; i < kGridSide; ++i)
    for (int j = 0; j < kGridSide; ++j) best = std::max(best, cell_area(i, j));
  return best;
}

GridStats grid_stats(const DepthImage& depth, const RgbImage& rgb) {
  if (depth.width() != rgb.width() || depth.height() != rgb.height())
    throw Error(ErrorCode::ShapeMismatch, "grid_stats: depth and rgb differ in size");
  const GridGeometry geo(depth.width(), depth.height());
  GridStats g;
  for (int i = 0; i < kGridSide; ++i) {
    const Span r = geo.rows(i);
    for (int j = 0; j < kGridSide; ++j) {
      const Span c = geo.cols(j);
      const int cell = i * kGridSide + j;
      double sum = 0.0;
      slic::Lab lab{};
      for (int y = r.begin; y < r.end; ++y) {
        for (int x = c.begin; x < c.end; ++x) {
          const double d = depth.at(x, y);
          sum += d;
          g.depth_hist[cell][depth_bin(d)] += 1.0;
          const auto px = slic::srgb_to_lab(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
          for (int k = 0; k < 3; ++k) lab[k] += px[k];
        }
      }
      const double area = geo.cell_area(i, j);
      g.area[cell] = area;
      g.mean_depth[cell] = sum / area;
      for (int k = 0; k < 3; ++k) g.mean_lab[cell][k] = lab[k] / area;
    }
  }
  g.max_area = geo.max_cell_area();
  return g;
}

double chi_square(std::span<const double, kHistBins> x, std::span<const double, kHistBins> y) {
  double acc = 0.0;
  for (int i = 0; i < kHistBins; ++i) {
    const double s = x[i] + y[i];
    if (s == 0.0) continue;
    const double d = x[i] - y[i];
    acc += d * d / s;
  }
  return 0.5 * acc;
}

Layer rasterized_focus_layer(const slic::Partition& part, const slic::SuperpixelStats& sp) {
  const GridGeometry geo(part.labels.width(), part.labels.height());
  Layer out{};
  for (int i = 0; i < kGridSide; ++i) {
    const Span r = geo.rows(i);
    for (int j = 0; j < kGridSide; ++j) {
      const Span c = geo.cols(j);
      double sum = 0.0;
      for (int y = r.begin; y < r.end; ++y)
        for (int x = c.begin; x < c.end; ++x) sum += sp.mean_depth[part.labels.at(x, y)];
      out[i * kGridSide + j] = sum / geo.cell_area(i, j) * kDepthScale;
    }
  }
  return out;
}

LowLayers low_level_layers(int p, const slic::SuperpixelStats& sp, const GridStats& grid,
                           const LowLevelOptions& options, const Layer* rasterized) {
  if (p < 0 || p >= sp.count())
    throw Error(ErrorCode::UnknownSuperpixel, "superpixel " + std::to_string(p));
  const double focus = sp.mean_depth[p];
  LowLayers out{};
  for (int c = 0; c < kGridCells; ++c) {
    out[0][c] = focus * kDepthScale;
    out[1][c] = grid.mean_depth[c] * kDepthScale;
    out[2][c] = (focus - grid.mean_depth[c]) * kDepthScale;
    out[3][c] = options.mode == DistanceMode::Histogram
                    ? chi_square(scaled_hist(sp.depth_hist[p], grid.area[c] / sp.area[p]), grid.depth_hist[c]) /
                          grid.max_area
                    : focus * kDepthScale;
  }
  if (options.focus == FocusLayer::Rasterized) {
    if (rasterized == nullptr)
      throw Error(ErrorCode::ShapeMismatch, "rasterized focus layer requested but not supplied");
    out[0] = *rasterized;
  }
  return out;
}

ColorLayers color_layers(int p, const slic::SuperpixelStats& sp, const GridStats& grid) {
  if (p < 0 || p >= sp.count())
    throw Error(ErrorCode::UnknownSuperpixel, "superpixel " + std::to_string(p));
  const auto& focus = sp.mean_lab[p];
  ColorLayers out{};
  for (int c = 0; c < kGridCells; ++c) {
    const auto& cell = grid.mean_lab[c];
    out[0][c] = scale_l(focus[0]);
    out[1][c] = scale_ab(focus[1]);
    out[2][c] = scale_ab(focus[2]);
    out[3][c] = scale_l(cell[0]);
    out[4][c] = scale_ab(cell[1]);
    out[5][c] = scale_ab(cell[2]);
    const double d0 = focus[0] - cell[0], d1 = focus[1] - cell[1], d2 = focus[2] - cell[2];
    out[6][c] = std::sqrt(d0 * d0 + d1 * d1 + d2 * d2) * kLabDistanceScale;
  }
  return out;
}

FeatureStack assemble_stack(std::span<const Layer> low, std::span<const Layer> bed,
                            std::span<const Layer> color) {
  if (low.size() != 4 || (bed.size() != 0 && bed.size() != 6) ||
      (color.size() != 0 && color.size() != 7)) {
    throw Error(ErrorCode::ShapeMismatch, "expected 4 low-level, 0/6 enclosure and 0/7 color layers, got " +
                                              std::to_string(low.size()) + "+" + std::to_string(bed.size()) +
                                              "+" + std::to_string(color.size()));
  }
  FeatureStack s;
  s.channels = static_cast<int>(low.size() + bed.size() + color.size());
  s.values.reserve(static_cast<std::size_t>(s.channels) * kGridCells);
  for (auto group : {low, bed, color})
    for (const auto& layer : group) s.values.insert(s.values.end(), layer.begin(), layer.end());
  return s;
}

}  // namespace bedsal::lowfeat
