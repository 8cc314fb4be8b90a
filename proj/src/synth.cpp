#include "bedsal/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <map>

#include "bedsal/rng.hpp"

namespace bedsal::synth {

namespace {

constexpr std::array<std::array<std::uint8_t, 3>, 8> kPalette = {{
    {200, 190, 170},
    {90, 110, 140},
    {230, 40, 40},
    {40, 200, 60},
    {40, 60, 230},
    {240, 220, 30},
    {200, 40, 220},
    {30, 210, 220},
}};

}  // namespace

Scene scene_from_depth(const DepthImage& depth, int k_target) {
  std::map<double, int> region;
  for (double d : depth.data()) region.emplace(d, 0);
  int next = 0;
  for (auto& [d, id] : region) id = next++;

  RgbImage rgb(depth.width(), depth.height(), 3);
  for (int y = 0; y < depth.height(); ++y) {
    for (int x = 0; x < depth.width(); ++x) {
      const auto& c = kPalette[region[depth.at(x, y)] % kPalette.size()];
      for (int k = 0; k < 3; ++k) rgb.at(x, y, k) = c[k];
    }
  }
  slic::Params params;
  params.k_target = k_target;
  Scene s{rgb, depth, slic::segment(rgb, params), {}};
  s.stats = slic::compute_stats(s.part, s.depth, s.rgb);
  return s;
}

Scene box_scene(std::uint64_t seed, int side, int k_target) {
  Rng rng(seed);
  DepthImage depth(side, side);
  const double far_a = rng.range(150, 250);
  const double far_b = rng.range(150, 250);
  const bool vertical = rng.uniform() < 0.5;
  const int step = rng.range(side / 4, 3 * side / 4);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) depth.at(x, y) = ((vertical ? x : y) < step) ? far_a : far_b;

  const int boxes = rng.range(1, 3);
  for (int b = 0; b < boxes; ++b) {
    const int bw = rng.range(side / 6, side * 3 / 8);
    const int bh = rng.range(side / 6, side * 3 / 8);
    const int x0 = rng.range(2, side - bw - 2);
    const int y0 = rng.range(2, side - bh - 2);
    const double d = rng.range(20, 140);
    for (int y = y0; y < y0 + bh; ++y)
      for (int x = x0; x < x0 + bw; ++x) depth.at(x, y) = d;
  }
  return scene_from_depth(depth, k_target);
}

slic::Partition block_partition(int width, int height, int block) {
  const int bx = (width + block - 1) / block;
  const int by = (height + block - 1) / block;
  slic::Partition part{LabelMap(width, height), bx * by};
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) part.labels.at(x, y) = (y / block) * bx + x / block;
  return part;
}

void write_fixture(const std::filesystem::path& root, int count, std::uint64_t seed, int width,
                   int height) {
  Rng rng(seed);
  for (int n = 0; n < count; ++n) {
    RgbImage rgb(width, height, 3);
    Image<std::uint16_t> depth(width, height);
    Image<std::uint8_t> gt(width, height);

    const int horizon = static_cast<int>(height * (0.62 + 0.1 * rng.uniform()));
    const double wall = 3400 + 300 * rng.uniform();
    const std::array<int, 3> wall_rgb = {rng.range(150, 190), rng.range(140, 170), rng.range(110, 140)};
    const std::array<int, 3> floor_rgb = {rng.range(90, 120), rng.range(80, 100), rng.range(60, 80)};
    for (int y = 0; y < height; ++y) {
      for (int x = 0; x < width; ++x) {
        const double texture = 12.0 * std::sin(0.21 * x + 0.13 * y) * std::cos(0.17 * y - 0.05 * x);
        const bool on_floor = y >= horizon;
        const auto& base = on_floor ? floor_rgb : wall_rgb;
        for (int k = 0; k < 3; ++k)
          rgb.at(x, y, k) = static_cast<std::uint8_t>(std::clamp(base[k] + texture, 0.0, 255.0));
        double d = wall + 120.0 * x / width;
        if (on_floor) {
          const double frac = static_cast<double>(y - horizon) / (height - horizon);
          d = wall - 200.0 - 1000.0 * frac;
        }
        depth.at(x, y) = static_cast<std::uint16_t>(d);
      }
    }

    const int objects = rng.range(1, 2);
    for (int o = 0; o < objects; ++o) {
      const double rx = width * (0.08 + 0.07 * rng.uniform());
      const double ry = height * (0.12 + 0.08 * rng.uniform());
      const double cx = width * (0.2 + 0.6 * (objects == 1 ? rng.uniform() : (o + rng.uniform()) / 2.0));
      const double cy = height * (0.3 + 0.2 * rng.uniform());
      const bool ellipse = rng.uniform() < 0.5;
      const double near = 1100 + 400 * rng.uniform();
      const auto& color = kPalette[2 + rng.range(0, 5)];
      for (int y = 0; y < height; ++y) {
        for (int x = 0; x < width; ++x) {
          const double u = (x - cx) / rx, v = (y - cy) / ry;
          const bool inside = ellipse ? (u * u + v * v <= 1.0) : (std::abs(u) <= 1.0 && std::abs(v) <= 1.0);
          if (!inside) continue;
          for (int k = 0; k < 3; ++k) rgb.at(x, y, k) = color[k];
          depth.at(x, y) = static_cast<std::uint16_t>(near + 60.0 * v);
          gt.at(x, y) = 255;
        }
      }
    }

    // Sensor dropouts along the left border.
    const int holes = rng.range(2, 4);
    for (int h = 0; h < holes; ++h) {
      const int y0 = rng.range(0, height - 12);
      for (int y = y0; y < y0 + 10; ++y)
        for (int x = 0; x < 6; ++x) depth.at(x, y) = 0;
    }

    char id[16];
    std::snprintf(id, sizeof(id), "%04d.png", n + 1);
    dataio::save_rgb(rgb, root / "rgb" / id);
    dataio::save_gray16(depth, root / "depth" / id);
    dataio::save_gray8(gt, root / "gt" / id);
  }
}

}  // namespace bedsal::synth
