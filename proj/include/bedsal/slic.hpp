#pragma once

#include <array>
#include <vector>

#include "bedsal/image.hpp"

namespace bedsal::slic {

struct Partition {
  LabelMap labels;
  int count = 0;
};

struct Params {
  int k_target = 324;
  double compactness = 10.0;
  int iters = 10;
  // Minimum region size for connectivity enforcement; <= 0 means N/(4*k_target).
  int min_size = 0;
};

/// Seed grid spacing S = sqrt(N / k_target).
double seed_spacing(int width, int height, int k_target);

/// Lab + xy k-means from a regular seed grid followed by connectivity
/// enforcement. Throws ImageTooSmall below 18x18.
Partition segment(const RgbImage& rgb, const Params& params = {});

/// Raw clustering without connectivity enforcement.
Partition cluster(const RgbImage& rgb, const Params& params);

/// Absorbs every 4-connected component smaller than min_size into its
/// largest neighbor and compacts labels, keeping the relative order of the
/// input labels.
Partition enforce_connectivity(const Partition& part, int min_size);

using Lab = std::array<double, 3>;

/// sRGB (8-bit) to CIE Lab, D65 white point.
Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct SuperpixelStats {
  std::vector<double> mean_depth;
  std::vector<double> centroid_x;
  std::vector<double> centroid_y;
  std::vector<double> area;
  std::vector<DepthHistogram> depth_hist;
  std::vector<Lab> mean_lab;

  int count() const noexcept { return static_cast<int>(mean_depth.size()); }
};

SuperpixelStats compute_stats(const Partition& part, const DepthImage& depth, const RgbImage& rgb);

/// Label map quantized to 16 bits for inspection.
Image<std::uint16_t> label_image(const Partition& part);

/// RGB copy with superpixel boundaries painted red.
RgbImage boundary_overlay(const Partition& part, const RgbImage& rgb);

}  // namespace bedsal::slic
