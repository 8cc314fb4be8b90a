#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "bedsal/dataio.hpp"
#include "bedsal/image.hpp"

namespace bedsal::augment {

inline constexpr int kRotations = 16;
inline constexpr int kSpecsPerSample = 2 * kRotations;

struct AugmentSpec {
  int rotation = 0;  // angle = 22.5 degrees * rotation
  bool flip = false;

  double degrees() const { return 22.5 * rotation; }
  /// Id suffix: "_r<k>" plus "_f" when flipped.
  std::string suffix() const;
  bool operator==(const AugmentSpec&) const = default;
};

/// Rotation-major: (0,false), (0,true), (1,false), ...
std::array<AugmentSpec, kSpecsPerSample> all_specs();

constexpr std::size_t augmented_count(std::size_t originals) { return originals * kSpecsPerSample; }

/// Rotation about the image center, counter-clockwise as displayed, same
/// output size. Samples falling outside the source take the nearest edge
/// pixel. RGB is bilinear; the double overload (depth, ground truth) is
/// nearest-neighbor.
RgbImage rotate(const RgbImage& img, double degrees);
Image<double> rotate(const Image<double>& img, double degrees);

/// Horizontal mirror: (x, y) -> (W-1-x, y).
template <typename T>
Image<T> flip(const Image<T>& img) {
  Image<T> out(img.width(), img.height(), img.channels());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) out.at(img.width() - 1 - x, y, c) = img.at(x, y, c);
  return out;
}

/// Rotation then optional flip, applied identically to all three rasters.
dataio::Sample apply(const dataio::Sample& sample, const AugmentSpec& spec);

struct Augmented {
  AugmentSpec spec;
  dataio::Sample sample;
};

/// All 32 variants; the first is the unmodified input.
std::vector<Augmented> augment_sample(const dataio::Sample& sample);

}  // namespace bedsal::augment
