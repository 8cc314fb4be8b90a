#include "bedsal/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bedsal/error.hpp"

namespace bedsal::augment {

namespace {

struct Rotation {
  double cos = 1.0;
  double sin = 0.0;
};

// Exact values at multiples of 90 degrees so lattice rotations stay exact.
Rotation rotation_for(double degrees) {
  const double turns = degrees / 90.0;
  if (turns == std::floor(turns)) {
    switch (((static_cast<long long>(turns) % 4) + 4) % 4) {
      case 0: return {1.0, 0.0};
      case 1: return {0.0, 1.0};
      case 2: return {-1.0, 0.0};
      default: return {0.0, -1.0};
    }
  }
  const double r = degrees * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

template <typename T>
void require_square(const Image<T>& img) {
  if (img.width() != img.height())
    throw Error(ErrorCode::NonSquare, "rotation needs a square image, got " + std::to_string(img.width()) + "x" +
                                          std::to_string(img.height()));
}

// Calls visit(x, y, sx, sy) with the source position of every output pixel.
template <typename Visit>
void for_each_source(int side, double degrees, Visit visit) {
  const Rotation rot = rotation_for(degrees);
  const double c = 0.5 * (side - 1);
  for (int y = 0; y < side; ++y) {
    for (int x = 0; x < side; ++x) {
      const double u = x - c, v = y - c;
      visit(x, y, c + u * rot.cos - v * rot.sin, c + u * rot.sin + v * rot.cos);
    }
  }
}

}  // namespace

std::string AugmentSpec::suffix() const {
  return "_r" + std::to_string(rotation) + (flip ? "_f" : "");
}

std::array<AugmentSpec, kSpecsPerSample> all_specs() {
  std::array<AugmentSpec, kSpecsPerSample> out;
  for (int k = 0; k < kRotations; ++k) {
    out[2 * k] = {k, false};
    out[2 * k + 1] = {k, true};
  }
  return out;
}

RgbImage rotate(const RgbImage& img, double degrees) {
  require_square(img);
  if (degrees == 0.0) return img;
  const int side = img.width();
  const double hi = side - 1;
  RgbImage out(side, side, img.channels());
  for_each_source(side, degrees, [&](int x, int y, double sx, double sy) {
    sx = std::clamp(sx, 0.0, hi);
    sy = std::clamp(sy, 0.0, hi);
    const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
    const int x1 = std::min(x0 + 1, side - 1), y1 = std::min(y0 + 1, side - 1);
    const double fx = sx - x0, fy = sy - y0;
    for (int ch = 0; ch < img.channels(); ++ch) {
      const double top = img.at(x0, y0, ch) * (1.0 - fx) + img.at(x1, y0, ch) * fx;
      const double bottom = img.at(x0, y1, ch) * (1.0 - fx) + img.at(x1, y1, ch) * fx;
      const double v = top * (1.0 - fy) + bottom * fy;
      out.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
    }
  });
  return out;
}

Image<double> rotate(const Image<double>& img, double degrees) {
  require_square(img);
  if (degrees == 0.0) return img;
  const int side = img.width();
  Image<double> out(side, side, img.channels());
  for_each_source(side, degrees, [&](int x, int y, double sx, double sy) {
    const int nx = std::clamp(static_cast<int>(std::floor(sx + 0.5)), 0, side - 1);
    const int ny = std::clamp(static_cast<int>(std::floor(sy + 0.5)), 0, side - 1);
    for (int ch = 0; ch < img.channels(); ++ch) out.at(x, y, ch) = img.at(nx, ny, ch);
  });
  return out;
}

dataio::Sample apply(const dataio::Sample& sample, const AugmentSpec& spec) {
  dataio::Sample out{rotate(sample.rgb, spec.degrees()), rotate(sample.depth, spec.degrees()),
                     sample.gt.empty() ? GroundTruth{} : rotate(sample.gt, spec.degrees())};
  if (spec.flip) {
    out.rgb = flip(out.rgb);
    out.depth = flip(out.depth);
    if (!out.gt.empty()) out.gt = flip(out.gt);
  }
  return out;
}

std::vector<Augmented> augment_sample(const dataio::Sample& sample) {
  const bool same = sample.rgb.width() == sample.depth.width() && sample.rgb.height() == sample.depth.height() &&
                    (sample.gt.empty() ||
                     (sample.gt.width() == sample.rgb.width() && sample.gt.height() == sample.rgb.height()));
  if (!same) throw Error(ErrorCode::ShapeMismatch, "rgb, depth and ground truth differ in size");
  std::vector<Augmented> out;
  out.reserve(kSpecsPerSample);
  for (const auto& spec : all_specs()) out.push_back({spec, apply(sample, spec)});
  return out;
}

}  // namespace bedsal::augment
