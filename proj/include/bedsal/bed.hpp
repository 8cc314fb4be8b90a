#pragma once

#include <utility>
#include <vector>

#include "bedsal/image.hpp"
#include "bedsal/slic.hpp"

namespace bedsal::bed {

/// How each slice integral over the depth threshold t is evaluated.
enum class Integration {
  // f and g are step functions of t; integrate them piecewise without error.
  Exact,
  // Average of n_t midpoint samples per slice.
  Midpoint,
};

struct Params {
  int q = 3;
  int n_dir = 32;
  int n_t = 5;
  // Negative: standard deviation of this image's superpixel mean depths.
  double sigma = -1.0;
  // Pixels between ray samples. Non-positive: half the mean superpixel
  // spacing, sqrt(N/K)/2, which is faster but skips thin regions.
  double ray_step = 0.5;
  // Bisection depth between neighboring base directions whose hits differ.
  // Zero gives plain count/n_dir sampling.
  int refine = 4;
  Integration integration = Integration::Exact;
  // Divide each slice integral by its width sigma/q so values lie in [0,1].
  bool normalize = true;
};

/// Population standard deviation of the superpixel mean depths.
double depth_sigma(const slic::SuperpixelStats& stats);

/// Superpixels whose mean depth exceeds mean_depth(p) + t.
std::vector<int> background_set(int p, double t, const slic::SuperpixelStats& stats);

/// What one ray from a superpixel centroid passes over.
struct RayHit {
  bool any = false;
  double nearest = 0.0;   // smallest mean depth among crossed superpixels
  double farthest = 0.0;  // largest mean depth among crossed superpixels

  bool operator==(const RayHit&) const = default;
};

struct Ray {
  double angle = 0.0;
  double weight = 0.0;  // share of the full circle this ray stands for
  RayHit hit;
};

/// Rays cast from one superpixel centroid: n_dir evenly spaced base
/// directions, bisected up to `refine` times wherever neighboring rays see
/// different depth extremes. Each ray is weighted by half the angle to each
/// neighbor. Ray geometry does not depend on t, so f and g for any threshold
/// are evaluated from this summary.
class RayFan {
 public:
  RayFan(int p, const slic::Partition& part, const slic::SuperpixelStats& stats, int n_dir,
         double ray_step, int refine = 0);

  int directions() const noexcept { return static_cast<int>(rays_.size()); }
  const Ray& ray(int k) const { return rays_[k]; }
  double focus_depth() const noexcept { return focus_depth_; }

  /// No crossed superpixel is nearer than p and one lies beyond depth(p)+t.
  bool qualifies(int k, double t) const;

  /// Weighted fraction of qualifying directions.
  double foreground(double t) const;
  /// Longest circular run of non-qualifying directions, as a weighted fraction.
  double opposing_gap(double t) const;

  /// Exact integrals of f and of 1-g over t in [a, b].
  std::pair<double, double> integrate(double a, double b) const;

 private:
  double focus_depth_;
  std::vector<Ray> rays_;
};

double foreground_fraction(int p, double t, const slic::SuperpixelStats& stats,
                           const slic::Partition& part, const Params& params);
double opposing_gap(int p, double t, const slic::SuperpixelStats& stats,
                    const slic::Partition& part, const Params& params);

/// q foreground slices followed by q gap slices.
struct Descriptor {
  std::vector<double> ff;
  std::vector<double> gg;
};

double resolve_sigma(const slic::SuperpixelStats& stats, const Params& params);
double resolve_ray_step(const slic::Partition& part, const Params& params);

Descriptor bed_descriptor(int p, const slic::SuperpixelStats& stats, const slic::Partition& part,
                          const Params& params);

std::vector<Descriptor> bed_descriptors(const slic::SuperpixelStats& stats,
                                        const slic::Partition& part, const Params& params);

/// Paints every pixel with its superpixel's descriptor and average-pools each
/// of the 2q components over the 20x20 grid.
std::vector<Layer> bed_layers(const std::vector<Descriptor>& descriptors, const slic::Partition& part);

std::vector<Layer> bed_layers(const slic::SuperpixelStats& stats, const slic::Partition& part,
                              const Params& params);

/// Full-resolution image of one descriptor component, scaled to 8 bits.
Image<std::uint8_t> slice_image(const std::vector<Descriptor>& descriptors,
                                const slic::Partition& part, int component);

/// Reference implementation: 360 rays at 1 degree, 0.5 pixel steps, and the
/// qualification rule applied to explicit label sets. Slow on purpose.
class DenseOracle {
 public:
  DenseOracle(int p, const slic::Partition& part, const slic::SuperpixelStats& stats);

  double foreground(double t) const;
  double opposing_gap(double t) const;

 private:
  std::vector<bool> classify(double t) const;

  int p_;
  const slic::SuperpixelStats& stats_;
  std::vector<std::vector<int>> rays_;
};

/// (f, g) from the dense reference.
std::pair<double, double> bed_oracle(int p, double t, const slic::SuperpixelStats& stats,
                                     const slic::Partition& part);

}  // namespace bedsal::bed
