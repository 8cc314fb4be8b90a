#include "bedsal/bed.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bedsal/error.hpp"
#include "bedsal/lowfeat.hpp"

namespace bedsal::bed {

namespace {

/// Longest circular run of `false`, summing `weight` over the run.
template <typename WeightFn>
double longest_false_run(const std::vector<bool>& qualifying, WeightFn weight) {
  const int n = static_cast<int>(qualifying.size());
  int start = -1;
  for (int k = 0; k < n; ++k) {
    if (qualifying[k]) {
      start = k;
      break;
    }
  }
  if (start < 0) return 1.0;
  double best = 0.0, run = 0.0;
  for (int i = 1; i <= n; ++i) {
    const int k = (start + i) % n;
    if (qualifying[k]) {
      run = 0.0;
    } else {
      run += weight(k);
      best = std::max(best, run);
    }
  }
  return best;
}

void check_superpixel(int p, const slic::SuperpixelStats& stats) {
  if (p < 0 || p >= stats.count())
    throw Error(ErrorCode::UnknownSuperpixel, "superpixel " + std::to_string(p));
}

}  // namespace

double depth_sigma(const slic::SuperpixelStats& stats) {
  const auto& d = stats.mean_depth;
  if (d.empty()) return 0.0;
  double mean = 0.0;
  for (double v : d) mean += v;
  mean /= static_cast<double>(d.size());
  double var = 0.0;
  for (double v : d) var += (v - mean) * (v - mean);
  return std::sqrt(var / static_cast<double>(d.size()));
}

std::vector<int> background_set(int p, double t, const slic::SuperpixelStats& stats) {
  check_superpixel(p, stats);
  std::vector<int> out;
  const double limit = stats.mean_depth[p] + t;
  for (int q = 0; q < stats.count(); ++q)
    if (stats.mean_depth[q] > limit) out.push_back(q);
  return out;
}

RayFan::RayFan(int p, const slic::Partition& part, const slic::SuperpixelStats& stats, int n_dir,
               double ray_step, int refine)
    : focus_depth_(stats.mean_depth.at(p)) {
  const auto& labels = part.labels;
  const int w = labels.width();
  const int h = labels.height();
  const double cx = stats.centroid_x[p];
  const double cy = stats.centroid_y[p];

  auto cast = [&](double angle) {
    const double dx = std::cos(angle) * ray_step;
    const double dy = std::sin(angle) * ray_step;
    RayHit hit;
    for (int m = 1;; ++m) {
      const int x = static_cast<int>(std::floor(cx + m * dx + 0.5));
      const int y = static_cast<int>(std::floor(cy + m * dy + 0.5));
      if (x < 0 || y < 0 || x >= w || y >= h) break;
      const int q = labels.at(x, y);
      if (q == p) continue;
      const double d = stats.mean_depth[q];
      if (!hit.any) {
        hit = {true, d, d};
      } else {
        hit.nearest = std::min(hit.nearest, d);
        hit.farthest = std::max(hit.farthest, d);
      }
    }
    return hit;
  };

  const double base = 2.0 * std::numbers::pi / n_dir;
  std::vector<RayHit> base_hits(n_dir);
  for (int k = 0; k < n_dir; ++k) base_hits[k] = cast(base * k);

  // Rays in increasing angle; bisect each base interval while its ends differ.
  auto bisect = [&](auto& self, double a, const RayHit& ha, double b, const RayHit& hb,
                    int depth) -> void {
    if (depth >= refine || ha == hb) return;
    const double mid = 0.5 * (a + b);
    const RayHit hm = cast(mid);
    self(self, a, ha, mid, hm, depth + 1);
    rays_.push_back({mid, 0.0, hm});
    self(self, mid, hm, b, hb, depth + 1);
  };
  for (int k = 0; k < n_dir; ++k) {
    rays_.push_back({base * k, 0.0, base_hits[k]});
    bisect(bisect, base * k, base_hits[k], base * (k + 1), base_hits[(k + 1) % n_dir], 0);
  }

  const int n = static_cast<int>(rays_.size());
  const double full = 2.0 * std::numbers::pi;
  for (int k = 0; k < n; ++k) {
    const double prev = rays_[(k + n - 1) % n].angle - (k == 0 ? full : 0.0);
    const double next = rays_[(k + 1) % n].angle + (k == n - 1 ? full : 0.0);
    rays_[k].weight = 0.5 * (next - prev) / full;
  }
}

bool RayFan::qualifies(int k, double t) const {
  const RayHit& h = rays_[k].hit;
  return h.any && h.nearest >= focus_depth_ && h.farthest > focus_depth_ + t;
}

double RayFan::foreground(double t) const {
  double sum = 0.0;
  for (int k = 0; k < directions(); ++k)
    if (qualifies(k, t)) sum += rays_[k].weight;
  return std::min(sum, 1.0);
}

double RayFan::opposing_gap(double t) const {
  std::vector<bool> q(rays_.size());
  for (int k = 0; k < directions(); ++k) q[k] = qualifies(k, t);
  return std::min(1.0, longest_false_run(q, [&](int k) { return rays_[k].weight; }));
}

std::pair<double, double> RayFan::integrate(double a, double b) const {
  if (b <= a) return {0.0, 0.0};
  // Direction k qualifies exactly for t < farthest - depth(p), provided
  // nothing nearer than p lies on it.
  std::vector<double> breaks;
  double f_integral = 0.0;
  for (const auto& r : rays_) {
    const RayHit& h = r.hit;
    if (!h.any || h.nearest < focus_depth_) continue;
    const double limit = h.farthest - focus_depth_;
    f_integral += r.weight * std::clamp(limit - a, 0.0, b - a);
    if (limit > a && limit < b) breaks.push_back(limit);
  }

  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());
  breaks.push_back(b);
  double g_integral = 0.0;
  double lo = a;
  for (double hi : breaks) {
    if (hi > lo) g_integral += (1.0 - opposing_gap(0.5 * (lo + hi))) * (hi - lo);
    lo = hi;
  }
  return {f_integral, g_integral};
}

double resolve_sigma(const slic::SuperpixelStats& stats, const Params& params) {
  return params.sigma >= 0.0 ? params.sigma : depth_sigma(stats);
}

double resolve_ray_step(const slic::Partition& part, const Params& params) {
  if (params.ray_step > 0.0) return params.ray_step;
  const double n = static_cast<double>(part.labels.pixel_count());
  return 0.5 * std::sqrt(n / std::max(1, part.count));
}

double foreground_fraction(int p, double t, const slic::SuperpixelStats& stats,
                           const slic::Partition& part, const Params& params) {
  check_superpixel(p, stats);
  return RayFan(p, part, stats, params.n_dir, resolve_ray_step(part, params), params.refine).foreground(t);
}

double opposing_gap(int p, double t, const slic::SuperpixelStats& stats,
                    const slic::Partition& part, const Params& params) {
  check_superpixel(p, stats);
  return RayFan(p, part, stats, params.n_dir, resolve_ray_step(part, params), params.refine).opposing_gap(t);
}

namespace {

Descriptor descriptor_from_fan(const RayFan& fan, double sigma, const Params& params) {
  Descriptor d{std::vector<double>(params.q, 0.0), std::vector<double>(params.q, 0.0)};
  if (sigma <= 0.0) return d;
  const double width = sigma / params.q;
  for (int s = 0; s < params.q; ++s) {
    const double a = s * width;
    const double b = (s + 1) * width;
    double f_mean = 0.0, g_mean = 0.0;
    if (params.integration == Integration::Exact) {
      const auto [f_int, g_int] = fan.integrate(a, b);
      f_mean = f_int / width;
      g_mean = g_int / width;
    } else {
      for (int m = 0; m < params.n_t; ++m) {
        const double t = a + (m + 0.5) * width / params.n_t;
        f_mean += fan.foreground(t);
        g_mean += 1.0 - fan.opposing_gap(t);
      }
      f_mean /= params.n_t;
      g_mean /= params.n_t;
    }
    const double scale = params.normalize ? 1.0 : width;
    d.ff[s] = std::clamp(f_mean, 0.0, 1.0) * scale;
    d.gg[s] = std::clamp(g_mean, 0.0, 1.0) * scale;
  }
  return d;
}

}  // namespace

Descriptor bed_descriptor(int p, const slic::SuperpixelStats& stats, const slic::Partition& part,
                          const Params& params) {
  check_superpixel(p, stats);
  const RayFan fan(p, part, stats, params.n_dir, resolve_ray_step(part, params), params.refine);
  return descriptor_from_fan(fan, resolve_sigma(stats, params), params);
}

std::vector<Descriptor> bed_descriptors(const slic::SuperpixelStats& stats,
                                        const slic::Partition& part, const Params& params) {
  const double sigma = resolve_sigma(stats, params);
  const double step = resolve_ray_step(part, params);
  std::vector<Descriptor> out;
  out.reserve(stats.count());
  for (int p = 0; p < stats.count(); ++p)
    out.push_back(descriptor_from_fan(RayFan(p, part, stats, params.n_dir, step, params.refine), sigma, params));
  return out;
}

std::vector<Layer> bed_layers(const std::vector<Descriptor>& descriptors, const slic::Partition& part) {
  const int q = descriptors.empty() ? 0 : static_cast<int>(descriptors.front().ff.size());
  const lowfeat::GridGeometry geo(part.labels.width(), part.labels.height());
  std::vector<Layer> out(2 * q, Layer{});
  for (int i = 0; i < kGridSide; ++i) {
    const auto r = geo.rows(i);
    for (int j = 0; j < kGridSide; ++j) {
      const auto c = geo.cols(j);
      const int cell = i * kGridSide + j;
      for (int y = r.begin; y < r.end; ++y) {
        for (int x = c.begin; x < c.end; ++x) {
          const auto& d = descriptors[part.labels.at(x, y)];
          for (int s = 0; s < q; ++s) {
            out[s][cell] += d.ff[s];
            out[q + s][cell] += d.gg[s];
          }
        }
      }
      const double area = geo.cell_area(i, j);
      for (auto& layer : out) layer[cell] /= area;
    }
  }
  return out;
}

std::vector<Layer> bed_layers(const slic::SuperpixelStats& stats, const slic::Partition& part,
                              const Params& params) {
  return bed_layers(bed_descriptors(stats, part, params), part);
}

Image<std::uint8_t> slice_image(const std::vector<Descriptor>& descriptors,
                                const slic::Partition& part, int component) {
  Image<std::uint8_t> out(part.labels.width(), part.labels.height());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    const auto& d = descriptors[part.labels.data()[i]];
    const int q = static_cast<int>(d.ff.size());
    const double v = component < q ? d.ff[component] : d.gg[component - q];
    out.data()[i] = static_cast<std::uint8_t>(std::floor(std::clamp(v, 0.0, 1.0) * 255.0 + 0.5));
  }
  return out;
}

DenseOracle::DenseOracle(int p, const slic::Partition& part, const slic::SuperpixelStats& stats)
    : p_(p), stats_(stats), rays_(360) {
  check_superpixel(p, stats);
  const int w = part.labels.width();
  const int h = part.labels.height();
  for (int deg = 0; deg < 360; ++deg) {
    const double angle = deg * std::numbers::pi / 180.0;
    auto& seen = rays_[deg];
    for (double s = 0.5;; s += 0.5) {
      const double x = stats.centroid_x[p] + s * std::cos(angle);
      const double y = stats.centroid_y[p] + s * std::sin(angle);
      const int px = static_cast<int>(std::floor(x + 0.5));
      const int py = static_cast<int>(std::floor(y + 0.5));
      if (px < 0 || py < 0 || px >= w || py >= h) break;
      const int q = part.labels.at(px, py);
      if (q != p && std::find(seen.begin(), seen.end(), q) == seen.end()) seen.push_back(q);
    }
  }
}

std::vector<bool> DenseOracle::classify(double t) const {
  const auto background = background_set(p_, t, stats_);
  std::vector<bool> out(rays_.size());
  for (std::size_t k = 0; k < rays_.size(); ++k) {
    bool occluded = false, reaches_background = false;
    for (int q : rays_[k]) {
      if (stats_.mean_depth[q] < stats_.mean_depth[p_]) occluded = true;
      if (std::find(background.begin(), background.end(), q) != background.end())
        reaches_background = true;
    }
    out[k] = !occluded && reaches_background;
  }
  return out;
}

double DenseOracle::foreground(double t) const {
  const auto q = classify(t);
  return static_cast<double>(std::count(q.begin(), q.end(), true)) / q.size();
}

double DenseOracle::opposing_gap(double t) const {
  return longest_false_run(classify(t), [](int) { return 1.0 / 360.0; });
}

std::pair<double, double> bed_oracle(int p, double t, const slic::SuperpixelStats& stats,
                                     const slic::Partition& part) {
  const DenseOracle oracle(p, part, stats);
  return {oracle.foreground(t), oracle.opposing_gap(t)};
}

}  // namespace bedsal::bed
