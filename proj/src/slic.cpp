#include "bedsal/slic.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "bedsal/error.hpp"

namespace bedsal::slic {

namespace {

struct LinearLut {
  std::array<double, 256> v{};
  LinearLut() {
    for (int i = 0; i < 256; ++i) {
      const double c = i / 255.0;
      v[i] = c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
    }
  }
};

double lab_f(double t) {
  constexpr double eps = 216.0 / 24389.0;
  constexpr double kappa = 24389.0 / 27.0;
  return t > eps ? std::cbrt(t) : (kappa * t + 16.0) / 116.0;
}

std::vector<Lab> lab_image(const RgbImage& rgb) {
  std::vector<Lab> lab(rgb.pixel_count());
  for (int y = 0; y < rgb.height(); ++y)
    for (int x = 0; x < rgb.width(); ++x)
      lab[static_cast<std::size_t>(y) * rgb.width() + x] =
          srgb_to_lab(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
  return lab;
}

double lab_dist(const Lab& a, const Lab& b) {
  const double d0 = a[0] - b[0], d1 = a[1] - b[1], d2 = a[2] - b[2];
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

struct Center {
  Lab lab;
  double x;
  double y;
};

}  // namespace

Lab srgb_to_lab(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  static const LinearLut lut;
  const double rl = lut.v[r], gl = lut.v[g], bl = lut.v[b];
  const double x = 0.4124564 * rl + 0.3575761 * gl + 0.1804375 * bl;
  const double y = 0.2126729 * rl + 0.7151522 * gl + 0.0721750 * bl;
  const double z = 0.0193339 * rl + 0.1191920 * gl + 0.9503041 * bl;
  const double fx = lab_f(x / 0.95047);
  const double fy = lab_f(y / 1.00000);
  const double fz = lab_f(z / 1.08883);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

double seed_spacing(int width, int height, int k_target) {
  return std::sqrt(static_cast<double>(width) * height / std::max(1, k_target));
}

Partition cluster(const RgbImage& rgb, const Params& params) {
  const int w = rgb.width();
  const int h = rgb.height();
  if (w < 18 || h < 18)
    throw Error(ErrorCode::ImageTooSmall, "SLIC needs at least 18x18 pixels");
  const double spacing = seed_spacing(w, h, params.k_target);
  const auto lab = lab_image(rgb);
  auto lab_at = [&](int x, int y) -> const Lab& {
    return lab[static_cast<std::size_t>(y) * w + x];
  };

  int nx = std::max(1, static_cast<int>(std::lround(w / spacing)));
  int ny = std::max(1, static_cast<int>(std::lround(h / spacing)));
  while (nx * ny > params.k_target) {
    if (nx >= ny) --nx; else --ny;
  }

  std::vector<Center> centers;
  centers.reserve(static_cast<std::size_t>(nx) * ny);
  LabelMap labels(w, h);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      int sx = static_cast<int>((i + 0.5) * w / nx);
      int sy = static_cast<int>((j + 0.5) * h / ny);
      if (spacing >= 4.0) {
        // Move the seed off edges: lowest Lab gradient in its 3x3 neighborhood.
        double best = std::numeric_limits<double>::max();
        int bx = sx, by = sy;
        for (int dy = -1; dy <= 1; ++dy) {
          for (int dx = -1; dx <= 1; ++dx) {
            const int px = sx + dx, py = sy + dy;
            if (px < 1 || py < 1 || px >= w - 1 || py >= h - 1) continue;
            const double gx = lab_dist(lab_at(px + 1, py), lab_at(px - 1, py));
            const double gy = lab_dist(lab_at(px, py + 1), lab_at(px, py - 1));
            const double grad = gx * gx + gy * gy;
            if (grad < best) {
              best = grad;
              bx = px;
              by = py;
            }
          }
        }
        sx = bx;
        sy = by;
      }
      centers.push_back({lab_at(sx, sy), static_cast<double>(sx), static_cast<double>(sy)});
    }
  }
  for (int y = 0; y < h; ++y) {
    const int j = std::min(ny - 1, y * ny / h);
    for (int x = 0; x < w; ++x) labels.at(x, y) = j * nx + std::min(nx - 1, x * nx / w);
  }

  const double xy_weight = params.compactness / spacing;
  const int window = std::max(1, static_cast<int>(std::ceil(spacing)));
  std::vector<double> dist(lab.size());
  std::vector<std::array<double, 6>> sums(centers.size());

  for (int iter = 0; iter < params.iters; ++iter) {
    std::fill(dist.begin(), dist.end(), std::numeric_limits<double>::infinity());
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto& ctr = centers[c];
      const int x0 = std::max(0, static_cast<int>(ctr.x) - window);
      const int x1 = std::min(w - 1, static_cast<int>(ctr.x) + window);
      const int y0 = std::max(0, static_cast<int>(ctr.y) - window);
      const int y1 = std::min(h - 1, static_cast<int>(ctr.y) + window);
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - ctr.x, dy = y - ctr.y;
          const double d = lab_dist(lab_at(x, y), ctr.lab) + xy_weight * std::sqrt(dx * dx + dy * dy);
          const std::size_t idx = static_cast<std::size_t>(y) * w + x;
          if (d < dist[idx]) {
            dist[idx] = d;
            labels.data()[idx] = static_cast<int>(c);
          }
        }
      }
    }

    for (auto& s : sums) s.fill(0.0);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        auto& s = sums[labels.at(x, y)];
        const auto& l = lab_at(x, y);
        s[0] += l[0];
        s[1] += l[1];
        s[2] += l[2];
        s[3] += x;
        s[4] += y;
        s[5] += 1.0;
      }
    }
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const auto& s = sums[c];
      if (s[5] == 0.0) continue;
      centers[c] = {{s[0] / s[5], s[1] / s[5], s[2] / s[5]}, s[3] / s[5], s[4] / s[5]};
    }
  }

  return Partition{std::move(labels), static_cast<int>(centers.size())};
}

Partition enforce_connectivity(const Partition& part, int min_size) {
  const int w = part.labels.width();
  const int h = part.labels.height();
  const auto& lab = part.labels.data();
  const std::size_t n = lab.size();

  // 4-connected components of the input labeling.
  std::vector<int> comp(n, -1);
  std::vector<int> comp_label;
  std::vector<std::size_t> comp_first;
  std::vector<long> size;
  std::vector<std::size_t> stack;
  for (std::size_t start = 0; start < n; ++start) {
    if (comp[start] >= 0) continue;
    const int id = static_cast<int>(comp_label.size());
    comp_label.push_back(lab[start]);
    comp_first.push_back(start);
    size.push_back(0);
    comp[start] = id;
    stack.push_back(start);
    while (!stack.empty()) {
      const std::size_t p = stack.back();
      stack.pop_back();
      ++size[id];
      const int x = static_cast<int>(p % w), y = static_cast<int>(p / w);
      const std::size_t nbrs[4] = {p - 1, p + 1, p - w, p + w};
      const bool ok[4] = {x > 0, x < w - 1, y > 0, y < h - 1};
      for (int k = 0; k < 4; ++k) {
        if (!ok[k]) continue;
        const std::size_t q = nbrs[k];
        if (comp[q] < 0 && lab[q] == lab[p]) {
          comp[q] = id;
          stack.push_back(q);
        }
      }
    }
  }

  const int ncomp = static_cast<int>(comp_label.size());
  std::vector<int> parent(ncomp);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](int c) {
    while (parent[c] != c) {
      parent[c] = parent[parent[c]];
      c = parent[c];
    }
    return c;
  };

  for (;;) {
    std::vector<std::vector<int>> neighbors(ncomp);
    bool any_small = false;
    for (int c = 0; c < ncomp; ++c)
      if (find(c) == c && size[c] < min_size) any_small = true;
    if (!any_small) break;

    auto link = [&](std::size_t p, std::size_t q) {
      const int a = find(comp[p]), b = find(comp[q]);
      if (a == b) return;
      if (size[a] < min_size) neighbors[a].push_back(b);
      if (size[b] < min_size) neighbors[b].push_back(a);
    };
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t p = static_cast<std::size_t>(y) * w + x;
        if (x + 1 < w) link(p, p + 1);
        if (y + 1 < h) link(p, p + w);
      }
    }

    std::vector<int> small;
    for (int c = 0; c < ncomp; ++c)
      if (find(c) == c && size[c] < min_size && !neighbors[c].empty()) small.push_back(c);
    if (small.empty()) break;  // a single component smaller than min_size
    std::stable_sort(small.begin(), small.end(),
                     [&](int a, int b) { return size[a] < size[b]; });
    for (int c : small) {
      const int r = find(c);
      if (size[r] >= min_size) continue;
      int best = -1;
      for (int nb : neighbors[c]) {
        const int q = find(nb);
        if (q == r) continue;
        if (best < 0 || size[q] > size[best] || (size[q] == size[best] && q < best)) best = q;
      }
      if (best < 0) continue;
      parent[r] = best;
      size[best] += size[r];
    }
  }

  // Compact: order surviving components by (input label, first pixel).
  std::vector<int> roots;
  for (int c = 0; c < ncomp; ++c)
    if (find(c) == c) roots.push_back(c);
  std::sort(roots.begin(), roots.end(), [&](int a, int b) {
    if (comp_label[a] != comp_label[b]) return comp_label[a] < comp_label[b];
    return comp_first[a] < comp_first[b];
  });
  std::vector<int> new_label(ncomp, -1);
  for (std::size_t i = 0; i < roots.size(); ++i) new_label[roots[i]] = static_cast<int>(i);

  Partition out{LabelMap(w, h), static_cast<int>(roots.size())};
  for (std::size_t p = 0; p < n; ++p) out.labels.data()[p] = new_label[find(comp[p])];
  return out;
}

Partition segment(const RgbImage& rgb, const Params& params) {
  const Partition raw = cluster(rgb, params);
  const int min_size = params.min_size > 0
                           ? params.min_size
                           : static_cast<int>(rgb.pixel_count() / (4 * std::max(1, params.k_target)));
  return enforce_connectivity(raw, std::max(1, min_size));
}

SuperpixelStats compute_stats(const Partition& part, const DepthImage& depth, const RgbImage& rgb) {
  const int w = part.labels.width();
  const int h = part.labels.height();
  if (depth.width() != w || depth.height() != h || rgb.width() != w || rgb.height() != h)
    throw Error(ErrorCode::ShapeMismatch, "compute_stats: dimension mismatch");
  const auto k = static_cast<std::size_t>(part.count);
  SuperpixelStats st;
  st.mean_depth.assign(k, 0.0);
  st.centroid_x.assign(k, 0.0);
  st.centroid_y.assign(k, 0.0);
  st.area.assign(k, 0.0);
  st.depth_hist.assign(k, DepthHistogram{});
  st.mean_lab.assign(k, Lab{});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int l = part.labels.at(x, y);
      const double d = depth.at(x, y);
      st.mean_depth[l] += d;
      st.centroid_x[l] += x;
      st.centroid_y[l] += y;
      st.area[l] += 1.0;
      st.depth_hist[l][depth_bin(d)] += 1.0;
      const Lab lab = srgb_to_lab(rgb.at(x, y, 0), rgb.at(x, y, 1), rgb.at(x, y, 2));
      for (int c = 0; c < 3; ++c) st.mean_lab[l][c] += lab[c];
    }
  }
  for (std::size_t l = 0; l < k; ++l) {
    const double a = st.area[l];
    if (a == 0.0) continue;
    st.mean_depth[l] /= a;
    st.centroid_x[l] /= a;
    st.centroid_y[l] /= a;
    for (auto& c : st.mean_lab[l]) c /= a;
  }
  return st;
}

Image<std::uint16_t> label_image(const Partition& part) {
  Image<std::uint16_t> out(part.labels.width(), part.labels.height());
  for (std::size_t i = 0; i < out.data().size(); ++i)
    out.data()[i] = static_cast<std::uint16_t>(part.labels.data()[i]);
  return out;
}

RgbImage boundary_overlay(const Partition& part, const RgbImage& rgb) {
  RgbImage out = rgb;
  const auto& l = part.labels;
  for (int y = 0; y < l.height(); ++y) {
    for (int x = 0; x < l.width(); ++x) {
      const bool edge = (x + 1 < l.width() && l.at(x + 1, y) != l.at(x, y)) ||
                        (y + 1 < l.height() && l.at(x, y + 1) != l.at(x, y));
      if (!edge) continue;
      out.at(x, y, 0) = 255;
      out.at(x, y, 1) = 0;
      out.at(x, y, 2) = 0;
    }
  }
  return out;
}

}  // namespace bedsal::slic
