#include "bedsal/evalkit.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "bedsal/error.hpp"

namespace bedsal::evalkit {

namespace {

template <typename A, typename B>
void require_same_size(const Image<A>& a, const Image<B>& b) {
  if (a.width() != b.width() || a.height() != b.height())
    throw Error(ErrorCode::ShapeMismatch, "map is " + std::to_string(a.width()) + "x" + std::to_string(a.height()) +
                                              " but ground truth is " + std::to_string(b.width()) + "x" +
                                              std::to_string(b.height()));
}

double threshold_value(int tau) { return tau / 255.0; }

// Number of thresholds tau in 0..255 with v > tau/255.
int positive_thresholds(double v) {
  int k = static_cast<int>(std::clamp(std::ceil(v * 255.0), 0.0, 256.0));
  while (k > 0 && !(threshold_value(k - 1) < v)) --k;
  while (k < kThresholds && threshold_value(k) < v) ++k;
  return k;
}

PR from_counts(double tp, double fp, double fn) {
  const double predicted = tp + fp;
  return {predicted == 0.0 ? 1.0 : tp / predicted, tp / (tp + fn)};
}

std::string fixed(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

}  // namespace

Mask binarize(const SaliencyMap& map, double threshold) {
  Mask out(map.width(), map.height());
  for (std::size_t i = 0; i < map.data().size(); ++i) out.data()[i] = map.data()[i] > threshold ? 1 : 0;
  return out;
}

Mask ground_truth_mask(const GroundTruth& gt) {
  Mask out(gt.width(), gt.height());
  for (std::size_t i = 0; i < gt.data().size(); ++i) out.data()[i] = gt.data()[i] >= 0.5 ? 1 : 0;
  return out;
}

PR precision_recall(const Mask& prediction, const Mask& gt) {
  require_same_size(prediction, gt);
  double tp = 0.0, fp = 0.0, fn = 0.0;
  for (std::size_t i = 0; i < gt.data().size(); ++i) {
    const bool p = prediction.data()[i] != 0, g = gt.data()[i] != 0;
    tp += p && g;
    fp += p && !g;
    fn += !p && g;
  }
  if (tp + fn == 0.0) throw Error(ErrorCode::EmptyGroundTruth, "ground truth has no salient pixels");
  return from_counts(tp, fp, fn);
}

double f_measure(double precision, double recall, double beta2) {
  const double denom = beta2 * precision + recall;
  if (denom == 0.0) return 0.0;
  return (1.0 + beta2) * precision * recall / denom;
}

PRCurve pr_curve(std::span<const SaliencyMap> maps, std::span<const GroundTruth> gts, const EvalOptions& options) {
  if (maps.size() != gts.size()) throw Error(ErrorCode::ShapeMismatch, "need one ground truth per map");
  PRCurve curve;
  curve.points.resize(kThresholds);
  std::vector<std::array<double, 3>> pooled(kThresholds, {0.0, 0.0, 0.0});
  std::vector<std::array<double, 3>> sums(kThresholds, {0.0, 0.0, 0.0});

  for (std::size_t m = 0; m < maps.size(); ++m) {
    require_same_size(maps[m], gts[m]);
    std::array<double, kThresholds + 1> pos{}, neg{};
    double positives = 0.0;
    for (std::size_t i = 0; i < maps[m].data().size(); ++i) {
      const int n = positive_thresholds(maps[m].data()[i]);
      if (gts[m].data()[i] >= 0.5) {
        pos[n] += 1.0;
        positives += 1.0;
      } else {
        neg[n] += 1.0;
      }
    }
    if (positives == 0.0) {
      curve.skipped.push_back(static_cast<int>(m));
      continue;
    }
    ++curve.images;
    // Pixels with n > tau are predicted positive at tau.
    double tp = 0.0, fp = 0.0;
    for (int tau = kThresholds - 1; tau >= 0; --tau) {
      tp += pos[tau + 1];
      fp += neg[tau + 1];
      const double fn = positives - tp;
      const PR pr = from_counts(tp, fp, fn);
      sums[tau][0] += pr.precision;
      sums[tau][1] += pr.recall;
      sums[tau][2] += f_measure(pr.precision, pr.recall, options.beta2);
      pooled[tau][0] += tp;
      pooled[tau][1] += fp;
      pooled[tau][2] += fn;
    }
  }
  if (curve.images == 0) throw Error(ErrorCode::NoValidImages, "no image has a non-empty ground truth");

  for (int tau = 0; tau < kThresholds; ++tau) {
    CurvePoint& pt = curve.points[tau];
    pt.tau = tau;
    if (options.pooled) {
      const PR pr = from_counts(pooled[tau][0], pooled[tau][1], pooled[tau][2]);
      pt.precision = pr.precision;
      pt.recall = pr.recall;
      pt.f = f_measure(pr.precision, pr.recall, options.beta2);
    } else {
      pt.precision = sums[tau][0] / curve.images;
      pt.recall = sums[tau][1] / curve.images;
      pt.f = sums[tau][2] / curve.images;
    }
  }
  return curve;
}

const char* to_string(FMode mode) { return mode == FMode::Adaptive ? "adaptive" : "best_threshold"; }

FMode parse_fmode(const std::string& name) {
  if (name == "adaptive") return FMode::Adaptive;
  if (name == "best_threshold") return FMode::BestThreshold;
  throw Error(ErrorCode::ConfigError, "unknown F mode '" + name + "' (expected adaptive or best_threshold)");
}

double adaptive_threshold(const SaliencyMap& map) {
  double sum = 0.0;
  for (double v : map.data()) sum += v;
  const double mean = map.data().empty() ? 0.0 : sum / static_cast<double>(map.data().size());
  return std::clamp(2.0 * mean, 0.0, 1.0);
}

MethodResult evaluate(const std::string& name, std::span<const SaliencyMap> maps,
                      std::span<const GroundTruth> gts, FMode mode, const EvalOptions& options) {
  MethodResult r;
  r.name = name;
  r.mode = mode;
  r.options = options;
  r.curve = pr_curve(maps, gts, options);

  std::size_t next_skip = 0;
  double tp_all = 0.0, fp_all = 0.0, fn_all = 0.0;
  for (std::size_t m = 0; m < maps.size(); ++m) {
    if (next_skip < r.curve.skipped.size() && r.curve.skipped[next_skip] == static_cast<int>(m)) {
      ++next_skip;
      continue;
    }
    const double th = adaptive_threshold(maps[m]);
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (std::size_t i = 0; i < maps[m].data().size(); ++i) {
      const bool p = maps[m].data()[i] >= th, g = gts[m].data()[i] >= 0.5;
      tp += p && g;
      fp += p && !g;
      fn += !p && g;
    }
    tp_all += tp;
    fp_all += fp;
    fn_all += fn;
    const PR pr = from_counts(tp, fp, fn);
    r.per_image.push_back({static_cast<int>(m), pr.precision, pr.recall,
                           f_measure(pr.precision, pr.recall, options.beta2)});
  }

  if (mode == FMode::Adaptive) {
    if (options.pooled) {
      const PR pr = from_counts(tp_all, fp_all, fn_all);
      r.score = {pr.precision, pr.recall, f_measure(pr.precision, pr.recall, options.beta2), -1};
    } else {
      for (const auto& s : r.per_image) {
        r.score.precision += s.precision;
        r.score.recall += s.recall;
        r.score.f += s.f;
      }
      const double n = static_cast<double>(r.per_image.size());
      r.score.precision /= n;
      r.score.recall /= n;
      r.score.f /= n;
    }
  } else {
    const auto best = std::max_element(r.curve.points.begin(), r.curve.points.end(),
                                       [](const CurvePoint& a, const CurvePoint& b) { return a.f < b.f; });
    r.score = {best->precision, best->recall, best->f, best->tau};
  }
  return r;
}

double mean_f(std::span<const SaliencyMap> maps, std::span<const GroundTruth> gts, FMode mode,
              const EvalOptions& options) {
  return evaluate("", maps, gts, mode, options).score.f;
}

std::string summary_csv(std::span<const MethodResult> results) {
  std::string out = "method,precision,recall,f,mode,beta2\n";
  for (const auto& r : results) {
    out += r.name + ',' + fixed(r.score.precision) + ',' + fixed(r.score.recall) + ',' + fixed(r.score.f) + ',' +
           to_string(r.mode) + (r.options.pooled ? "_pooled" : "") + ',' + fixed(r.options.beta2) + '\n';
  }
  return out;
}

std::string pr_curve_csv(const PRCurve& curve) {
  std::string out = "tau,precision,recall,f\n";
  for (const auto& p : curve.points)
    out += std::to_string(p.tau) + ',' + fixed(p.precision) + ',' + fixed(p.recall) + ',' + fixed(p.f) + '\n';
  return out;
}

std::string format_table(std::span<const MethodResult> results) {
  std::size_t width = 6;
  for (const auto& r : results) width = std::max(width, r.name.size());
  std::string out;
  auto row = [&](const std::string& a, const std::string& b, const std::string& c, const std::string& d) {
    out += a + std::string(width - a.size() + 2, ' ') + b + std::string(12 - b.size(), ' ') + c +
           std::string(12 - c.size(), ' ') + d + '\n';
  };
  row("Method", "Precision", "Recall", "F-measure");
  for (const auto& r : results) {
    char p[16], rc[16], f[16];
    std::snprintf(p, sizeof(p), "%.6f", r.score.precision);
    std::snprintf(rc, sizeof(rc), "%.6f", r.score.recall);
    std::snprintf(f, sizeof(f), "%.6f", r.score.f);
    row(r.name, p, rc, f);
  }
  if (!results.empty()) {
    char note[96];
    std::snprintf(note, sizeof(note), "(F mode %s, beta^2 = %g)\n", to_string(results.front().mode),
                  results.front().options.beta2);
    out += note;
  }
  return out;
}

}  // namespace bedsal::evalkit
