#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "bedsal/image.hpp"

namespace bedsal::evalkit {

/// 1 = positive, 0 = negative.
using Mask = Image<std::uint8_t>;

/// Positive where map > threshold.
Mask binarize(const SaliencyMap& map, double threshold);
/// Positive where gt >= 0.5.
Mask ground_truth_mask(const GroundTruth& gt);

struct PR {
  double precision = 0.0;
  double recall = 0.0;
};

/// Precision is 1 when nothing is predicted. Throws EmptyGroundTruth when
/// the ground truth has no positives.
PR precision_recall(const Mask& prediction, const Mask& gt);

/// (1+b2) p r / (b2 p + r), 0 when both are 0.
double f_measure(double precision, double recall, double beta2 = 0.3);

inline constexpr int kThresholds = 256;

struct CurvePoint {
  int tau = 0;  // positives are map > tau/255
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;  // mean of per-image F (pooled mode: F of the pooled counts)
};

struct EvalOptions {
  double beta2 = 0.3;
  // Sum pixel counts over all images instead of averaging per image.
  bool pooled = false;
};

struct PRCurve {
  std::vector<CurvePoint> points;  // one per tau in 0..255
  int images = 0;                  // images scored
  std::vector<int> skipped;        // indices with empty ground truth
};

/// Throws NoValidImages when every ground truth is empty.
PRCurve pr_curve(std::span<const SaliencyMap> maps, std::span<const GroundTruth> gts,
                 const EvalOptions& options = {});

enum class FMode { Adaptive, BestThreshold };
const char* to_string(FMode mode);
FMode parse_fmode(const std::string& name);

/// Per-image threshold: positives are map >= min(2 * mean(map), 1).
double adaptive_threshold(const SaliencyMap& map);

struct Score {
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
  int tau = -1;  // best threshold, -1 in adaptive mode
};

struct ImageScore {
  int index = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f = 0.0;
};

struct MethodResult {
  std::string name;
  FMode mode = FMode::BestThreshold;
  EvalOptions options;
  Score score;
  PRCurve curve;
  std::vector<ImageScore> per_image;
};

/// Adaptive: mean over images of per-image (p, r, F) at the adaptive
/// threshold. Best threshold: the tau maximizing curve F, with the curve's
/// mean precision and recall there.
MethodResult evaluate(const std::string& name, std::span<const SaliencyMap> maps,
                      std::span<const GroundTruth> gts, FMode mode, const EvalOptions& options = {});

double mean_f(std::span<const SaliencyMap> maps, std::span<const GroundTruth> gts, FMode mode,
              const EvalOptions& options = {});

/// method,precision,recall,f,mode,beta2
std::string summary_csv(std::span<const MethodResult> results);
/// tau,precision,recall,f
std::string pr_curve_csv(const PRCurve& curve);
/// Aligned text table of mean precision, recall and F per method.
std::string format_table(std::span<const MethodResult> results);

}  // namespace bedsal::evalkit
