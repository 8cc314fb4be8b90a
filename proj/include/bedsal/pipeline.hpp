#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bedsal/augment.hpp"
#include "bedsal/config.hpp"
#include "bedsal/dataio.hpp"
#include "bedsal/evalkit.hpp"
#include "bedsal/features.hpp"
#include "bedsal/model.hpp"

namespace bedsal::pipeline {

inline constexpr const char* kVersion = "0.1.0";

/// Cache root: $BEDSAL_CACHE_DIR, else ~/.cache/bedsal.
std::filesystem::path default_cache_dir();

struct Context {
  config::Config config;
  std::filesystem::path run_dir;
  std::filesystem::path cache_dir;  // empty disables caching
  int jobs = 1;
  bool auto_mode = false;
  bool quiet = false;

  // Filled while running, written by write_manifest.
  std::string command;
  std::vector<std::pair<std::string, double>> timings;
  std::vector<std::string> outputs;

  void note(const std::string& message) const;
  void record_output(const std::filesystem::path& path);
};

/// runs/<timestamp>-<first 8 hex digits of the config hash>.
std::filesystem::path default_run_dir(const config::Config& c);

/// Writes manifest.json atomically: config and its hash, toolkit version,
/// command, outputs, and a "timing" object holding everything that varies
/// between identical runs.
void write_manifest(const Context& ctx);

dataio::DatasetIndex load_index(const Context& ctx);
/// "all" or a split name.
std::vector<const dataio::DatasetEntry*> select(const dataio::DatasetIndex& index, const std::string& split);

/// Dataset-wide valid depth range when depth.range=dataset.
std::optional<dataio::DepthRange> dataset_range(const Context& ctx, const dataio::DatasetIndex& index);

/// Loads, normalizes depth and resizes to the working side.
dataio::Sample load_sample(const Context& ctx, const dataio::DatasetEntry& entry,
                           const std::optional<dataio::DepthRange>& range);

/// Features of one (possibly augmented) sample, from the cache when present.
features::ImageFeatures image_features(const Context& ctx, const dataio::DatasetEntry& entry,
                                       const augment::AugmentSpec& spec,
                                       const std::optional<dataio::DepthRange>& range);

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The exception of the
/// lowest failing index is rethrown.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

void run_segment(Context& ctx, const std::string& split);
void run_features(Context& ctx, const std::string& split);
void run_bed(Context& ctx, const std::string& split, bool visualize);
void run_augment(Context& ctx, const std::string& split, const std::filesystem::path& out);
model::Network run_train(Context& ctx);
/// Predictions for predict.split into run_dir/predictions; returns the directory.
std::filesystem::path run_predict(Context& ctx, const model::Network& net);

struct MethodDir {
  std::string name;
  std::filesystem::path maps;
};

/// Scores each method's maps against ground truth paired by file stem and
/// writes run_dir/eval/{summary.csv, pr_curve*.csv, per_image*.csv}.
std::vector<evalkit::MethodResult> run_eval(Context& ctx, const std::vector<MethodDir>& methods,
                                            const std::filesystem::path& gt_dir);

}  // namespace bedsal::pipeline
