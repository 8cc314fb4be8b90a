#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "bedsal/bed.hpp"
#include "bedsal/dataio.hpp"
#include "bedsal/lowfeat.hpp"
#include "bedsal/slic.hpp"

namespace bedsal::features {

struct Options {
  slic::Params slic;
  lowfeat::LowLevelOptions low;
  bed::Params bed;
  bool use_bed = true;
  bool use_color = false;

  int channels() const { return 4 + (use_bed ? 2 * bed.q : 0) + (use_color ? 7 : 0); }
};

/// Everything needed to build the input stack of any superpixel in one image.
struct ImageFeatures {
  slic::Partition part;
  slic::SuperpixelStats stats;
  lowfeat::GridStats grid;
  Layer rasterized{};                      // cell-pooled superpixel mean depth
  std::vector<bed::Descriptor> descriptors;  // empty when enclosure features are off
  std::vector<Layer> bed_layers;
  std::vector<double> targets;  // mean ground truth per superpixel; empty without ground truth
};

/// Mean ground-truth value over each superpixel's pixels.
std::vector<double> superpixel_targets(const slic::Partition& part, const GroundTruth& gt);

ImageFeatures extract(const dataio::Sample& sample, const Options& options);

/// Writes the C x 20 x 20 stack of superpixel p, channel-major, into `out`.
void fill_stack(const ImageFeatures& f, int p, const Options& options, std::span<double> out);
lowfeat::FeatureStack stack(const ImageFeatures& f, int p, const Options& options);

/// Directory of f64 tensors; round-trips exactly.
void save(const ImageFeatures& f, const std::filesystem::path& dir);
ImageFeatures load(const std::filesystem::path& dir);

}  // namespace bedsal::features
