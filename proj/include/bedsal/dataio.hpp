#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bedsal/image.hpp"

namespace bedsal::dataio {

struct RawDepthImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> values;
  std::vector<std::uint8_t> valid;  // 0 where depth is missing
};

enum class HoleFill { Far, NearestValid };

struct DepthRange {
  std::uint32_t min = 0;
  std::uint32_t max = 0;
};

struct NormalizeOptions {
  // Raw values already in [0,255] pass through unchanged.
  bool assume_8bit = false;
  HoleFill hole_fill = HoleFill::Far;
  // Dataset-wide range; per-image min/max of valid pixels when unset.
  std::optional<DepthRange> range;
};

DepthImage normalize_depth(const RawDepthImage& raw, const NormalizeOptions& options = {});

/// Min/max over valid pixels, for per-dataset normalization.
std::optional<DepthRange> valid_range(const RawDepthImage& raw);

struct Sample {
  RgbImage rgb;
  DepthImage depth;
  GroundTruth gt;
};

inline constexpr int kDefaultSide = 324;

RgbImage resize_bilinear(const RgbImage& src, int width, int height);

template <typename T>
Image<T> resize_nearest(const Image<T>& src, int width, int height) {
  Image<T> out(width, height, src.channels());
  for (int y = 0; y < height; ++y) {
    int sy = static_cast<int>((y + 0.5) * src.height() / height);
    if (sy >= src.height()) sy = src.height() - 1;
    for (int x = 0; x < width; ++x) {
      int sx = static_cast<int>((x + 0.5) * src.width() / width);
      if (sx >= src.width()) sx = src.width() - 1;
      for (int c = 0; c < src.channels(); ++c) out.at(x, y, c) = src.at(sx, sy, c);
    }
  }
  return out;
}

/// RGB bilinear, depth and ground truth nearest-neighbor.
Sample resize_sample(const Sample& sample, int side = kDefaultSide);

enum class Split { Train, Val, Test };
const char* to_string(Split split);
Split parse_split(const std::string& name);

struct DatasetEntry {
  std::string id;
  std::filesystem::path rgb;
  std::filesystem::path depth;
  std::filesystem::path gt;
  Split split = Split::Train;
};

struct SplitSpec {
  std::uint64_t seed = 0;
  // All zero puts every sample in train; otherwise the counts must sum to
  // the number of samples.
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

struct DatasetIndex {
  std::vector<DatasetEntry> samples;

  std::vector<const DatasetEntry*> split(Split which) const;
};

/// Scans root/{rgb,depth,gt}/<id>.<ext>; ids sorted lexicographically.
DatasetIndex scan_dataset(const std::filesystem::path& root, const SplitSpec& spec);

/// Tab-separated listing: id, split, rgb, depth, gt.
std::string format_index(const DatasetIndex& index);

RgbImage load_rgb(const std::filesystem::path& path);
/// 8- or 16-bit single channel; zero pixels are marked invalid.
RawDepthImage load_raw_depth(const std::filesystem::path& path);
/// 8-bit mask scaled to [0,1].
GroundTruth load_ground_truth(const std::filesystem::path& path);
/// Map stored by save_saliency, scaled back to [0,1].
SaliencyMap load_saliency(const std::filesystem::path& path);

void save_rgb(const RgbImage& rgb, const std::filesystem::path& path);
void save_gray8(const Image<std::uint8_t>& gray, const std::filesystem::path& path);
void save_gray16(const Image<std::uint16_t>& gray, const std::filesystem::path& path);

/// Quantizes round-half-up to 8 bits and writes a grayscale image.
void save_saliency(const SaliencyMap& map, const std::filesystem::path& path);
std::uint8_t quantize_unit(double value);

}  // namespace bedsal::dataio
