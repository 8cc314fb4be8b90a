#include "bedsal/dataio.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include <opencv2/imgcodecs.hpp>

#include "bedsal/error.hpp"

namespace fs = std::filesystem;

namespace bedsal::dataio {

std::optional<DepthRange> valid_range(const RawDepthImage& raw) {
  std::optional<DepthRange> range;
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (!raw.valid[i]) continue;
    const auto v = raw.values[i];
    if (!range) {
      range = DepthRange{v, v};
    } else {
      range->min = std::min(range->min, v);
      range->max = std::max(range->max, v);
    }
  }
  return range;
}

namespace {

void fill_nearest_valid(DepthImage& depth, const std::vector<std::uint8_t>& valid) {
  const int w = depth.width();
  const int h = depth.height();
  std::vector<std::uint8_t> done(valid);
  std::deque<int> queue;
  for (int i = 0; i < w * h; ++i)
    if (valid[i]) queue.push_back(i);
  constexpr int dx[4] = {1, -1, 0, 0};
  constexpr int dy[4] = {0, 0, 1, -1};
  while (!queue.empty()) {
    const int idx = queue.front();
    queue.pop_front();
    const int x = idx % w;
    const int y = idx / w;
    for (int k = 0; k < 4; ++k) {
      const int nx = x + dx[k];
      const int ny = y + dy[k];
      if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
      const int n = ny * w + nx;
      if (done[n]) continue;
      done[n] = 1;
      depth.data()[n] = depth.data()[idx];
      queue.push_back(n);
    }
  }
}

}  // namespace

DepthImage normalize_depth(const RawDepthImage& raw, const NormalizeOptions& options) {
  const auto per_image = valid_range(raw);
  if (!per_image) throw Error(ErrorCode::NoValidDepth, "depth image has no valid pixel");

  DepthImage out(raw.width, raw.height, 1, 255.0);
  const bool pass_through = options.assume_8bit && per_image->max <= 255;
  const DepthRange range = options.range.value_or(*per_image);
  const double lo = range.min;
  const double span = static_cast<double>(range.max) - lo;

  if (pass_through) {
    for (std::size_t i = 0; i < raw.values.size(); ++i) out.data()[i] = raw.values[i];
    return out;
  }
  for (std::size_t i = 0; i < raw.values.size(); ++i) {
    if (!raw.valid[i]) continue;
    double v;
    if (span <= 0.0) {
      v = 0.0;
    } else {
      v = (raw.values[i] - lo) * 255.0 / span;
    }
    out.data()[i] = std::clamp(v, 0.0, 255.0);
  }
  if (options.hole_fill == HoleFill::NearestValid) fill_nearest_valid(out, raw.valid);
  return out;
}

RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.width() == width && src.height() == height) return src;
  RgbImage out(width, height, src.channels());
  const double sx_scale = static_cast<double>(src.width()) / width;
  const double sy_scale = static_cast<double>(src.height()) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, src.height() - 1.0);
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height() - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, src.width() - 1.0);
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width() - 1);
      const double wx = fx - x0;
      for (int c = 0; c < src.channels(); ++c) {
        const double top = src.at(x0, y0, c) * (1 - wx) + src.at(x1, y0, c) * wx;
        const double bottom = src.at(x0, y1, c) * (1 - wx) + src.at(x1, y1, c) * wx;
        const double v = top * (1 - wy) + bottom * wy;
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

Sample resize_sample(const Sample& sample, int side) {
  if (sample.rgb.empty() || sample.depth.empty() || sample.gt.empty())
    throw Error(ErrorCode::ShapeMismatch, "resize_sample: empty input");
  return Sample{resize_bilinear(sample.rgb, side, side), resize_nearest(sample.depth, side, side),
                resize_nearest(sample.gt, side, side)};
}

const char* to_string(Split split) {
  switch (split) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "train";
}

Split parse_split(const std::string& name) {
  if (name == "train") return Split::Train;
  if (name == "val") return Split::Val;
  if (name == "test") return Split::Test;
  throw Error(ErrorCode::ConfigError, "unknown split '" + name + "'");
}

std::vector<const DatasetEntry*> DatasetIndex::split(Split which) const {
  std::vector<const DatasetEntry*> out;
  for (const auto& s : samples)
    if (s.split == which) out.push_back(&s);
  return out;
}

namespace {

std::map<std::string, fs::path> list_stems(const fs::path& dir) {
  std::map<std::string, fs::path> stems;
  if (!fs::is_directory(dir)) return stems;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto stem = entry.path().stem().string();
    if (stem.empty() || stem.front() == '.') continue;
    stems.emplace(stem, entry.path());
  }
  return stems;
}

}  // namespace

DatasetIndex scan_dataset(const fs::path& root, const SplitSpec& spec) {
  if (!fs::is_directory(root))
    throw Error(ErrorCode::MissingArtifact, "dataset root not found: " + root.string());

  const auto rgb = list_stems(root / "rgb");
  const auto depth = list_stems(root / "depth");
  const auto gt = list_stems(root / "gt");

  std::set<std::string> ids;
  for (const auto* m : {&rgb, &depth, &gt})
    for (const auto& [stem, path] : *m) ids.insert(stem);

  DatasetIndex index;
  for (const auto& id : ids) {
    const auto r = rgb.find(id);
    const auto d = depth.find(id);
    const auto g = gt.find(id);
    if (r == rgb.end() || d == depth.end() || g == gt.end())
      throw Error(ErrorCode::MissingPair, id);
    index.samples.push_back({id, r->second, d->second, g->second, Split::Train});
  }

  const std::size_t n = index.samples.size();
  const std::size_t total = spec.train + spec.val + spec.test;
  if (total == 0) return index;
  if (total != n) {
    throw Error(ErrorCode::ConfigError, "split counts sum to " + std::to_string(total) +
                                            " but dataset has " + std::to_string(n) + " samples");
  }

  // Fisher-Yates on raw engine output keeps the order stable across standard libraries.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::mt19937_64 rng(spec.seed);
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = rng() % i;
    std::swap(order[i - 1], order[j]);
  }
  for (std::size_t rank = 0; rank < n; ++rank) {
    Split s = Split::Test;
    if (rank < spec.train)
      s = Split::Train;
    else if (rank < spec.train + spec.val)
      s = Split::Val;
    index.samples[order[rank]].split = s;
  }
  return index;
}

std::string format_index(const DatasetIndex& index) {
  std::ostringstream out;
  for (const auto& s : index.samples) {
    out << s.id << '\t' << to_string(s.split) << '\t' << s.rgb.string() << '\t'
        << s.depth.string() << '\t' << s.gt.string() << '\n';
  }
  return out.str();
}

namespace {

cv::Mat read_or_throw(const fs::path& path, int flags) {
  cv::Mat m = cv::imread(path.string(), flags);
  if (m.empty()) throw Error(ErrorCode::IoError, "cannot read image " + path.string());
  return m;
}

void write_or_throw(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception&) {
    ok = false;
  }
  if (!ok) throw Error(ErrorCode::IoError, "cannot write image " + path.string());
}

}  // namespace

RgbImage load_rgb(const fs::path& path) {
  const cv::Mat m = read_or_throw(path, cv::IMREAD_COLOR);
  RgbImage out(m.cols, m.rows, 3);
  for (int y = 0; y < m.rows; ++y) {
    const auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < m.cols; ++x) {
      out.at(x, y, 0) = row[x][2];
      out.at(x, y, 1) = row[x][1];
      out.at(x, y, 2) = row[x][0];
    }
  }
  return out;
}

RawDepthImage load_raw_depth(const fs::path& path) {
  cv::Mat m = read_or_throw(path, cv::IMREAD_ANYDEPTH | cv::IMREAD_GRAYSCALE);
  if (m.depth() != CV_8U && m.depth() != CV_16U)
    throw Error(ErrorCode::IoError, "unsupported depth bit depth in " + path.string());
  RawDepthImage raw;
  raw.width = m.cols;
  raw.height = m.rows;
  raw.values.resize(static_cast<std::size_t>(m.cols) * m.rows);
  raw.valid.resize(raw.values.size());
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const std::uint32_t v =
          m.depth() == CV_8U ? m.at<std::uint8_t>(y, x) : m.at<std::uint16_t>(y, x);
      const std::size_t i = static_cast<std::size_t>(y) * m.cols + x;
      raw.values[i] = v;
      raw.valid[i] = v != 0;
    }
  }
  return raw;
}

GroundTruth load_ground_truth(const fs::path& path) {
  const cv::Mat m = read_or_throw(path, cv::IMREAD_GRAYSCALE);
  GroundTruth gt(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y)
    for (int x = 0; x < m.cols; ++x) gt.at(x, y) = m.at<std::uint8_t>(y, x) / 255.0;
  return gt;
}

SaliencyMap load_saliency(const fs::path& path) { return load_ground_truth(path); }

void save_rgb(const RgbImage& rgb, const fs::path& path) {
  cv::Mat m(rgb.height(), rgb.width(), CV_8UC3);
  for (int y = 0; y < rgb.height(); ++y) {
    auto* row = m.ptr<cv::Vec3b>(y);
    for (int x = 0; x < rgb.width(); ++x)
      row[x] = cv::Vec3b(rgb.at(x, y, 2), rgb.at(x, y, 1), rgb.at(x, y, 0));
  }
  write_or_throw(path, m);
}

void save_gray8(const Image<std::uint8_t>& gray, const fs::path& path) {
  cv::Mat m(gray.height(), gray.width(), CV_8UC1);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) m.at<std::uint8_t>(y, x) = gray.at(x, y);
  write_or_throw(path, m);
}

void save_gray16(const Image<std::uint16_t>& gray, const fs::path& path) {
  cv::Mat m(gray.height(), gray.width(), CV_16UC1);
  for (int y = 0; y < gray.height(); ++y)
    for (int x = 0; x < gray.width(); ++x) m.at<std::uint16_t>(y, x) = gray.at(x, y);
  write_or_throw(path, m);
}

std::uint8_t quantize_unit(double value) {
  const double v = std::floor(std::clamp(value, 0.0, 1.0) * 255.0 + 0.5);
  return static_cast<std::uint8_t>(v);
}

void save_saliency(const SaliencyMap& map, const fs::path& path) {
  Image<std::uint8_t> gray(map.width(), map.height());
  for (std::size_t i = 0; i < map.data().size(); ++i) gray.data()[i] = quantize_unit(map.data()[i]);
  save_gray8(gray, path);
}

}  // namespace bedsal::dataio
