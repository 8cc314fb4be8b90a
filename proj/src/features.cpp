#include "bedsal/features.hpp"

#include <algorithm>

#include "bedsal/error.hpp"
#include "bedsal/tensor_file.hpp"

namespace bedsal::features {

namespace fs = std::filesystem;

namespace {

constexpr int kStatColumns = 4 + kHistBins + 3;  // depth, cx, cy, area, histogram, Lab
constexpr int kGridColumns = 1 + kHistBins + 3 + 1;  // depth, histogram, Lab, area

void write(const fs::path& path, std::vector<std::uint32_t> dims, const std::vector<double>& values) {
  tensor::write_tensor_f64(dims, values, path);
}

tensor::Tensor read(const fs::path& path, std::size_t rank) {
  tensor::Tensor t = tensor::read_tensor(path);
  if (t.dims.size() != rank) throw Error(ErrorCode::DimMismatch, path.string() + " has unexpected rank");
  return t;
}

}  // namespace

std::vector<double> superpixel_targets(const slic::Partition& part, const GroundTruth& gt) {
  if (gt.width() != part.labels.width() || gt.height() != part.labels.height())
    throw Error(ErrorCode::ShapeMismatch, "ground truth and partition differ in size");
  std::vector<double> sum(part.count, 0.0), area(part.count, 0.0);
  for (std::size_t i = 0; i < gt.data().size(); ++i) {
    const int q = part.labels.data()[i];
    sum[q] += gt.data()[i];
    area[q] += 1.0;
  }
  for (int q = 0; q < part.count; ++q) sum[q] = area[q] > 0.0 ? sum[q] / area[q] : 0.0;
  return sum;
}

ImageFeatures extract(const dataio::Sample& sample, const Options& options) {
  ImageFeatures f;
  f.part = slic::segment(sample.rgb, options.slic);
  f.stats = slic::compute_stats(f.part, sample.depth, sample.rgb);
  f.grid = lowfeat::grid_stats(sample.depth, sample.rgb);
  f.rasterized = lowfeat::rasterized_focus_layer(f.part, f.stats);
  if (options.use_bed) {
    f.descriptors = bed::bed_descriptors(f.stats, f.part, options.bed);
    f.bed_layers = bed::bed_layers(f.descriptors, f.part);
  }
  if (!sample.gt.empty()) f.targets = superpixel_targets(f.part, sample.gt);
  return f;
}

void fill_stack(const ImageFeatures& f, int p, const Options& options, std::span<double> out) {
  if (static_cast<int>(out.size()) != options.channels() * kGridCells)
    throw Error(ErrorCode::ShapeMismatch, "stack buffer has the wrong size");
  if (options.use_bed && static_cast<int>(f.bed_layers.size()) != 2 * options.bed.q)
    throw Error(ErrorCode::ShapeMismatch, "features were extracted without matching enclosure layers");
  auto dst = out.begin();
  auto put = [&](const Layer& layer) { dst = std::copy(layer.begin(), layer.end(), dst); };
  for (const auto& layer : lowfeat::low_level_layers(p, f.stats, f.grid, options.low, &f.rasterized)) put(layer);
  if (options.use_bed)
    for (const auto& layer : f.bed_layers) put(layer);
  if (options.use_color)
    for (const auto& layer : lowfeat::color_layers(p, f.stats, f.grid)) put(layer);
}

lowfeat::FeatureStack stack(const ImageFeatures& f, int p, const Options& options) {
  const auto low = lowfeat::low_level_layers(p, f.stats, f.grid, options.low, &f.rasterized);
  const std::vector<Layer> none;
  const std::span<const Layer> bed = options.use_bed ? std::span<const Layer>(f.bed_layers) : none;
  if (options.use_color) {
    const auto color = lowfeat::color_layers(p, f.stats, f.grid);
    return lowfeat::assemble_stack(low, bed, color);
  }
  return lowfeat::assemble_stack(low, bed, none);
}

void save(const ImageFeatures& f, const fs::path& dir) {
  fs::create_directories(dir);
  const auto& labels = f.part.labels;
  write(dir / "labels.bstn", {static_cast<std::uint32_t>(labels.height()), static_cast<std::uint32_t>(labels.width())},
        std::vector<double>(labels.data().begin(), labels.data().end()));

  const int k = f.stats.count();
  std::vector<double> stats;
  stats.reserve(static_cast<std::size_t>(k) * kStatColumns);
  for (int q = 0; q < k; ++q) {
    stats.insert(stats.end(), {f.stats.mean_depth[q], f.stats.centroid_x[q], f.stats.centroid_y[q], f.stats.area[q]});
    stats.insert(stats.end(), f.stats.depth_hist[q].begin(), f.stats.depth_hist[q].end());
    stats.insert(stats.end(), f.stats.mean_lab[q].begin(), f.stats.mean_lab[q].end());
  }
  write(dir / "stats.bstn", {static_cast<std::uint32_t>(k), kStatColumns}, stats);

  std::vector<double> grid;
  grid.reserve(kGridCells * kGridColumns + 1);
  for (int c = 0; c < kGridCells; ++c) {
    grid.push_back(f.grid.mean_depth[c]);
    grid.insert(grid.end(), f.grid.depth_hist[c].begin(), f.grid.depth_hist[c].end());
    grid.insert(grid.end(), f.grid.mean_lab[c].begin(), f.grid.mean_lab[c].end());
    grid.push_back(f.grid.area[c]);
  }
  write(dir / "grid.bstn", {kGridCells, kGridColumns}, grid);
  write(dir / "grid_max_area.bstn", {1}, {f.grid.max_area});

  if (!f.descriptors.empty()) {
    const int q = static_cast<int>(f.descriptors.front().ff.size());
    std::vector<double> desc;
    for (const auto& d : f.descriptors) {
      desc.insert(desc.end(), d.ff.begin(), d.ff.end());
      desc.insert(desc.end(), d.gg.begin(), d.gg.end());
    }
    write(dir / "descriptors.bstn", {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(2 * q)}, desc);
  }
  if (!f.targets.empty()) write(dir / "targets.bstn", {static_cast<std::uint32_t>(k)}, f.targets);
}

ImageFeatures load(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingArtifact, "no features at " + dir.string());
  ImageFeatures f;
  const auto labels = read(dir / "labels.bstn", 2);
  f.part.labels = LabelMap(static_cast<int>(labels.dims[1]), static_cast<int>(labels.dims[0]));
  std::transform(labels.values.begin(), labels.values.end(), f.part.labels.data().begin(),
                 [](double v) { return static_cast<int>(v); });

  const auto stats = read(dir / "stats.bstn", 2);
  if (stats.dims[1] != kStatColumns) throw Error(ErrorCode::DimMismatch, "stats table has wrong width");
  const int k = static_cast<int>(stats.dims[0]);
  f.part.count = k;
  auto& s = f.stats;
  s.mean_depth.resize(k);
  s.centroid_x.resize(k);
  s.centroid_y.resize(k);
  s.area.resize(k);
  s.depth_hist.resize(k);
  s.mean_lab.resize(k);
  for (int q = 0; q < k; ++q) {
    const double* row = stats.values.data() + static_cast<std::size_t>(q) * kStatColumns;
    s.mean_depth[q] = row[0];
    s.centroid_x[q] = row[1];
    s.centroid_y[q] = row[2];
    s.area[q] = row[3];
    std::copy(row + 4, row + 4 + kHistBins, s.depth_hist[q].begin());
    std::copy(row + 4 + kHistBins, row + kStatColumns, s.mean_lab[q].begin());
  }

  const auto grid = read(dir / "grid.bstn", 2);
  if (grid.dims[0] != kGridCells || grid.dims[1] != kGridColumns)
    throw Error(ErrorCode::DimMismatch, "grid table has wrong shape");
  for (int c = 0; c < kGridCells; ++c) {
    const double* row = grid.values.data() + static_cast<std::size_t>(c) * kGridColumns;
    f.grid.mean_depth[c] = row[0];
    std::copy(row + 1, row + 1 + kHistBins, f.grid.depth_hist[c].begin());
    std::copy(row + 1 + kHistBins, row + 4 + kHistBins, f.grid.mean_lab[c].begin());
    f.grid.area[c] = row[kGridColumns - 1];
  }
  f.grid.max_area = read(dir / "grid_max_area.bstn", 1).values.at(0);
  f.rasterized = lowfeat::rasterized_focus_layer(f.part, f.stats);

  if (fs::exists(dir / "descriptors.bstn")) {
    const auto desc = read(dir / "descriptors.bstn", 2);
    if (static_cast<int>(desc.dims[0]) != k) throw Error(ErrorCode::DimMismatch, "descriptor count mismatch");
    const int q = static_cast<int>(desc.dims[1]) / 2;
    for (int p = 0; p < k; ++p) {
      const auto row = desc.values.begin() + static_cast<std::ptrdiff_t>(p) * 2 * q;
      f.descriptors.push_back({std::vector<double>(row, row + q), std::vector<double>(row + q, row + 2 * q)});
    }
    f.bed_layers = bed::bed_layers(f.descriptors, f.part);
  }
  if (fs::exists(dir / "targets.bstn")) {
    f.targets = read(dir / "targets.bstn", 1).values;
    if (static_cast<int>(f.targets.size()) != k) throw Error(ErrorCode::DimMismatch, "target count mismatch");
  }
  return f;
}

}  // namespace bedsal::features
