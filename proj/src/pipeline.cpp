#include "bedsal/pipeline.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>
#include <random>
#include <thread>

#include "json.hpp"

#include "bedsal/error.hpp"
#include "bedsal/hash.hpp"
#include "bedsal/tensor_file.hpp"

namespace bedsal::pipeline {

namespace fs = std::filesystem;

namespace {

class StageTimer {
 public:
  StageTimer(Context& ctx, std::string name)
      : ctx_(ctx), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~StageTimer() {
    const std::chrono::duration<double> d = std::chrono::steady_clock::now() - start_;
    ctx_.timings.emplace_back(name_, d.count());
  }

 private:
  Context& ctx_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

std::string unique_suffix() {
  static std::atomic<unsigned> counter{0};
  std::random_device rd;
  return std::to_string(rd()) + "-" + std::to_string(counter++);
}

// Moves a fully written temporary directory into place. Losing a race to an
// identical entry is fine.
void publish(const fs::path& tmp, const fs::path& final_dir) {
  std::error_code ec;
  fs::rename(tmp, final_dir, ec);
  if (ec) fs::remove_all(tmp);
}

const std::vector<std::string> kFeatureKeys = {"dataset.side", "depth.", "slic.", "lowfeat.", "features.", "bed."};

std::string feature_key(const Context& ctx, const dataio::DatasetEntry& entry, const augment::AugmentSpec& spec,
                        const std::optional<dataio::DepthRange>& range) {
  Sha256 h;
  h.field("features-v2")
      .field(sha256_file(entry.rgb))
      .field(sha256_file(entry.depth))
      .field(sha256_file(entry.gt))
      .field(ctx.config.canonical(kFeatureKeys))
      .field(range ? std::to_string(range->min) + "," + std::to_string(range->max) : "per-image")
      .field(spec.suffix());
  return h.digest();
}

std::map<std::string, fs::path> files_by_stem(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(ErrorCode::MissingArtifact, "no directory " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::string ext = e.path().extension().string();
    for (auto& ch : ext) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp") out[e.path().stem().string()] = e.path();
  }
  return out;
}

std::vector<float> to_f32(const std::vector<double>& v) { return std::vector<float>(v.begin(), v.end()); }

}  // namespace

fs::path default_cache_dir() {
  if (const char* env = std::getenv("BEDSAL_CACHE_DIR"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "bedsal";
  return ".bedsal-cache";
}

void Context::note(const std::string& message) const {
  if (!quiet) std::cerr << "bedsal: " << message << '\n';
}

void Context::record_output(const fs::path& path) {
  std::error_code ec;
  const fs::path rel = fs::relative(path, run_dir, ec);
  outputs.push_back((ec || rel.empty()) ? path.string() : rel.generic_string());
}

fs::path default_run_dir(const config::Config& c) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y%m%d-%H%M%S", &tm);
  return fs::path("runs") / (std::string(stamp) + "-" + c.hash().substr(0, 8));
}

void write_manifest(const Context& ctx) {
  nlohmann::ordered_json j;
  j["toolkit"] = "bedsal";
  j["version"] = kVersion;
  j["command"] = ctx.command;
  j["config_hash"] = ctx.config.hash();
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ctx.config.values()) cfg[k] = v;
  j["config"] = cfg;
  j["jobs"] = ctx.jobs;
  j["outputs"] = ctx.outputs;
  nlohmann::ordered_json timing = nlohmann::ordered_json::object();
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char stamp[32];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%SZ", &tm);
  timing["finished"] = stamp;
  nlohmann::ordered_json stages = nlohmann::ordered_json::array();
  for (const auto& [name, seconds] : ctx.timings) stages.push_back({{"stage", name}, {"seconds", seconds}});
  timing["stages"] = stages;
  j["timing"] = timing;

  fs::create_directories(ctx.run_dir);
  const fs::path tmp = ctx.run_dir / ("manifest.json.tmp-" + unique_suffix());
  write_text(tmp, j.dump(2) + "\n");
  fs::rename(tmp, ctx.run_dir / "manifest.json");
}

dataio::DatasetIndex load_index(const Context& ctx) {
  const std::string root = ctx.config.get("dataset.root");
  if (root.empty()) throw Error(ErrorCode::ConfigError, "dataset.root is not set");
  return dataio::scan_dataset(root, config::split_spec(ctx.config));
}

std::vector<const dataio::DatasetEntry*> select(const dataio::DatasetIndex& index, const std::string& split) {
  if (split == "all") {
    std::vector<const dataio::DatasetEntry*> out;
    for (const auto& s : index.samples) out.push_back(&s);
    return out;
  }
  return index.split(dataio::parse_split(split));
}

std::optional<dataio::DepthRange> dataset_range(const Context& ctx, const dataio::DatasetIndex& index) {
  if (ctx.config.get("depth.range") != "dataset") return std::nullopt;
  std::optional<dataio::DepthRange> total;
  for (const auto& s : index.samples) {
    const auto r = dataio::valid_range(dataio::load_raw_depth(s.depth));
    if (!r) continue;
    if (!total) {
      total = r;
    } else {
      total->min = std::min(total->min, r->min);
      total->max = std::max(total->max, r->max);
    }
  }
  if (!total) throw Error(ErrorCode::NoValidDepth, "no valid depth pixel in the dataset");
  return total;
}

dataio::Sample load_sample(const Context& ctx, const dataio::DatasetEntry& entry,
                           const std::optional<dataio::DepthRange>& range) {
  auto options = config::normalize_options(ctx.config);
  options.range = range;
  dataio::Sample s{dataio::load_rgb(entry.rgb), dataio::normalize_depth(dataio::load_raw_depth(entry.depth), options),
                   dataio::load_ground_truth(entry.gt)};
  const bool same = s.rgb.width() == s.depth.width() && s.rgb.height() == s.depth.height() &&
                    s.rgb.width() == s.gt.width() && s.rgb.height() == s.gt.height();
  if (!same) throw Error(ErrorCode::ShapeMismatch, "rgb, depth and ground truth of " + entry.id + " differ in size");
  return dataio::resize_sample(s, static_cast<int>(ctx.config.integer("dataset.side")));
}

features::ImageFeatures image_features(const Context& ctx, const dataio::DatasetEntry& entry,
                                       const augment::AugmentSpec& spec,
                                       const std::optional<dataio::DepthRange>& range) {
  const auto options = config::feature_options(ctx.config);
  fs::path cached;
  if (!ctx.cache_dir.empty()) {
    cached = ctx.cache_dir / "features" / feature_key(ctx, entry, spec, range);
    if (fs::is_directory(cached)) return features::load(cached);
  }
  dataio::Sample sample = load_sample(ctx, entry, range);
  if (spec != augment::AugmentSpec{}) sample = augment::apply(sample, spec);
  features::ImageFeatures f = features::extract(sample, options);
  if (!cached.empty()) {
    const fs::path tmp = cached.parent_path() / (cached.filename().string() + ".tmp-" + unique_suffix());
    features::save(f, tmp);
    publish(tmp, cached);
  }
  return f;
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(jobs), n);
  for (std::size_t t = 0; t < count; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

void run_segment(Context& ctx, const std::string& split) {
  StageTimer timer(ctx, "segment");
  const auto index = load_index(ctx);
  const auto entries = select(index, split);
  const auto range = dataset_range(ctx, index);
  const auto options = config::feature_options(ctx.config);
  const fs::path dir = ctx.run_dir / "segment";
  fs::create_directories(dir);
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    const auto sample = load_sample(ctx, *entries[i], range);
    const auto part = slic::segment(sample.rgb, options.slic);
    dataio::save_gray16(slic::label_image(part), dir / (entries[i]->id + "_labels.png"));
    dataio::save_rgb(slic::boundary_overlay(part, sample.rgb), dir / (entries[i]->id + "_overlay.png"));
  });
  for (const auto* e : entries) {
    ctx.record_output(dir / (e->id + "_labels.png"));
    ctx.record_output(dir / (e->id + "_overlay.png"));
  }
  ctx.note("segmented " + std::to_string(entries.size()) + " images into " + dir.string());
}

void run_features(Context& ctx, const std::string& split) {
  StageTimer timer(ctx, "features");
  const auto index = load_index(ctx);
  const auto entries = select(index, split);
  const auto range = dataset_range(ctx, index);
  const auto options = config::feature_options(ctx.config);
  const fs::path dir = ctx.run_dir / "features";
  fs::create_directories(dir);
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    const auto f = image_features(ctx, *entries[i], {}, range);
    const int k = f.part.count;
    std::vector<float> stacks;
    stacks.reserve(static_cast<std::size_t>(k) * options.channels() * kGridCells);
    std::vector<double> buf(static_cast<std::size_t>(options.channels()) * kGridCells);
    for (int p = 0; p < k; ++p) {
      features::fill_stack(f, p, options, buf);
      stacks.insert(stacks.end(), buf.begin(), buf.end());
    }
    const std::vector<std::uint32_t> dims = {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(options.channels()),
                                             kGridSide, kGridSide};
    tensor::write_tensor(dims, stacks, dir / (entries[i]->id + ".bstn"));
    const std::vector<std::uint32_t> tdims = {static_cast<std::uint32_t>(k)};
    tensor::write_tensor(tdims, to_f32(f.targets), dir / (entries[i]->id + "_targets.bstn"));
  });
  for (const auto* e : entries) {
    ctx.record_output(dir / (e->id + ".bstn"));
    ctx.record_output(dir / (e->id + "_targets.bstn"));
  }
  ctx.note("wrote " + std::to_string(options.channels()) + "-channel stacks for " + std::to_string(entries.size()) +
           " images into " + dir.string());
}

void run_bed(Context& ctx, const std::string& split, bool visualize) {
  StageTimer timer(ctx, "bed");
  const auto index = load_index(ctx);
  const auto entries = select(index, split);
  const auto range = dataset_range(ctx, index);
  const auto options = config::feature_options(ctx.config);
  const int q = options.bed.q;
  const fs::path dir = ctx.run_dir / "bed";
  fs::create_directories(dir);
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    const auto sample = load_sample(ctx, *entries[i], range);
    const auto part = slic::segment(sample.rgb, options.slic);
    const auto stats = slic::compute_stats(part, sample.depth, sample.rgb);
    const auto desc = bed::bed_descriptors(stats, part, options.bed);
    std::vector<float> table;
    for (const auto& d : desc) {
      table.insert(table.end(), d.ff.begin(), d.ff.end());
      table.insert(table.end(), d.gg.begin(), d.gg.end());
    }
    const std::string& id = entries[i]->id;
    const std::vector<std::uint32_t> ddims = {static_cast<std::uint32_t>(part.count), static_cast<std::uint32_t>(2 * q)};
    tensor::write_tensor(ddims, table, dir / (id + "_descriptors.bstn"));
    std::vector<float> layers;
    for (const auto& layer : bed::bed_layers(desc, part)) layers.insert(layers.end(), layer.begin(), layer.end());
    const std::vector<std::uint32_t> ldims = {static_cast<std::uint32_t>(2 * q), kGridSide, kGridSide};
    tensor::write_tensor(ldims, layers, dir / (id + "_layers.bstn"));
    if (visualize) {
      for (int c = 0; c < 2 * q; ++c) {
        const std::string name = (c < q ? "_ff" : "_gg") + std::to_string(c % q) + ".png";
        dataio::save_gray8(bed::slice_image(desc, part, c), dir / (id + name));
      }
    }
  });
  for (const auto* e : entries) {
    ctx.record_output(dir / (e->id + "_descriptors.bstn"));
    ctx.record_output(dir / (e->id + "_layers.bstn"));
    if (visualize)
      for (int c = 0; c < 2 * q; ++c)
        ctx.record_output(dir / (e->id + (c < q ? "_ff" : "_gg") + std::to_string(c % q) + ".png"));
  }
  ctx.note("wrote enclosure descriptors for " + std::to_string(entries.size()) + " images into " + dir.string());
}

void run_augment(Context& ctx, const std::string& split, const fs::path& out) {
  StageTimer timer(ctx, "augment");
  const auto index = load_index(ctx);
  const auto entries = select(index, split);
  const auto range = dataset_range(ctx, index);
  for (const char* sub : {"rgb", "depth", "gt"}) fs::create_directories(out / sub);
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    const auto sample = load_sample(ctx, *entries[i], range);
    for (const auto& a : augment::augment_sample(sample)) {
      const std::string name = entries[i]->id + a.spec.suffix() + ".png";
      dataio::save_rgb(a.sample.rgb, out / "rgb" / name);
      // Normalized depth mapped onto 1..65535; 0 would read back as missing.
      Image<std::uint16_t> depth(a.sample.depth.width(), a.sample.depth.height());
      for (std::size_t p = 0; p < depth.data().size(); ++p)
        depth.data()[p] = static_cast<std::uint16_t>(1.0 + std::floor(a.sample.depth.data()[p] * (65534.0 / 255.0) + 0.5));
      dataio::save_gray16(depth, out / "depth" / name);
      dataio::save_saliency(a.sample.gt, out / "gt" / name);
    }
  });
  ctx.record_output(out);
  ctx.note("wrote " + std::to_string(augment::augmented_count(entries.size())) + " augmented samples into " +
           out.string());
}

namespace {

struct Pool {
  std::vector<features::ImageFeatures> images;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> examples;  // (image, superpixel)
};

Pool build_pool(const Context& ctx, const std::vector<const dataio::DatasetEntry*>& entries,
                const std::vector<augment::AugmentSpec>& specs, const std::optional<dataio::DepthRange>& range) {
  Pool pool;
  pool.images.resize(entries.size() * specs.size());
  parallel_for(pool.images.size(), ctx.jobs, [&](std::size_t i) {
    auto f = image_features(ctx, *entries[i / specs.size()], specs[i % specs.size()], range);
    // Stacks only need statistics and pooled layers.
    f.part.labels = LabelMap();
    f.descriptors.clear();
    pool.images[i] = std::move(f);
  });
  for (std::uint32_t i = 0; i < pool.images.size(); ++i)
    for (std::uint32_t p = 0; p < pool.images[i].targets.size(); ++p) pool.examples.emplace_back(i, p);
  return pool;
}

model::ExampleSource source_of(const Pool& pool, const features::Options& options) {
  return {pool.examples.size(), [&pool, options](std::size_t i, std::span<double> input) {
            const auto [img, p] = pool.examples[i];
            features::fill_stack(pool.images[img], static_cast<int>(p), options, input);
            return pool.images[img].targets[p];
          }};
}

std::string model_key(const Context& ctx, const std::vector<const dataio::DatasetEntry*>& entries) {
  Sha256 h;
  h.field("model-v2");
  for (const auto* e : entries)
    h.field(e->id).field(sha256_file(e->rgb)).field(sha256_file(e->depth)).field(sha256_file(e->gt));
  h.field(ctx.config.canonical({"dataset.side", "depth.", "slic.", "lowfeat.", "features.", "bed.", "model.", "train.",
                                "run.seed"}));
  h.field(std::to_string(ctx.jobs));
  return h.digest();
}

}  // namespace

model::Network run_train(Context& ctx) {
  StageTimer timer(ctx, "train");
  const auto index = load_index(ctx);
  const auto entries = index.split(dataio::Split::Train);
  if (entries.empty()) throw Error(ErrorCode::EmptyTrainSet, "the train split is empty");
  const fs::path model_dir = ctx.run_dir / "model";
  const fs::path log_path = ctx.run_dir / "train_log.csv";

  fs::path cached;
  if (!ctx.cache_dir.empty()) {
    cached = ctx.cache_dir / "models" / model_key(ctx, entries);
    if (fs::is_directory(cached)) {
      ctx.note("reusing cached model " + cached.filename().string().substr(0, 12));
      fs::create_directories(ctx.run_dir);
      fs::copy(cached / "model", model_dir, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
      fs::copy_file(cached / "train_log.csv", log_path, fs::copy_options::overwrite_existing);
      ctx.record_output(model_dir);
      ctx.record_output(log_path);
      return model::load_checkpoint(model_dir);
    }
  }

  const auto range = dataset_range(ctx, index);
  const auto options = config::feature_options(ctx.config);
  const auto sched = config::schedule(ctx.config);
  const bool augmented = ctx.config.flag("train.augment") && sched.stage1.iterations > 0;

  ctx.note("extracting features for " + std::to_string(entries.size()) + " training images" +
           (augmented ? " and their 31 augmentations each" : ""));
  const Pool originals = build_pool(ctx, entries, {augment::AugmentSpec{}}, range);
  Pool expanded;
  if (augmented) {
    const auto all = augment::all_specs();
    expanded = build_pool(ctx, entries, std::vector<augment::AugmentSpec>(all.begin(), all.end()), range);
  }

  auto net = model::init_network(options.channels(), static_cast<std::uint64_t>(ctx.config.integer("run.seed")),
                                 config::architecture(ctx.config));
  ctx.note("training on " + std::to_string(originals.examples.size()) + " superpixels (" +
           std::to_string(expanded.examples.size()) + " augmented)");
  std::vector<model::LogRow> log;
  net = model::train(std::move(net), source_of(expanded, options), source_of(originals, options), sched,
                     static_cast<std::uint64_t>(ctx.config.integer("run.seed")), &log, ctx.jobs);

  model::save_checkpoint(net, model_dir);
  write_text(log_path, model::format_log(log));
  ctx.record_output(model_dir);
  ctx.record_output(log_path);
  if (!cached.empty()) {
    const fs::path tmp = cached.parent_path() / (cached.filename().string() + ".tmp-" + unique_suffix());
    fs::create_directories(tmp);
    fs::copy(model_dir, tmp / "model", fs::copy_options::recursive);
    fs::copy_file(log_path, tmp / "train_log.csv");
    publish(tmp, cached);
  }
  if (!log.empty()) {
    ctx.note("final training loss " + std::to_string(log.back().loss) + " after " + std::to_string(log.size()) +
             " steps");
  }
  return net;
}

fs::path run_predict(Context& ctx, const model::Network& net) {
  StageTimer timer(ctx, "predict");
  const auto options = config::feature_options(ctx.config);
  if (net.arch().channels != options.channels()) {
    throw Error(ErrorCode::ConfigError, "checkpoint expects " + std::to_string(net.arch().channels) +
                                            " input channels but the feature settings produce " +
                                            std::to_string(options.channels()));
  }
  const auto index = load_index(ctx);
  const auto entries = select(index, ctx.config.get("predict.split"));
  if (entries.empty())
    throw Error(ErrorCode::NoValidImages, "split '" + ctx.config.get("predict.split") + "' has no images");
  const auto range = dataset_range(ctx, index);
  const fs::path dir = ctx.run_dir / "predictions";
  fs::create_directories(dir);
  parallel_for(entries.size(), ctx.jobs, [&](std::size_t i) {
    const auto f = image_features(ctx, *entries[i], {}, range);
    const auto map = model::predict(net, f.part, [&](int p, std::span<double> input) {
      features::fill_stack(f, p, options, input);
    });
    const auto gt = dataio::load_ground_truth(entries[i]->gt);
    dataio::save_saliency(dataio::resize_nearest(map, gt.width(), gt.height()), dir / (entries[i]->id + ".png"));
  });
  for (const auto* e : entries) ctx.record_output(dir / (e->id + ".png"));
  ctx.note("predicted " + std::to_string(entries.size()) + " saliency maps into " + dir.string());
  return dir;
}

std::vector<evalkit::MethodResult> run_eval(Context& ctx, const std::vector<MethodDir>& methods,
                                            const fs::path& gt_dir) {
  StageTimer timer(ctx, "eval");
  const auto gts = files_by_stem(gt_dir);
  const auto options = config::eval_options(ctx.config);
  const auto mode = config::f_mode(ctx.config);
  const fs::path dir = ctx.run_dir / "eval";
  fs::create_directories(dir);
  std::vector<evalkit::MethodResult> results;
  for (const auto& m : methods) {
    const auto maps = files_by_stem(m.maps);
    if (maps.empty()) throw Error(ErrorCode::MissingArtifact, "no saliency maps in " + m.maps.string());
    std::vector<std::string> ids;
    std::vector<SaliencyMap> loaded(maps.size());
    std::vector<GroundTruth> truth(maps.size());
    for (const auto& [stem, path] : maps) {
      if (!gts.count(stem)) throw Error(ErrorCode::MissingPair, "no ground truth for map " + path.string());
      ids.push_back(stem);
    }
    parallel_for(ids.size(), ctx.jobs, [&](std::size_t i) {
      loaded[i] = dataio::load_saliency(maps.at(ids[i]));
      truth[i] = dataio::load_ground_truth(gts.at(ids[i]));
    });
    auto r = evalkit::evaluate(m.name, loaded, truth, mode, options);
    for (int skipped : r.curve.skipped) ctx.note(m.name + ": skipped " + ids[skipped] + " (empty ground truth)");

    const std::string suffix = methods.size() == 1 ? "" : "_" + m.name;
    write_text(dir / ("pr_curve" + suffix + ".csv"), evalkit::pr_curve_csv(r.curve));
    std::string per_image = "id,precision,recall,f\n";
    for (const auto& s : r.per_image) {
      char row[128];
      std::snprintf(row, sizeof(row), ",%.9f,%.9f,%.9f\n", s.precision, s.recall, s.f);
      per_image += ids[s.index] + row;
    }
    write_text(dir / ("per_image" + suffix + ".csv"), per_image);
    ctx.record_output(dir / ("pr_curve" + suffix + ".csv"));
    ctx.record_output(dir / ("per_image" + suffix + ".csv"));
    results.push_back(std::move(r));
  }
  write_text(dir / "summary.csv", evalkit::summary_csv(results));
  ctx.record_output(dir / "summary.csv");
  return results;
}

}  // namespace bedsal::pipeline
