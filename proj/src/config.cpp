#include "bedsal/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "bedsal/error.hpp"
#include "bedsal/hash.hpp"

namespace bedsal::config {

namespace {

KeySpec integer(std::string key, long long fallback, double min, double max, std::string help) {
  return {std::move(key), Kind::Int, std::to_string(fallback), std::move(help), min, max, false, {}};
}

KeySpec real(std::string key, std::string fallback, double min, double max, std::string help,
             bool min_exclusive = false) {
  return {std::move(key), Kind::Real, std::move(fallback), std::move(help), min, max, min_exclusive, {}};
}

KeySpec boolean(std::string key, bool fallback, std::string help) {
  return {std::move(key), Kind::Bool, fallback ? "true" : "false", std::move(help), 0, 0, false, {}};
}

KeySpec choice(std::string key, std::vector<std::string> choices, std::string help) {
  std::string fallback = choices.front();
  return {std::move(key), Kind::Choice, std::move(fallback), std::move(help), 0, 0, false, std::move(choices)};
}

KeySpec text(std::string key, std::string fallback, std::string help) {
  return {std::move(key), Kind::Text, std::move(fallback), std::move(help), 0, 0, false, {}};
}

constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<KeySpec> build_schema() {
  return {
      text("dataset.root", "", "dataset directory holding rgb/, depth/ and gt/"),
      integer("dataset.side", 324, 20, 4096, "working resolution (square side in pixels)"),
      integer("split.seed", 0, 0, 9.2e18, "seed of the train/val/test shuffle"),
      integer("split.train", 0, 0, 1e9, "training images (all three zero: everything trains)"),
      integer("split.val", 0, 0, 1e9, "validation images"),
      integer("split.test", 0, 0, 1e9, "test images"),
      choice("depth.hole_fill", {"far", "nearest"}, "missing depth becomes the far value or the nearest valid pixel"),
      choice("depth.range", {"image", "dataset"}, "normalize depth by per-image or dataset-wide min/max"),
      boolean("depth.assume_8bit", false, "pass 8-bit depth through unchanged"),
      integer("slic.k", 324, 1, 1e7, "target superpixel count"),
      real("slic.compactness", "10", 0, 1e4, "spatial weight m", true),
      integer("slic.iters", 10, 1, 1000, "k-means iterations"),
      integer("slic.min_size", 0, 0, 1e9, "smallest kept component in pixels (0: N/(4k))"),
      choice("lowfeat.mode", {"histogram", "mean_depth"}, "fourth depth layer: histogram distance or mean depth"),
      choice("lowfeat.focus_layer", {"constant", "rasterized"}, "first depth layer: focused depth or pooled superpixel depths"),
      boolean("features.bed", true, "include the six enclosure layers"),
      boolean("features.color", false, "include the seven color layers"),
      integer("bed.q", 3, 1, 64, "depth slices"),
      integer("bed.n_dir", 32, 8, 1 << 16, "base ray directions"),
      integer("bed.n_t", 5, 1, 1 << 16, "threshold samples per slice (midpoint integration)"),
      real("bed.sigma", "-1", -kInf, kInf, "slice range; negative: per-image depth standard deviation"),
      real("bed.ray_step", "0.5", -kInf, kInf, "pixels between ray samples; <= 0: half the superpixel spacing"),
      integer("bed.refine", 4, 0, 16, "bisection levels between differing neighbor rays"),
      choice("bed.integration", {"exact", "midpoint"}, "slice integration"),
      integer("model.conv1", 16, 1, 4096, "first convolution width"),
      integer("model.conv2", 16, 1, 4096, "second convolution width"),
      integer("model.conv3", 8, 1, 4096, "third convolution width"),
      integer("model.hidden", 100, 1, 1 << 16, "fully connected hidden units"),
      integer("run.seed", 0, 0, 9.2e18, "seed for initialization and batch sampling"),
      boolean("train.augment", true, "stage 1 on the 32x rotated and flipped training set"),
      integer("train.batch", 1000, 1, 1e8, "superpixels per step"),
      real("train.depth_multiplier", "10", 0, kInf, "learning-rate multiplier of the depth branch"),
      real("train.fusion_multiplier", "1", 0, kInf, "learning-rate multiplier of the fusion layers"),
      real("train.rho", "0.9", 0, 1, "Adadelta decay"),
      real("train.epsilon", "1e-08", 0, kInf, "Adadelta epsilon", true),
      real("train.stage1.lr", "0.05", 0, kInf, "stage 1 base learning rate"),
      real("train.stage1.decay", "0.1", 0, kInf, "stage 1 learning-rate factor per decay period"),
      integer("train.stage1.decay_every", 10000, 0, 1e9, "stage 1 steps per decay (0: constant)"),
      integer("train.stage1.iterations", 50000, 0, 1e9, "stage 1 steps"),
      real("train.stage2.lr", "0.01", 0, kInf, "stage 2 learning rate"),
      real("train.stage2.decay", "1", 0, kInf, "stage 2 learning-rate factor per decay period"),
      integer("train.stage2.decay_every", 0, 0, 1e9, "stage 2 steps per decay (0: constant)"),
      integer("train.stage2.iterations", 1000, 0, 1e9, "stage 2 steps"),
      choice("predict.split", {"test", "train", "val", "all"}, "images to predict and evaluate"),
      real("eval.beta2", "0.3", 0, kInf, "F-measure beta^2 (0.3 or 0.09)", true),
      choice("eval.mode", {"best_threshold", "adaptive"}, "F-measure thresholding"),
      boolean("eval.pooled", false, "pool pixel counts over images instead of averaging per image"),
  };
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const std::string& why) {
  throw Error(ErrorCode::ConfigError, key + "=" + value + ": " + why);
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  // Shortest representation that round-trips.
  for (int p = 1; p <= 17; ++p) {
    char tmp[40];
    std::snprintf(tmp, sizeof(tmp), "%.*g", p, v);
    if (std::strtod(tmp, nullptr) == v) return tmp;
  }
  return buf;
}

// Validates and returns the canonical spelling.
std::string normalize(const KeySpec& spec, const std::string& raw) {
  const std::string value = trim(raw);
  switch (spec.kind) {
    case Kind::Int: {
      long long v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || value.empty())
        bad(spec.key, raw, "expected an integer");
      if (static_cast<double>(v) < spec.min || static_cast<double>(v) > spec.max)
        bad(spec.key, raw, "out of range [" + format_real(spec.min) + ", " + format_real(spec.max) + "]");
      return std::to_string(v);
    }
    case Kind::Real: {
      double v = 0;
      const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
      if (ec != std::errc() || ptr != value.data() + value.size() || value.empty() || !std::isfinite(v))
        bad(spec.key, raw, "expected a finite number");
      const bool low = spec.min_exclusive ? v <= spec.min : v < spec.min;
      if (low || v > spec.max) {
        bad(spec.key, raw, std::string("out of range ") + (spec.min_exclusive ? "(" : "[") + format_real(spec.min) +
                               ", " + format_real(spec.max) + "]");
      }
      return format_real(v);
    }
    case Kind::Bool:
      if (value == "true" || value == "1" || value == "yes" || value == "on") return "true";
      if (value == "false" || value == "0" || value == "no" || value == "off") return "false";
      bad(spec.key, raw, "expected true or false");
    case Kind::Choice:
      if (std::find(spec.choices.begin(), spec.choices.end(), value) == spec.choices.end()) {
        std::string list;
        for (const auto& c : spec.choices) list += (list.empty() ? "" : ", ") + c;
        bad(spec.key, raw, "expected one of " + list);
      }
      return value;
    case Kind::Text:
      return value;
  }
  return value;
}

}  // namespace

const std::vector<KeySpec>& schema() {
  static const std::vector<KeySpec> kSchema = build_schema();
  return kSchema;
}

const KeySpec* find(std::string_view key) {
  for (const auto& s : schema())
    if (s.key == key) return &s;
  return nullptr;
}

Config::Config() {
  for (const auto& s : schema()) values_[s.key] = s.fallback;
}

void Config::set(const std::string& key, const std::string& value) {
  const KeySpec* spec = find(key);
  if (!spec) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  values_[key] = normalize(*spec, value);
}

void Config::merge_text(std::string_view text, const std::string& origin) {
  std::istringstream in{std::string(text)};
  std::string line;
  std::vector<std::string> seen;
  for (int number = 1; std::getline(in, line); ++number) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto eq = content.find('=');
    const std::string where = origin + ":" + std::to_string(number);
    if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, where + ": expected key = value");
    const std::string key = trim(std::string_view(content).substr(0, eq));
    if (std::find(seen.begin(), seen.end(), key) != seen.end())
      throw Error(ErrorCode::ConfigError, where + ": duplicate key '" + key + "'");
    seen.push_back(key);
    try {
      set(key, content.substr(eq + 1));
    } catch (const Error& e) {
      throw Error(ErrorCode::ConfigError, where + ": " + e.what());
    }
  }
}

void Config::merge_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "cannot read config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  merge_text(text.str(), path.string());
}

const std::string& Config::get(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) throw Error(ErrorCode::ConfigError, "unknown config key '" + key + "'");
  return it->second;
}

long long Config::integer(const std::string& key) const { return std::stoll(get(key)); }
double Config::real(const std::string& key) const { return std::stod(get(key)); }
bool Config::flag(const std::string& key) const { return get(key) == "true"; }

std::string Config::canonical() const { return canonical({""}); }

std::string Config::canonical(const std::vector<std::string>& prefixes) const {
  std::string out;
  for (const auto& [key, value] : values_) {
    const bool keep = std::any_of(prefixes.begin(), prefixes.end(),
                                  [&](const std::string& p) { return key.compare(0, p.size(), p) == 0; });
    if (keep) out += key + "=" + value + "\n";
  }
  return out;
}

std::string Config::hash() const { return sha256_hex(canonical()); }

dataio::SplitSpec split_spec(const Config& c) {
  return {static_cast<std::uint64_t>(c.integer("split.seed")), static_cast<std::size_t>(c.integer("split.train")),
          static_cast<std::size_t>(c.integer("split.val")), static_cast<std::size_t>(c.integer("split.test"))};
}

dataio::NormalizeOptions normalize_options(const Config& c) {
  dataio::NormalizeOptions o;
  o.assume_8bit = c.flag("depth.assume_8bit");
  o.hole_fill = c.get("depth.hole_fill") == "nearest" ? dataio::HoleFill::NearestValid : dataio::HoleFill::Far;
  return o;
}

features::Options feature_options(const Config& c) {
  features::Options o;
  o.slic.k_target = static_cast<int>(c.integer("slic.k"));
  o.slic.compactness = c.real("slic.compactness");
  o.slic.iters = static_cast<int>(c.integer("slic.iters"));
  o.slic.min_size = static_cast<int>(c.integer("slic.min_size"));
  o.low.mode = c.get("lowfeat.mode") == "mean_depth" ? lowfeat::DistanceMode::MeanDepth
                                                     : lowfeat::DistanceMode::Histogram;
  o.low.focus = c.get("lowfeat.focus_layer") == "rasterized" ? lowfeat::FocusLayer::Rasterized
                                                             : lowfeat::FocusLayer::Constant;
  o.use_bed = c.flag("features.bed");
  o.use_color = c.flag("features.color");
  o.bed.q = static_cast<int>(c.integer("bed.q"));
  o.bed.n_dir = static_cast<int>(c.integer("bed.n_dir"));
  o.bed.n_t = static_cast<int>(c.integer("bed.n_t"));
  o.bed.sigma = c.real("bed.sigma");
  o.bed.ray_step = c.real("bed.ray_step");
  o.bed.refine = static_cast<int>(c.integer("bed.refine"));
  o.bed.integration = c.get("bed.integration") == "midpoint" ? bed::Integration::Midpoint : bed::Integration::Exact;
  return o;
}

model::Architecture architecture(const Config& c) {
  model::Architecture a;
  a.channels = feature_options(c).channels();
  a.conv1 = static_cast<int>(c.integer("model.conv1"));
  a.conv2 = static_cast<int>(c.integer("model.conv2"));
  a.conv3 = static_cast<int>(c.integer("model.conv3"));
  a.hidden = static_cast<int>(c.integer("model.hidden"));
  return a;
}

model::TrainSchedule schedule(const Config& c) {
  model::TrainSchedule s;
  auto stage = [&](const std::string& prefix) {
    return model::StageSchedule{c.real(prefix + ".lr"), c.real(prefix + ".decay"),
                                static_cast<int>(c.integer(prefix + ".decay_every")),
                                static_cast<int>(c.integer(prefix + ".iterations"))};
  };
  s.stage1 = stage("train.stage1");
  s.stage2 = stage("train.stage2");
  s.batch = static_cast<int>(c.integer("train.batch"));
  s.multipliers = {c.real("train.depth_multiplier"), c.real("train.fusion_multiplier")};
  s.adadelta = {c.real("train.rho"), c.real("train.epsilon")};
  return s;
}

evalkit::EvalOptions eval_options(const Config& c) { return {c.real("eval.beta2"), c.flag("eval.pooled")}; }

evalkit::FMode f_mode(const Config& c) { return evalkit::parse_fmode(c.get("eval.mode")); }

}  // namespace bedsal::config
