// Command-line front end: one subcommand per pipeline stage.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bedsal/config.hpp"
#include "bedsal/error.hpp"
#include "bedsal/pipeline.hpp"
#include "bedsal/synth.hpp"

namespace fs = std::filesystem;
using namespace bedsal;

namespace {

struct Globals {
  std::string config_path;
  int jobs = 1;
  std::optional<long long> seed;
  bool auto_mode = false;
  bool dry_run = false;
  std::string run_dir;
  bool no_cache = false;
  bool quiet = false;
  std::vector<std::string> sets;
};

// Per-key flags registered on a subcommand; only flags given on the command
// line override the config file.
struct KeyFlags {
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
};

void add_key_flags(CLI::App& cmd, KeyFlags& flags, const std::vector<std::string>& prefixes) {
  for (const auto& spec : config::schema()) {
    bool wanted = false;
    for (const auto& prefix : prefixes) wanted = wanted || spec.key.rfind(prefix, 0) == 0;
    if (!wanted) continue;
    std::string help = spec.help;
    if (spec.kind == config::Kind::Choice) {
      help += " {";
      for (std::size_t i = 0; i < spec.choices.size(); ++i) help += (i ? "|" : "") + spec.choices[i];
      help += "}";
    }
    help += " (default: " + (spec.fallback.empty() ? std::string("\"\"") : spec.fallback) + ")";
    const std::size_t dot = spec.key.find('.');
    auto* opt = cmd.add_option("--" + spec.key, flags.values[spec.key], help)
                    ->type_name("")
                    ->group(spec.key.substr(0, dot) + " settings");
    flags.options.emplace_back(spec.key, opt);
  }
}

void apply_key_flags(const KeyFlags& flags, config::Config& c) {
  for (const auto& [key, opt] : flags.options)
    if (opt->count() > 0) c.set(key, flags.values.at(key));
}

const std::vector<std::string> kDataKeys = {"dataset.", "split.", "depth."};
const std::vector<std::string> kFeatureKeys = {"dataset.", "split.", "depth.", "slic.", "lowfeat.", "features.", "bed."};
const std::vector<std::string> kTrainKeys = {"dataset.", "split.", "depth.", "slic.", "lowfeat.", "features.",
                                             "bed.",     "model.", "run.",   "train."};
const std::vector<std::string> kPredictKeys = {"dataset.", "split.", "depth.", "slic.", "lowfeat.", "features.",
                                               "bed.",     "model.", "run.",   "train.", "predict."};
const std::vector<std::string> kAllKeys = {""};

struct Plan {
  std::string command;
  std::vector<std::string> stages;
};

void print_plan(const pipeline::Context& ctx, const Plan& plan) {
  std::cout << "command: " << plan.command << "\n";
  std::cout << "run directory: " << ctx.run_dir.string() << "\n";
  std::cout << "cache: " << (ctx.cache_dir.empty() ? std::string("disabled") : ctx.cache_dir.string()) << "\n";
  std::cout << "jobs: " << ctx.jobs << "\n";
  std::cout << "config hash: " << ctx.config.hash() << "\n";
  std::cout << "stages:\n";
  for (const auto& s : plan.stages) std::cout << "  " << s << "\n";
  std::cout << "config:\n" << ctx.config.canonical();
}

void write_file(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

// Records the effective config and, when a dataset is configured, its split.
void write_run_header(pipeline::Context& ctx, bool with_index) {
  fs::create_directories(ctx.run_dir);
  write_file(ctx.run_dir / "config.txt", ctx.config.canonical());
  ctx.record_output(ctx.run_dir / "config.txt");
  if (with_index) {
    write_file(ctx.run_dir / "index.tsv", dataio::format_index(pipeline::load_index(ctx)));
    ctx.record_output(ctx.run_dir / "index.tsv");
  }
}

model::Network obtain_model(pipeline::Context& ctx, const std::string& model_dir) {
  if (!model_dir.empty()) return model::load_checkpoint(model_dir);
  const fs::path in_run = ctx.run_dir / "model";
  if (fs::exists(in_run / "manifest.txt")) return model::load_checkpoint(in_run);
  if (!ctx.auto_mode) {
    throw Error(ErrorCode::MissingArtifact,
                "no checkpoint: pass --model, train into " + ctx.run_dir.string() + ", or use --auto");
  }
  ctx.note("no checkpoint found, training first");
  return pipeline::run_train(ctx);
}

fs::path dataset_gt(const pipeline::Context& ctx) {
  const std::string root = ctx.config.get("dataset.root");
  if (root.empty()) throw Error(ErrorCode::ConfigError, "dataset.root is not set and --gt was not given");
  return fs::path(root) / "gt";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"RGB-D salient object detection with background enclosure features"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(pipeline::kVersion));
  app.option_defaults()->always_capture_default();

  Globals g;
  auto add_globals = [&](CLI::App& cmd) {
    cmd.add_option("--config", g.config_path, "flat key=value config file")->check(CLI::ExistingFile);
    cmd.add_option("--jobs,-j", g.jobs, "worker threads; 1 is bit-reproducible")->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd.add_option("--seed", g.seed, "sets run.seed");
    cmd.add_flag("--auto", g.auto_mode, "recompute missing upstream artifacts");
    cmd.add_flag("--dry-run", g.dry_run, "print the plan and exit");
    cmd.add_option("--run-dir", g.run_dir, "output directory (default: runs/<timestamp>-<hash>)");
    cmd.add_flag("--no-cache", g.no_cache, "ignore and do not fill the artifact cache");
    cmd.add_flag("--quiet,-q", g.quiet, "suppress progress messages");
    cmd.add_option("--set", g.sets, "extra key=value setting, repeatable");
  };

  KeyFlags flags;
  std::string split = "all";
  auto add_split = [&](CLI::App& cmd) {
    cmd.add_option("--images", split, "images to process: train, val, test or all")
        ->check(CLI::IsMember({"train", "val", "test", "all"}))
        ->capture_default_str();
  };

  auto* synth = app.add_subcommand("synth", "write the synthetic RGB-D fixture");
  std::string synth_out;
  int synth_count = 5;
  std::uint64_t synth_seed = 0;
  synth->add_option("--out", synth_out, "dataset root to create")->required();
  synth->add_option("--count", synth_count, "number of images")->check(CLI::PositiveNumber)->capture_default_str();
  synth->add_option("--fixture-seed", synth_seed, "scene seed")->capture_default_str();

  auto* segment = app.add_subcommand("segment", "SLIC superpixels: label images and boundary overlays");
  add_globals(*segment);
  add_split(*segment);
  add_key_flags(*segment, flags, {"dataset.", "split.", "depth.", "slic."});

  auto* features = app.add_subcommand("features", "per-superpixel feature stacks [K, C, 20, 20]");
  add_globals(*features);
  add_split(*features);
  add_key_flags(*features, flags, kFeatureKeys);

  auto* bed = app.add_subcommand("bed", "background enclosure descriptors and layers");
  add_globals(*bed);
  add_split(*bed);
  bool visualize = false;
  bed->add_flag("--visualize", visualize, "also write one image per descriptor component");
  add_key_flags(*bed, flags, {"dataset.", "split.", "depth.", "slic.", "bed."});

  auto* augment = app.add_subcommand("augment", "materialize the 32x rotated and flipped dataset");
  add_globals(*augment);
  add_split(*augment);
  std::string augment_out;
  augment->add_option("--out", augment_out, "output dataset root (default: <run dir>/augmented)");
  add_key_flags(*augment, flags, kDataKeys);

  auto* train = app.add_subcommand("train", "two-stage training on the train split");
  add_globals(*train);
  add_key_flags(*train, flags, kTrainKeys);

  auto* predict = app.add_subcommand("predict", "saliency maps for predict.split");
  add_globals(*predict);
  std::string model_dir;
  predict->add_option("--model", model_dir, "checkpoint directory (default: <run dir>/model)");
  add_key_flags(*predict, flags, kPredictKeys);

  auto* eval = app.add_subcommand("eval", "precision, recall, F-measure and PR curves");
  add_globals(*eval);
  std::string maps_dir, gt_dir;
  std::vector<std::string> methods;
  std::optional<std::string> beta2;
  eval->add_option("--maps", maps_dir, "saliency maps of a single method (default: <run dir>/predictions)");
  eval->add_option("--method", methods, "name=dir, repeatable; compares several methods");
  eval->add_option("--gt", gt_dir, "ground truth directory (default: <dataset.root>/gt)");
  eval->add_option("--beta2", beta2, "shorthand for --eval.beta2");
  add_key_flags(*eval, flags, {"dataset.", "eval."});

  auto* pipeline_cmd = app.add_subcommand("pipeline", "train, predict and evaluate in one run directory");
  add_globals(*pipeline_cmd);
  add_key_flags(*pipeline_cmd, flags, kAllKeys);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      synth::write_fixture(synth_out, synth_count, synth_seed);
      std::cout << "wrote " << synth_count << " samples to " << synth_out << "\n";
      return 0;
    }

    pipeline::Context ctx;
    if (!g.config_path.empty()) ctx.config.merge_file(g.config_path);
    apply_key_flags(flags, ctx.config);
    for (const auto& s : g.sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::ConfigError, "--set expects key=value, got '" + s + "'");
      ctx.config.set(s.substr(0, eq), s.substr(eq + 1));
    }
    if (g.seed) ctx.config.set("run.seed", std::to_string(*g.seed));
    if (beta2) ctx.config.set("eval.beta2", *beta2);

    ctx.jobs = g.jobs;
    ctx.auto_mode = g.auto_mode;
    ctx.quiet = g.quiet;
    ctx.run_dir = g.run_dir.empty() ? pipeline::default_run_dir(ctx.config) : fs::path(g.run_dir);
    ctx.cache_dir = g.no_cache ? fs::path() : pipeline::default_cache_dir();

    Plan plan;
    CLI::App* active = app.get_subcommands().front();
    plan.command = active->get_name();
    ctx.command = plan.command;
    if (active == segment) plan.stages = {"segment"};
    if (active == features) plan.stages = {"features"};
    if (active == bed) plan.stages = {"bed"};
    if (active == augment) plan.stages = {"augment"};
    if (active == train) plan.stages = {"train"};
    if (active == predict) {
      const bool have = !model_dir.empty() || fs::exists(ctx.run_dir / "model" / "manifest.txt");
      plan.stages = have || !g.auto_mode ? std::vector<std::string>{"predict"}
                                         : std::vector<std::string>{"train", "predict"};
    }
    if (active == eval) {
      const bool have = !maps_dir.empty() || !methods.empty() || fs::is_directory(ctx.run_dir / "predictions");
      plan.stages = {"eval"};
      if (!have && g.auto_mode) plan.stages = {"train (unless a checkpoint exists)", "predict", "eval"};
    }
    if (active == pipeline_cmd) plan.stages = {"train", "predict", "eval"};
    if (g.dry_run) {
      print_plan(ctx, plan);
      return 0;
    }

    const bool uses_dataset = active != eval || !ctx.config.get("dataset.root").empty();
    write_run_header(ctx, uses_dataset);

    if (active == segment) pipeline::run_segment(ctx, split);
    if (active == features) pipeline::run_features(ctx, split);
    if (active == bed) pipeline::run_bed(ctx, split, visualize);
    if (active == augment)
      pipeline::run_augment(ctx, split, augment_out.empty() ? ctx.run_dir / "augmented" : fs::path(augment_out));
    if (active == train) pipeline::run_train(ctx);
    if (active == predict) pipeline::run_predict(ctx, obtain_model(ctx, model_dir));
    if (active == eval) {
      std::vector<pipeline::MethodDir> dirs;
      for (const auto& m : methods) {
        const auto eq = m.find('=');
        if (eq == std::string::npos || eq == 0)
          throw Error(ErrorCode::ConfigError, "--method expects name=dir, got '" + m + "'");
        dirs.push_back({m.substr(0, eq), m.substr(eq + 1)});
      }
      if (!maps_dir.empty()) dirs.push_back({"bedsal", maps_dir});
      if (dirs.empty()) {
        fs::path maps = ctx.run_dir / "predictions";
        if (!fs::is_directory(maps)) {
          if (!g.auto_mode)
            throw Error(ErrorCode::MissingArtifact, "no saliency maps: pass --maps or --method, or use --auto");
          maps = pipeline::run_predict(ctx, obtain_model(ctx, ""));
        }
        dirs.push_back({"bedsal", maps});
      }
      const auto results = pipeline::run_eval(ctx, dirs, gt_dir.empty() ? dataset_gt(ctx) : fs::path(gt_dir));
      if (!g.quiet) std::cout << evalkit::format_table(results);
    }
    if (active == pipeline_cmd) {
      const auto net = pipeline::run_train(ctx);
      const auto maps = pipeline::run_predict(ctx, net);
      const auto results = pipeline::run_eval(ctx, {{"bedsal", maps}}, dataset_gt(ctx));
      if (!g.quiet) std::cout << evalkit::format_table(results);
    }

    pipeline::write_manifest(ctx);
    ctx.note("run directory " + ctx.run_dir.string());
    return 0;
  } catch (const Error& e) {
    std::cerr << "bedsal: " << e.what() << "\n";
    return e.is_validation() ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "bedsal: " << e.what() << "\n";
    return 2;
  }
}
