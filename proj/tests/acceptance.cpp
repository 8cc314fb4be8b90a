// Acceptance suite: one PASS/FAIL line per criterion.
//
// Exit status is 0 when every failing criterion is listed with --expect-fail,
// so a documented shortfall does not hide new regressions.

#include <sys/wait.h>

#include <algorithm>
#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bedsal/augment.hpp"
#include "bedsal/bed.hpp"
#include "bedsal/dataio.hpp"
#include "bedsal/evalkit.hpp"
#include "bedsal/lowfeat.hpp"
#include "bedsal/model.hpp"
#include "bedsal/rng.hpp"
#include "bedsal/synth.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace bedsal;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof(buf), f, args);
  va_end(args);
  return buf;
}

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  std::string cli;
  fs::path fixture;
  fs::path work;
};

std::string quote(const std::string& s) {
  std::string out = "'";
  for (char c : s) out += c == '\'' ? std::string("'\\''") : std::string(1, c);
  return out + "'";
}

// Runs the CLI with its own cache directory; output goes to `log`.
int run_cli(const Settings& s, const std::vector<std::string>& args, const fs::path& cache, const fs::path& log) {
  std::string cmd = "BEDSAL_CACHE_DIR=" + quote(cache.string()) + " " + quote(s.cli);
  for (const auto& a : args) cmd += " " + quote(a);
  cmd += " >" + quote(log.string()) + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// F column of the first row of summary.csv.
double summary_f(const fs::path& run) {
  std::istringstream in(read_file(run / "eval" / "summary.csv"));
  std::string header, row;
  std::getline(in, header);
  if (!std::getline(in, row)) return -1.0;
  std::vector<std::string> cells;
  std::stringstream rs(row);
  for (std::string c; std::getline(rs, c, ',');) cells.push_back(c);
  return cells.size() > 3 ? std::stod(cells[3]) : -1.0;
}

std::string tail(const fs::path& log) {
  const auto text = read_file(log);
  return text.size() > 300 ? text.substr(text.size() - 300) : text;
}

// ---------------------------------------------------------------------------

double oracle_slice(double a, double b, int n, const std::function<double(double)>& fn) {
  double sum = 0.0;
  for (int m = 0; m < n; ++m) sum += fn(a + (m + 0.5) * (b - a) / n);
  return sum / n;
}

Outcome bed_oracle() {
  const auto start = Clock::now();
  const bed::Params params;
  double max_df = 0, max_dg = 0, max_dff = 0, max_dgg = 0;
  int pairs = 0, bad_pairs = 0, slices = 0, bad_slices = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto scene = synth::box_scene(seed, 64, 64);
    const double sigma = bed::depth_sigma(scene.stats);
    const double step = bed::resolve_ray_step(scene.part, params);
    for (int p = 0; p < scene.stats.count(); ++p) {
      const bed::RayFan fan(p, scene.part, scene.stats, params.n_dir, step, params.refine);
      const bed::DenseOracle oracle(p, scene.part, scene.stats);
      for (int k = 0; k <= 10; ++k) {
        const double t = sigma * k / 10.0;
        const double df = std::abs(fan.foreground(t) - oracle.foreground(t));
        const double dg = std::abs(fan.opposing_gap(t) - oracle.opposing_gap(t));
        max_df = std::max(max_df, df);
        max_dg = std::max(max_dg, dg);
        ++pairs;
        bad_pairs += df > 0.05 || dg > 0.05;
      }
      const auto d = bed::bed_descriptor(p, scene.stats, scene.part, params);
      for (int s = 0; s < params.q; ++s) {
        const double a = sigma * s / params.q, b = sigma * (s + 1) / params.q;
        const double ff = oracle_slice(a, b, 50, [&](double t) { return oracle.foreground(t); });
        const double gg = oracle_slice(a, b, 50, [&](double t) { return 1.0 - oracle.opposing_gap(t); });
        const double dff = std::abs(d.ff[s] - ff), dgg = std::abs(d.gg[s] - gg);
        max_dff = std::max(max_dff, dff);
        max_dgg = std::max(max_dgg, dgg);
        ++slices;
        bad_slices += dff > 0.05 || dgg > 0.05;
      }
    }
  }
  const double secs = seconds_since(start);
  return {bad_pairs == 0 && bad_slices == 0 && secs < 60.0,
          fmt("max |df| %.4f, |dg| %.4f (%d/%d pairs over 0.05); slices max |dff| %.4f, |dgg| %.4f "
              "(%d/%d over 0.05); %.1f s",
              max_df, max_dg, bad_pairs, pairs, max_dff, max_dgg, bad_slices, slices, secs)};
}

Outcome limit_cases() {
  const bed::Params params;
  auto scene = [](double center, double field) {
    synth::Scene s;
    s.part = synth::block_partition(48, 48, 16);
    s.depth = DepthImage(48, 48);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x) s.depth.at(x, y) = x / 16 == 1 && y / 16 == 1 ? center : field;
    s.stats = slic::compute_stats(s.part, s.depth, RgbImage(48, 48, 3));
    return s;
  };
  const auto enclosed = scene(100.0, 200.0);
  const int center = enclosed.part.labels.at(24, 24);
  const double sigma = bed::depth_sigma(enclosed.stats);
  const auto d = bed::bed_descriptor(center, enclosed.stats, enclosed.part, params);
  double worst = 0.0;
  for (int s = 0; s < params.q; ++s) worst = std::max({worst, std::abs(d.ff[s] - 1.0), std::abs(d.gg[s] - 1.0)});

  const auto flat = scene(128.0, 128.0);
  bool zeros = true;
  for (const auto& fd : bed::bed_descriptors(flat.stats, flat.part, params))
    for (int s = 0; s < params.q; ++s) zeros = zeros && fd.ff[s] == 0.0 && fd.gg[s] == 0.0;
  return {100.0 > sigma && worst <= 1e-6 && zeros,
          fmt("enclosed gap 100 > sigma %.2f, max |ff-1|,|gg-1| %.2e; flat scene all zero: %s", sigma, worst,
              zeros ? "yes" : "no")};
}

Outcome monotonicity() {
  int violations = 0, checks = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto scene = synth::box_scene(1000 + seed);
    const double sigma = bed::depth_sigma(scene.stats);
    const bed::Params params;
    const double step = bed::resolve_ray_step(scene.part, params);
    for (int p = 0; p < scene.stats.count(); ++p) {
      const bed::RayFan fan(p, scene.part, scene.stats, params.n_dir, step, params.refine);
      std::set<int> prev_set;
      double prev_f = 1.0, prev_g = 0.0;
      for (int k = 0; k <= 24; ++k) {
        const double t = 1.2 * sigma * k / 24.0;
        const auto b = bed::background_set(p, t, scene.stats);
        const std::set<int> set(b.begin(), b.end());
        const double f = fan.foreground(t), g = fan.opposing_gap(t);
        if (k > 0) {
          violations += !std::includes(prev_set.begin(), prev_set.end(), set.begin(), set.end());
          violations += f > prev_f;
          violations += g < prev_g;
          checks += 3;
        }
        prev_set = set;
        prev_f = f;
        prev_g = g;
      }
    }
  }
  return {violations == 0, fmt("%d violations in %d nesting/f/g checks over 100 scenes", violations, checks)};
}

// Which ReLU units are active; a change between the two probes means the
// central difference straddles a kink and estimates no derivative.
std::vector<bool> relu_pattern(const model::Activations& a) {
  std::vector<bool> out;
  for (const auto* layer : {&a.a1, &a.a2, &a.a3, &a.hidden})
    for (double v : *layer) out.push_back(v > 0.0);
  return out;
}

Outcome gradient_check() {
  const auto start = Clock::now();
  double worst = 0.0;
  int coords = 0, kinks = 0;
  for (int trial = 0; trial < 10; ++trial) {
    Rng rng(500 + trial);
    auto net = model::init_network(10, trial);
    for (auto& p : net.params())
      for (auto& v : p.values) v += 0.01 * rng.uniform(-1, 1);
    std::vector<double> x(net.arch().input_size());
    for (auto& v : x) v = rng.uniform();
    const double target = rng.uniform();
    model::Activations act;
    model::forward(net, x, &act);
    model::Gradients g(net);
    model::backward(net, act, target, g);
    // Every coordinate of small tensors; 24 random ones of larger tensors.
    for (std::size_t k = 0; k < net.params().size(); ++k) {
      auto& values = net.params()[k].values;
      const std::size_t n = std::min<std::size_t>(values.size(), 24);
      for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = values.size() <= 24 ? j : rng.below(values.size());
        const double keep = values[i];
        model::Activations up_act, down_act;
        values[i] = keep + 1e-5;
        const double up = model::loss(model::forward(net, x, &up_act), target);
        values[i] = keep - 1e-5;
        const double down = model::loss(model::forward(net, x, &down_act), target);
        values[i] = keep;
        if (relu_pattern(up_act) != relu_pattern(down_act)) {
          ++kinks;
          continue;
        }
        const double numeric = (up - down) / 2e-5, analytic = g.values[k][i];
        worst = std::max(worst, std::abs(analytic - numeric) /
                                    std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
        ++coords;
      }
    }
  }
  const double secs = seconds_since(start);
  return {worst <= 1e-4 && secs < 30.0,
          fmt("max relative error %.2e over %d coordinates of 10 full-size networks (%d straddling a "
              "ReLU kink excluded), %.1f s",
              worst, coords, kinks, secs)};
}

Outcome adadelta() {
  double sg = 0.0, su = 0.0;
  const double d = model::adadelta_delta(1.0, sg, su, {0.9, 1e-8});
  return {std::abs(d + 3.16228e-4) <= 1e-9, fmt("delta %.9e", d)};
}

Outcome metric_identities() {
  int failures = 0;
  Rng rng(7);
  for (int i = 0; i < 100; ++i) {
    DepthHistogram x{}, y{};
    double total = 0.0;
    for (int b = 0; b < kHistBins; ++b) {
      const double v = rng.range(0, 40);
      (b % 2 ? x : y)[b] = v;
      total += v;
    }
    failures += lowfeat::chi_square(x, x) != 0.0;
    failures += lowfeat::chi_square(x, y) != total / 2.0;
    const double v = rng.uniform();
    failures += std::abs(evalkit::f_measure(v, v) - v) > 1e-12;
    failures += std::abs(evalkit::f_measure(v, v, 0.09) - v) > 1e-12;
  }
  std::set<std::string> suffixes;
  for (const auto& s : augment::all_specs()) suffixes.insert(s.suffix());
  failures += suffixes.size() != 32;
  failures += augment::augmented_count(600) != 19200;
  failures += augment::augmented_count(1200) != 38400;
  return {failures == 0, fmt("%d identity failures (chi-square, f_measure, 32 specs, 19200, 38400)", failures)};
}

// ---------------------------------------------------------------------------

std::vector<std::string> fixture_args(const Settings& s, const fs::path& run) {
  return {"pipeline",       "--config", (s.fixture.parent_path().parent_path() / "configs" / "fixture.conf").string(),
          "--set",          "dataset.root=" + s.fixture.string(),
          "--run-dir",      run.string(),
          "--jobs",         "1",
          "--seed",         "0",
          "--quiet"};
}

struct FixtureRun {
  int exit = -1;
  double seconds = 0.0;
  double f = -1.0;
  fs::path run;
  fs::path log;
};

FixtureRun run_fixture(const Settings& s, const std::string& tag, const std::vector<std::string>& extra = {}) {
  FixtureRun r;
  r.run = s.work / ("run-" + tag);
  r.log = s.work / ("run-" + tag + ".log");
  fs::remove_all(r.run);
  fs::remove_all(s.work / ("cache-" + tag));
  auto args = fixture_args(s, r.run);
  args.insert(args.end(), extra.begin(), extra.end());
  const auto start = Clock::now();
  r.exit = run_cli(s, args, s.work / ("cache-" + tag), r.log);
  r.seconds = seconds_since(start);
  if (r.exit == 0) r.f = summary_f(r.run);
  return r;
}

std::string describe_failure(const FixtureRun& r) {
  return fmt("pipeline exited %d: ", r.exit) + tail(r.log);
}

// Every file byte-identical; manifest.json compared without its timing.
std::string compare_runs(const fs::path& a, const fs::path& b) {
  std::vector<std::string> fa, fb;
  for (const auto& e : fs::recursive_directory_iterator(a))
    if (e.is_regular_file()) fa.push_back(fs::relative(e.path(), a).string());
  for (const auto& e : fs::recursive_directory_iterator(b))
    if (e.is_regular_file()) fb.push_back(fs::relative(e.path(), b).string());
  std::sort(fa.begin(), fa.end());
  std::sort(fb.begin(), fb.end());
  if (fa != fb) return fmt("file lists differ (%zu vs %zu files)", fa.size(), fb.size());
  for (const auto& rel : fa) {
    auto x = read_file(a / rel), y = read_file(b / rel);
    if (rel == "manifest.json") {
      auto jx = nlohmann::json::parse(x), jy = nlohmann::json::parse(y);
      jx.erase("timing");
      jy.erase("timing");
      x = jx.dump();
      y = jy.dump();
    }
    if (x != y) return rel + " differs";
  }
  return fmt("%zu files identical", fa.size());
}

// Dataset in the documented layout: JPEG color, 16-bit PNG depth, PNG masks,
// arbitrary ids, Kinect-sized frames.
Outcome user_layout(const Settings& s) {
  const fs::path root = s.work / "user-dataset";
  fs::remove_all(root);
  synth::write_fixture(root / "raw", 4, 11, 640, 480);
  fs::create_directories(root / "rgb");
  fs::create_directories(root / "depth");
  fs::create_directories(root / "gt");
  const char* ids[] = {"1_02-32-37", "1_02-35-10", "7_09-47-00", "11_11-02-55"};
  for (int i = 0; i < 4; ++i) {
    const std::string stem = fmt("%04d", i + 1);
    dataio::save_rgb(dataio::load_rgb(root / "raw" / "rgb" / (stem + ".png")), root / "rgb" / (std::string(ids[i]) + ".jpg"));
    fs::copy_file(root / "raw" / "depth" / (stem + ".png"), root / "depth" / (std::string(ids[i]) + ".png"));
    fs::copy_file(root / "raw" / "gt" / (stem + ".png"), root / "gt" / (std::string(ids[i]) + ".png"));
  }
  fs::remove_all(root / "raw");

  const fs::path run = s.work / "run-user";
  fs::remove_all(run);
  const fs::path log = s.work / "run-user.log";
  const int exit = run_cli(s,
                           {"pipeline", "--set", "dataset.root=" + root.string(), "--split.train", "3", "--split.test",
                            "1", "--train.batch", "50", "--train.stage1.iterations", "30",
                            "--train.stage2.iterations", "10", "--run-dir", run.string(), "--jobs", "1"},
                           s.work / "cache-user", log);
  if (exit != 0) return {false, fmt("pipeline exited %d: ", exit) + tail(log)};
  const auto summary = read_file(run / "eval" / "summary.csv");
  const auto curve = read_file(run / "eval" / "pr_curve.csv");
  const auto stdout_text = read_file(log);
  const bool ok = summary.rfind("method,precision,recall,f,mode,beta2\n", 0) == 0 &&
                  std::count(summary.begin(), summary.end(), '\n') == 2 &&
                  std::count(curve.begin(), curve.end(), '\n') == 257 &&
                  stdout_text.find("Precision") != std::string::npos && fs::exists(run / "manifest.json");
  return {ok, fmt("4 images (jpg color, 16-bit depth), test F %.4f; summary.csv, pr_curve.csv, table %s",
                  summary_f(run), ok ? "written" : "missing or malformed")};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance criteria"};
  Settings s;
  std::vector<std::string> expect_fail, only;
  app.add_option("--cli", s.cli, "bedsal executable")->required();
  app.add_option("--fixture", s.fixture, "bundled fixture dataset")->required();
  app.add_option("--work", s.work, "scratch directory (default: a fresh temporary directory)");
  app.add_option("--expect-fail", expect_fail, "criteria known to fail");
  app.add_option("--only", only, "run only these criteria");
  CLI11_PARSE(app, argc, argv);

  s.fixture = fs::absolute(s.fixture);
  s.cli = fs::absolute(s.cli).string();
  const bool own_work = s.work.empty();
  if (own_work) s.work = fs::temp_directory_path() / fmt("bedsal-acceptance-%u", std::random_device{}());
  fs::create_directories(s.work);
  s.work = fs::absolute(s.work);

  FixtureRun first;
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"bed_oracle", bed_oracle},
      {"limit_cases", limit_cases},
      {"monotonicity", monotonicity},
      {"gradient_check", gradient_check},
      {"adadelta", adadelta},
      {"overfit",
       [&] {
         first = run_fixture(s, "a");
         if (first.exit != 0) return Outcome{false, describe_failure(first)};
         return Outcome{first.f >= 0.95 && first.seconds < 300.0,
                        fmt("train F %.4f (best threshold), %.1f s cold", first.f, first.seconds)};
       }},
      {"ablation",
       [&] {
         if (first.exit != 0) first = run_fixture(s, "a");
         const auto no_bed = run_fixture(s, "c4", {"--features.bed", "false"});
         if (first.exit != 0) return Outcome{false, describe_failure(first)};
         if (no_bed.exit != 0) return Outcome{false, describe_failure(no_bed)};
         return Outcome{first.f >= no_bed.f - 0.01, fmt("C=10 F %.4f, C=4 F %.4f", first.f, no_bed.f)};
       }},
      {"metric_identities", metric_identities},
      {"determinism",
       [&] {
         if (first.exit != 0) first = run_fixture(s, "a");
         const auto second = run_fixture(s, "b");
         if (first.exit != 0) return Outcome{false, describe_failure(first)};
         if (second.exit != 0) return Outcome{false, describe_failure(second)};
         const auto verdict = compare_runs(first.run, second.run);
         return Outcome{verdict.find("identical") != std::string::npos, "two cold runs: " + verdict};
       }},
      {"user_layout", [&] { return user_layout(s); }},
  };

  std::vector<std::string> failed;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
    if (!o.pass) failed.push_back(name);
  }
  if (own_work) fs::remove_all(s.work);

  int unexpected = 0;
  for (const auto& name : failed) {
    if (std::find(expect_fail.begin(), expect_fail.end(), name) != expect_fail.end()) {
      std::cout << "known failure: " << name << " (documented in README)" << std::endl;
    } else {
      ++unexpected;
    }
  }
  return unexpected == 0 ? 0 : 1;
}
