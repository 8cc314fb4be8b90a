#include <algorithm>
#include <cmath>

#include "bedsal/error.hpp"
#include "bedsal/model.hpp"
#include "bedsal/synth.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace bedsal;
using model::Architecture;
using model::Network;

namespace {

Architecture small_arch(int channels = 4) {
  Architecture a;
  a.channels = channels;
  a.side = 5;
  a.conv1 = 3;
  a.conv2 = 4;
  a.conv3 = 2;
  a.hidden = 6;
  return a;
}

std::vector<double> random_input(Rng& rng, const Architecture& a) {
  std::vector<double> x(a.input_size());
  for (auto& v : x) v = rng.uniform(-1, 1);
  return x;
}

// Perturbs every parameter, biases included, so no unit sits at zero.
void jitter(Network& net, Rng& rng, double amount) {
  for (auto& p : net.params())
    for (auto& v : p.values) v += amount * rng.uniform(-1, 1);
}

// Independent forward pass written directly from the layer definitions.
double reference_forward(const Network& net, const std::vector<double>& input) {
  const auto& a = net.arch();
  const int s = a.side;
  auto conv = [&](const std::vector<double>& in, int cin, const std::string& name, int cout) {
    const auto& w = net.param(name + ".weight").values;
    const auto& b = net.param(name + ".bias").values;
    std::vector<double> out(static_cast<std::size_t>(cout) * s * s);
    for (int o = 0; o < cout; ++o)
      for (int y = 0; y < s; ++y)
        for (int x = 0; x < s; ++x) {
          double acc = b[o];
          for (int i = 0; i < cin; ++i)
            for (int ky = 0; ky < 3; ++ky)
              for (int kx = 0; kx < 3; ++kx) {
                const int yy = y + ky - 1, xx = x + kx - 1;
                if (yy < 0 || xx < 0 || yy >= s || xx >= s) continue;
                acc += w[((o * cin + i) * 3 + ky) * 3 + kx] * in[(i * s + yy) * s + xx];
              }
          out[(o * s + y) * s + x] = std::max(0.0, acc);
        }
    return out;
  };
  auto dense = [&](const std::vector<double>& in, const std::string& name, int out_n, bool relu) {
    const auto& w = net.param(name + ".weight").values;
    const auto& b = net.param(name + ".bias").values;
    std::vector<double> out(out_n);
    for (int o = 0; o < out_n; ++o) {
      double acc = b[o];
      for (std::size_t i = 0; i < in.size(); ++i) acc += w[o * in.size() + i] * in[i];
      out[o] = relu ? std::max(0.0, acc) : acc;
    }
    return out;
  };
  const auto a1 = conv(input, a.channels, "conv1", a.conv1);
  const auto a2 = conv(a1, a.conv1, "conv2", a.conv2);
  const auto a3 = conv(a2, a.conv2, "conv3", a.conv3);
  const auto map = dense(a3, "depth_map", s * s, false);
  const auto hidden = dense(map, "fc1", a.hidden, true);
  const double logit = dense(hidden, "fc2", 1, false)[0];
  return 1.0 / (1.0 + std::exp(-logit));
}

}  // namespace

TEST_CASE("init_network") {
  const auto a = model::init_network(10, 0);
  const auto b = model::init_network(10, 0);
  CHECK(a == b);
  CHECK_FALSE(a == model::init_network(10, 1));
  CHECK(a.param("conv1.weight").dims == std::vector<int>{16, 10, 3, 3});
  CHECK(a.param("depth_map.weight").dims == std::vector<int>{400, 3200});
  CHECK(a.param("fc1.weight").dims == std::vector<int>{100, 400});
  CHECK(a.param("fc2.weight").dims == std::vector<int>{1, 100});
  for (const char* bias : {"conv1.bias", "conv2.bias", "conv3.bias", "depth_map.bias", "fc1.bias", "fc2.bias"})
    for (double v : a.param(bias).values) CHECK(v == 0.0);
  const double limit = std::sqrt(6.0 / (10 * 9 + 16 * 9));
  for (double v : a.param("conv1.weight").values) CHECK(std::abs(v) <= limit);
  CHECK(model::init_network(17, 0).param("conv1.weight").dims[1] == 17);
  CHECK(model::init_network(4, 0).arch().channels == 4);
  try {
    model::init_network(5, 0);
    FAIL("expected BadChannelCount");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::BadChannelCount);
  }
}

TEST_CASE("forward") {
  auto net = model::init_network(10, 0);
  SUBCASE("all-zero input with zero biases gives one half") {
    CHECK(model::forward(net, std::vector<double>(4000, 0.0)) == 0.5);
  }
  SUBCASE("zeroed output layer gives one half") {
    for (auto& v : net.param("fc2.weight").values) v = 0.0;
    Rng rng(1);
    CHECK(model::forward(net, random_input(rng, net.arch())) == 0.5);
  }
  SUBCASE("matches a straight-line reimplementation") {
    Rng rng(2);
    jitter(net, rng, 0.01);
    const auto x = random_input(rng, net.arch());
    const double p = model::forward(net, x);
    CHECK(std::abs(p - reference_forward(net, x)) <= 1e-12);
    CHECK(model::forward(net, x) == p);
    CHECK(p > 0.0);
    CHECK(p < 1.0);
  }
  SUBCASE("wrong input size") {
    CHECK_THROWS_AS(model::forward(net, std::vector<double>(3999)), Error);
  }
}

TEST_CASE("loss") {
  CHECK(model::loss(0.5, 0.5) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(model::loss(0.5, 1.0) == doctest::Approx(0.693147).epsilon(1e-6));
  // -(0.8 log 0.6 + 0.2 log 0.4) = 0.5919186...
  CHECK(model::loss(0.6, 0.8) == doctest::Approx(0.5919186).epsilon(1e-7));
  CHECK(std::isfinite(model::loss(0.0, 1.0)));
  CHECK(std::isfinite(model::loss(1.0, 0.0)));
  for (double target : {0.0, 0.1, 0.37, 0.5, 0.9, 1.0}) {
    double best_p = 0.0, best = 1e300;
    for (int k = 1; k < 1000; ++k) {
      const double p = k / 1000.0;
      const double l = model::loss(p, target);
      CHECK(l >= 0.0);
      if (l < best) {
        best = l;
        best_p = p;
      }
    }
    CHECK(std::abs(best_p - std::clamp(target, 0.001, 0.999)) <= 0.001);
  }
}

TEST_CASE("backward") {
  SUBCASE("output bias gradient is p minus target") {
    Rng rng(3);
    auto net = model::init_network(4, 3, small_arch());
    jitter(net, rng, 0.1);
    const auto x = random_input(rng, net.arch());
    model::Activations act;
    const double p = model::forward(net, x, &act);
    for (double target : {0.0, 0.3, p}) {
      model::Gradients g(net);
      model::backward(net, act, target, g);
      CHECK(g.values.back()[0] == doctest::Approx(p - target).epsilon(1e-15));
    }
  }
  SUBCASE("central differences on small networks") {
    for (int trial = 0; trial < 5; ++trial) {
      Rng rng(100 + trial);
      auto net = model::init_network(trial % 2 ? 10 : 4, trial, small_arch(trial % 2 ? 10 : 4));
      jitter(net, rng, 0.1);
      const auto x = random_input(rng, net.arch());
      const double target = rng.uniform();
      model::Activations act;
      model::forward(net, x, &act);
      model::Gradients g(net);
      model::backward(net, act, target, g);
      double worst = 0.0;
      for (std::size_t k = 0; k < net.params().size(); ++k) {
        auto& values = net.params()[k].values;
        for (std::size_t i = 0; i < values.size(); ++i) {
          const double keep = values[i];
          values[i] = keep + 1e-5;
          const double up = model::loss(model::forward(net, x), target);
          values[i] = keep - 1e-5;
          const double down = model::loss(model::forward(net, x), target);
          values[i] = keep;
          const double numeric = (up - down) / 2e-5, analytic = g.values[k][i];
          worst = std::max(worst, std::abs(analytic - numeric) /
                                      std::max({std::abs(analytic), std::abs(numeric), 1e-8}));
        }
      }
      CHECK(worst <= 1e-4);
    }
  }
  SUBCASE("batched accumulation equals per-example backward") {
    Rng rng(4);
    auto net = model::init_network(4, 4, small_arch());
    jitter(net, rng, 0.1);
    const int n = 70;
    std::vector<double> inputs, targets;
    model::Gradients single(net);
    double total = 0.0;
    for (int e = 0; e < n; ++e) {
      const auto x = random_input(rng, net.arch());
      inputs.insert(inputs.end(), x.begin(), x.end());
      targets.push_back(rng.uniform());
      model::Activations act;
      total += model::loss(model::forward(net, x, &act), targets.back());
      model::backward(net, act, targets.back(), single);
    }
    model::Gradients batched(net);
    const double batch_loss = model::accumulate_batch(net, inputs, targets, batched);
    CHECK(batch_loss == doctest::Approx(total).epsilon(1e-12));
    for (std::size_t k = 0; k < single.values.size(); ++k)
      for (std::size_t i = 0; i < single.values[k].size(); ++i)
        REQUIRE(std::abs(single.values[k][i] - batched.values[k][i]) <=
                1e-12 * std::max(1.0, std::abs(single.values[k][i])));
  }
}

TEST_CASE("adadelta") {
  const model::AdadeltaConfig cfg{0.9, 1e-8};
  SUBCASE("first step closed form") {
    double sg = 0.0, su = 0.0;
    const double d = model::adadelta_delta(1.0, sg, su, cfg);
    CHECK(std::abs(d + 3.16228e-4) <= 1e-9);
    CHECK(d == doctest::Approx(-std::sqrt(1e-8) / std::sqrt(0.1 + 1e-8)).epsilon(1e-15));
    CHECK(sg == doctest::Approx(0.1));
    CHECK(su == doctest::Approx(0.1 * d * d));
  }
  SUBCASE("zero gradient decays the accumulators only") {
    double sg = 2.0, su = 3.0;
    CHECK(model::adadelta_delta(0.0, sg, su, cfg) == 0.0);
    CHECK(sg == doctest::Approx(1.8));
    CHECK(su == doctest::Approx(2.7));
  }
  SUBCASE("group multipliers scale the applied update") {
    auto net = model::init_network(4, 0, small_arch());
    const auto start = net;
    model::Gradients g(net);
    for (auto& v : g.values)
      for (auto& x : v) x = 0.5;
    model::Adadelta plain(net), scaled(net);
    auto a = net, b = net;
    plain.step(a, g, 1.0, {1.0, 1.0});
    scaled.step(b, g, 1.0, {10.0, 1.0});
    for (std::size_t k = 0; k < net.params().size(); ++k) {
      const bool depth = net.params()[k].group == model::Group::Depth;
      for (std::size_t i = 0; i < net.params()[k].values.size(); ++i) {
        const double da = a.params()[k].values[i] - start.params()[k].values[i];
        const double db = b.params()[k].values[i] - start.params()[k].values[i];
        CHECK(db == doctest::Approx(depth ? 10.0 * da : da).epsilon(1e-12));
      }
    }
    CHECK(plain.sq_grad() == scaled.sq_grad());
    CHECK(plain.sq_update() == scaled.sq_update());
  }
  SUBCASE("zero gradients leave parameters unchanged") {
    auto net = model::init_network(4, 0, small_arch());
    const auto start = net;
    model::Adadelta opt(net);
    model::Gradients g(net);
    opt.step(net, g, 0.05, {});
    CHECK(net == start);
  }
}

TEST_CASE("schedules") {
  const model::TrainSchedule s;
  CHECK(s.stage1.rate(0) == 0.05);
  CHECK(s.stage1.rate(9999) == 0.05);
  CHECK(s.stage1.rate(10000) == doctest::Approx(0.005));
  CHECK(s.stage1.rate(49999) == doctest::Approx(0.05 * 1e-4));
  CHECK(s.stage2.rate(999) == 0.01);
  CHECK(s.batch == 1000);
  CHECK(s.multipliers.depth == 10.0);
}

namespace {

// Separable toy task: the target is 1 when the first input channel is bright.
model::ExampleSource toy_source(const Architecture& a, std::size_t count) {
  return {count, [a](std::size_t i, std::span<double> input) {
            Rng rng(i);
            const bool positive = i % 3 == 0;
            for (int c = 0; c < a.channels; ++c)
              for (int k = 0; k < a.side * a.side; ++k)
                input[c * a.side * a.side + k] = c == 0 ? (positive ? 0.9 : 0.1) : rng.uniform();
            return positive ? 1.0 : 0.0;
          }};
}

}  // namespace

TEST_CASE("train") {
  const auto arch = small_arch();
  const auto source = toy_source(arch, 60);
  SUBCASE("zero iterations return the initial network") {
    model::TrainSchedule s;
    s.stage1.iterations = 0;
    s.stage2.iterations = 0;
    const auto net = model::init_network(4, 0, arch);
    CHECK(model::train(net, source, source, s, 0) == net);
  }
  SUBCASE("loss decreases and runs are reproducible") {
    model::TrainSchedule s;
    s.batch = 20;
    s.stage1.iterations = 150;
    s.stage1.decay_every = 0;
    s.stage2.iterations = 50;
    std::vector<model::LogRow> log;
    const auto a = model::train(model::init_network(4, 0, arch), source, source, s, 0, &log);
    const auto b = model::train(model::init_network(4, 0, arch), source, source, s, 0);
    CHECK(a == b);
    REQUIRE(log.size() == 200);
    CHECK(log.front().stage == 1);
    CHECK(log.back().stage == 2);
    CHECK(log.back().loss < log.front().loss);
    CHECK(log.back().loss < 0.5 * log.front().loss);
    const auto csv = model::format_log(log);
    CHECK(csv.rfind("stage,step,lr,loss\n", 0) == 0);
  }
  SUBCASE("parallel chunks agree to rounding") {
    model::TrainSchedule s;
    s.batch = 16;
    s.stage1.iterations = 10;
    s.stage2.iterations = 0;
    const auto a = model::train(model::init_network(4, 0, arch), source, source, s, 0, nullptr, 1);
    const auto b = model::train(model::init_network(4, 0, arch), source, source, s, 0, nullptr, 3);
    for (std::size_t k = 0; k < a.params().size(); ++k)
      for (std::size_t i = 0; i < a.params()[k].values.size(); ++i)
        REQUIRE(std::abs(a.params()[k].values[i] - b.params()[k].values[i]) <= 1e-10);
  }
  SUBCASE("empty sources") {
    CHECK_THROWS_AS(model::train(model::init_network(4, 0, arch), {}, {}, {}, 0), Error);
  }
}

TEST_CASE("predict and paint") {
  const auto part = synth::block_partition(6, 2, 3);
  const std::vector<double> scores = {0.1, 0.9};
  const auto map = model::paint(part, scores);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 6; ++x) CHECK(map.at(x, y) == (x < 3 ? 0.1 : 0.9));

  auto net = model::init_network(4, 0, small_arch());
  for (auto& v : net.param("fc2.weight").values) v = 0.0;
  const auto half = model::predict(net, part, [](int, std::span<double> in) { std::fill(in.begin(), in.end(), 1.0); });
  for (double v : half.data()) CHECK(v == 0.5);

  Rng rng(5);
  jitter(net, rng, 0.1);
  std::vector<std::vector<double>> inputs;
  for (int p = 0; p < part.count; ++p) inputs.push_back(random_input(rng, net.arch()));
  auto fill = [&](int p, std::span<double> in) { std::copy(inputs[p].begin(), inputs[p].end(), in.begin()); };
  const auto out = model::predict(net, part, fill);
  for (int y = 0; y < 2; ++y)
    for (int x = 0; x < 6; ++x) CHECK(out.at(x, y) == model::forward(net, inputs[x / 3]));
}

TEST_CASE("checkpoints round-trip exactly") {
  testing::TempDir dir("ckpt");
  Rng rng(6);
  auto net = model::init_network(10, 7, small_arch(10));
  jitter(net, rng, 0.3);
  model::save_checkpoint(net, dir / "m");
  CHECK(model::load_checkpoint(dir / "m") == net);
  try {
    model::load_checkpoint(dir / "missing");
    FAIL("expected MissingArtifact");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingArtifact);
    CHECK(e.is_validation());
  }
}
