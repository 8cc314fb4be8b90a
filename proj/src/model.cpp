#include "bedsal/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>
#include <utility>

#include "bedsal/error.hpp"
#include "bedsal/rng.hpp"
#include "bedsal/tensor_file.hpp"

namespace bedsal::model {

namespace {

// Parameter order is fixed; the indices below address Network::params().
enum Index { kC1W, kC1B, kC2W, kC2B, kC3W, kC3B, kDW, kDB, kF1W, kF1B, kF2W, kF2B, kCount };

// Four independent partial sums; fixed order, so still deterministic.
double dot(const double* a, const double* b, int n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Column k = (c, ky, kx) holds input channel c shifted by (ky-1, kx-1), zero
// outside the image.
void im2col(const double* in, int cin, int side, std::vector<double>& col) {
  const int n = side * side;
  col.assign(static_cast<std::size_t>(cin) * 9 * n, 0.0);
  for (int c = 0; c < cin; ++c) {
    const double* src = in + static_cast<std::size_t>(c) * n;
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      const int y0 = std::max(0, -dy), y1 = std::min(side, side - dy);
      for (int kx = 0; kx < 3; ++kx) {
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(side, side - dx);
        double* dst = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * n;
        for (int y = y0; y < y1; ++y)
          std::copy(src + (y + dy) * side + x0 + dx, src + (y + dy) * side + x1 + dx, dst + y * side + x0);
      }
    }
  }
}

// Inverse of im2col: adds every column back onto the input positions it read.
void col2im(const std::vector<double>& col, int cin, int side, double* out) {
  const int n = side * side;
  for (int c = 0; c < cin; ++c) {
    double* dst = out + static_cast<std::size_t>(c) * n;
    for (int ky = 0; ky < 3; ++ky) {
      const int dy = ky - 1;
      const int y0 = std::max(0, -dy), y1 = std::min(side, side - dy);
      for (int kx = 0; kx < 3; ++kx) {
        const int dx = kx - 1;
        const int x0 = std::max(0, -dx), x1 = std::min(side, side - dx);
        const double* src = col.data() + (static_cast<std::size_t>(c) * 9 + ky * 3 + kx) * n;
        for (int y = y0; y < y1; ++y) {
          double* drow = dst + (y + dy) * side + dx;
          const double* srow = src + y * side;
          for (int x = x0; x < x1; ++x) drow[x] += srow[x];
        }
      }
    }
  }
}

void axpy(double a, const double* x, double* y, int n) {
  for (int i = 0; i < n; ++i) y[i] += a * x[i];
}

// 3x3 convolution, stride 1, zero padding 1.
void conv_forward(const double* in, int cin, int side, const double* w, const double* b, int cout,
                  double* out) {
  const int n = side * side;
  for (int o = 0; o < cout; ++o) {
    double* dst = out + static_cast<std::size_t>(o) * n;
    std::fill(dst, dst + n, b[o]);
    for (int c = 0; c < cin; ++c) {
      const double* src = in + static_cast<std::size_t>(c) * n;
      const double* k = w + (static_cast<std::size_t>(o) * cin + c) * 9;
      for (int ky = 0; ky < 3; ++ky) {
        const int dy = ky - 1;
        const int y0 = std::max(0, -dy), y1 = std::min(side, side - dy);
        for (int kx = 0; kx < 3; ++kx) {
          const int dx = kx - 1;
          const int x0 = std::max(0, -dx), x1 = std::min(side, side - dx);
          const double wv = k[ky * 3 + kx];
          for (int y = y0; y < y1; ++y) axpy(wv, src + (y + dy) * side + x0 + dx, dst + y * side + x0, x1 - x0);
        }
      }
    }
  }
}

// dz: gradient at the pre-activation output. Accumulates dw, db and, when
// din is non-null, the input gradient.
void conv_backward(const double* in, int cin, int side, const double* w, const double* dz, int cout,
                   double* dw, double* db, double* din) {
  const int n = side * side;
  const int k = cin * 9;
  std::vector<double> col;
  im2col(in, cin, side, col);
  std::vector<double> dcol(din ? col.size() : 0, 0.0);
  for (int o = 0; o < cout; ++o) {
    const double* g = dz + static_cast<std::size_t>(o) * n;
    double bsum = 0.0;
    for (int i = 0; i < n; ++i) bsum += g[i];
    db[o] += bsum;
    const double* wo = w + static_cast<std::size_t>(o) * k;
    double* dwo = dw + static_cast<std::size_t>(o) * k;
    for (int j = 0; j < k; ++j) {
      dwo[j] += dot(g, col.data() + static_cast<std::size_t>(j) * n, n);
      if (din) axpy(wo[j], g, dcol.data() + static_cast<std::size_t>(j) * n, n);
    }
  }
  if (din) col2im(dcol, cin, side, din);
}

void relu(std::vector<double>& v) {
  for (double& x : v) x = x > 0.0 ? x : 0.0;
}

// out = W in + b with W rows x cols.
void linear_forward(const double* w, const double* b, const double* in, int rows, int cols, double* out) {
  for (int r = 0; r < rows; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    out[r] = dot(wr, in, cols) + b[r];
  }
}

void linear_backward(const double* w, const double* in, const double* dout, int rows, int cols, double* dw,
                     double* db, double* din) {
  for (int r = 0; r < rows; ++r) {
    const double g = dout[r];
    db[r] += g;
    if (g == 0.0) continue;
    double* dwr = dw + static_cast<std::size_t>(r) * cols;
    const double* wr = w + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) dwr[c] += g * in[c];
    if (din)
      for (int c = 0; c < cols; ++c) din[c] += g * wr[c];
  }
}

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::size_t product(const std::vector<int>& dims) {
  std::size_t n = 1;
  for (int d : dims) n *= static_cast<std::size_t>(d);
  return n;
}

}  // namespace

Network::Network(const Architecture& a) : arch_(a) {
  if (a.channels <= 0 || a.side <= 0 || a.conv1 <= 0 || a.conv2 <= 0 || a.conv3 <= 0 || a.hidden <= 0)
    throw Error(ErrorCode::ShapeMismatch, "all layer sizes must be positive");
  const int cells = a.side * a.side;
  auto add = [&](std::string name, std::vector<int> dims, Group g) {
    const std::size_t n = product(dims);
    params_.push_back({std::move(name), std::move(dims), g, std::vector<double>(n, 0.0)});
  };
  add("conv1.weight", {a.conv1, a.channels, 3, 3}, Group::Depth);
  add("conv1.bias", {a.conv1}, Group::Depth);
  add("conv2.weight", {a.conv2, a.conv1, 3, 3}, Group::Depth);
  add("conv2.bias", {a.conv2}, Group::Depth);
  add("conv3.weight", {a.conv3, a.conv2, 3, 3}, Group::Depth);
  add("conv3.bias", {a.conv3}, Group::Depth);
  add("depth_map.weight", {cells, a.conv3 * cells}, Group::Depth);
  add("depth_map.bias", {cells}, Group::Depth);
  add("fc1.weight", {a.hidden, cells}, Group::Fusion);
  add("fc1.bias", {a.hidden}, Group::Fusion);
  add("fc2.weight", {1, a.hidden}, Group::Fusion);
  add("fc2.bias", {1}, Group::Fusion);
}

const Parameter& Network::param(const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw Error(ErrorCode::ShapeMismatch, "no parameter named " + name);
}

Parameter& Network::param(const std::string& name) {
  return const_cast<Parameter&>(std::as_const(*this).param(name));
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.values.size();
  return n;
}

bool valid_channel_count(int channels) {
  return channels == 4 || channels == 10 || channels == 11 || channels == 17;
}

Network init_network(int channels, std::uint64_t seed, Architecture arch) {
  if (!valid_channel_count(channels))
    throw Error(ErrorCode::BadChannelCount,
                "network input must have 4, 10, 11 or 17 channels, got " + std::to_string(channels));
  arch.channels = channels;
  Network net(arch);
  Rng rng(seed);
  for (auto& p : net.params()) {
    if (p.dims.size() < 2) continue;  // biases stay zero
    double fan_in = 1.0, fan_out = p.dims[0];
    for (std::size_t i = 1; i < p.dims.size(); ++i) fan_in *= p.dims[i];
    if (p.dims.size() == 4) fan_out *= p.dims[2] * p.dims[3];
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    for (double& v : p.values) v = rng.uniform(-limit, limit);
  }
  return net;
}

namespace {

void check_input(const Architecture& a, std::size_t size) {
  if (static_cast<int>(size) != a.input_size())
    throw Error(ErrorCode::ShapeMismatch, "network expects " + std::to_string(a.input_size()) +
                                              " inputs, got " + std::to_string(size));
}

// Convolutions from act.input to act.a3.
void forward_convs(const Network& net, Activations& act) {
  const Architecture& a = net.arch();
  const auto& P = net.params();
  const int cells = a.side * a.side;
  act.a1.resize(static_cast<std::size_t>(a.conv1) * cells);
  act.a2.resize(static_cast<std::size_t>(a.conv2) * cells);
  act.a3.resize(static_cast<std::size_t>(a.conv3) * cells);
  conv_forward(act.input.data(), a.channels, a.side, P[kC1W].values.data(), P[kC1B].values.data(), a.conv1,
               act.a1.data());
  relu(act.a1);
  conv_forward(act.a1.data(), a.conv1, a.side, P[kC2W].values.data(), P[kC2B].values.data(), a.conv2,
               act.a2.data());
  relu(act.a2);
  conv_forward(act.a2.data(), a.conv2, a.side, P[kC3W].values.data(), P[kC3B].values.data(), a.conv3,
               act.a3.data());
  relu(act.a3);
}

// Fully connected layers from act.map to act.p.
void forward_fusion(const Network& net, Activations& act) {
  const Architecture& a = net.arch();
  const auto& P = net.params();
  act.hidden.resize(a.hidden);
  linear_forward(P[kF1W].values.data(), P[kF1B].values.data(), act.map.data(), a.hidden, a.side * a.side,
                 act.hidden.data());
  relu(act.hidden);
  linear_forward(P[kF2W].values.data(), P[kF2B].values.data(), act.hidden.data(), 1, a.hidden, &act.logit);
  act.p = logistic(act.logit);
}

// Gradient at act.map, accumulating fusion-layer gradients.
std::vector<double> backward_fusion(const Network& net, const Activations& act, double target,
                                    Gradients& grads) {
  const Architecture& a = net.arch();
  const auto& P = net.params();
  auto& G = grads.values;
  const double dlogit = act.p - target;
  std::vector<double> dhidden(a.hidden, 0.0);
  linear_backward(P[kF2W].values.data(), act.hidden.data(), &dlogit, 1, a.hidden, G[kF2W].data(),
                  G[kF2B].data(), dhidden.data());
  for (int i = 0; i < a.hidden; ++i)
    if (act.hidden[i] <= 0.0) dhidden[i] = 0.0;
  std::vector<double> dmap(a.side * a.side, 0.0);
  linear_backward(P[kF1W].values.data(), act.map.data(), dhidden.data(), a.hidden, a.side * a.side,
                  G[kF1W].data(), G[kF1B].data(), dmap.data());
  return dmap;
}

void mask_relu(std::vector<double>& grad, const std::vector<double>& activation) {
  for (std::size_t i = 0; i < grad.size(); ++i)
    if (activation[i] <= 0.0) grad[i] = 0.0;
}

// da3 is the gradient at the post-ReLU conv3 output.
void backward_convs(const Network& net, const Activations& act, std::vector<double> da3, Gradients& grads) {
  const Architecture& a = net.arch();
  const auto& P = net.params();
  auto& G = grads.values;
  mask_relu(da3, act.a3);
  std::vector<double> da2(act.a2.size(), 0.0);
  conv_backward(act.a2.data(), a.conv2, a.side, P[kC3W].values.data(), da3.data(), a.conv3, G[kC3W].data(),
                G[kC3B].data(), da2.data());
  mask_relu(da2, act.a2);
  std::vector<double> da1(act.a1.size(), 0.0);
  conv_backward(act.a1.data(), a.conv1, a.side, P[kC2W].values.data(), da2.data(), a.conv2, G[kC2W].data(),
                G[kC2B].data(), da1.data());
  mask_relu(da1, act.a1);
  conv_backward(act.input.data(), a.channels, a.side, P[kC1W].values.data(), da1.data(), a.conv1,
                G[kC1W].data(), G[kC1B].data(), nullptr);
}

}  // namespace

double forward(const Network& net, std::span<const double> input, Activations* cache) {
  const Architecture& a = net.arch();
  check_input(a, input.size());
  const auto& P = net.params();
  const int cells = a.side * a.side;
  Activations local;
  Activations& act = cache ? *cache : local;
  act.input.assign(input.begin(), input.end());
  forward_convs(net, act);
  act.map.resize(cells);
  linear_forward(P[kDW].values.data(), P[kDB].values.data(), act.a3.data(), cells, a.conv3 * cells,
                 act.map.data());
  forward_fusion(net, act);
  return act.p;
}

double loss(double p, double target) {
  const double pc = std::clamp(p, kProbabilityClamp, 1.0 - kProbabilityClamp);
  return -(target * std::log(pc) + (1.0 - target) * std::log(1.0 - pc));
}

Gradients::Gradients(const Network& net) {
  for (const auto& p : net.params()) values.emplace_back(p.values.size(), 0.0);
}

void Gradients::zero() {
  for (auto& v : values) std::fill(v.begin(), v.end(), 0.0);
}

void Gradients::add(const Gradients& other) {
  for (std::size_t i = 0; i < values.size(); ++i)
    for (std::size_t j = 0; j < values[i].size(); ++j) values[i][j] += other.values[i][j];
}

void Gradients::scale(double factor) {
  for (auto& v : values)
    for (double& x : v) x *= factor;
}

void backward(const Network& net, const Activations& act, double target, Gradients& grads) {
  const Architecture& a = net.arch();
  const int cells = a.side * a.side;
  const std::vector<double> dmap = backward_fusion(net, act, target, grads);
  std::vector<double> da3(act.a3.size(), 0.0);
  linear_backward(net.params()[kDW].values.data(), act.a3.data(), dmap.data(), cells, a.conv3 * cells,
                  grads.values[kDW].data(), grads.values[kDB].data(), da3.data());
  backward_convs(net, act, std::move(da3), grads);
}

double accumulate_batch(const Network& net, std::span<const double> inputs, std::span<const double> targets,
                        Gradients& grads) {
  const Architecture& a = net.arch();
  const std::size_t n = targets.size();
  check_input(a, n == 0 ? 0 : inputs.size() / n);
  if (inputs.size() != n * a.input_size())
    throw Error(ErrorCode::ShapeMismatch, "batch inputs do not match targets");
  const auto& P = net.params();
  const int cells = a.side * a.side;
  const int width = a.conv3 * cells;
  const double* w = P[kDW].values.data();
  const double* b = P[kDB].values.data();

  std::vector<Activations> acts(n);
  for (std::size_t s = 0; s < n; ++s) {
    const auto in = inputs.subspan(s * a.input_size(), a.input_size());
    acts[s].input.assign(in.begin(), in.end());
    forward_convs(net, acts[s]);
    acts[s].map.resize(cells);
  }
  // Each weight row is reused across the whole block.
  for (int r = 0; r < cells; ++r) {
    const double* wr = w + static_cast<std::size_t>(r) * width;
    for (std::size_t s = 0; s < n; ++s) {
      acts[s].map[r] = dot(wr, acts[s].a3.data(), width) + b[r];
    }
  }

  double total = 0.0;
  std::vector<std::vector<double>> dmap(n);
  for (std::size_t s = 0; s < n; ++s) {
    forward_fusion(net, acts[s]);
    total += loss(acts[s].p, targets[s]);
    dmap[s] = backward_fusion(net, acts[s], targets[s], grads);
  }

  std::vector<std::vector<double>> da3(n, std::vector<double>(width, 0.0));
  double* dw = grads.values[kDW].data();
  double* db = grads.values[kDB].data();
  for (int r = 0; r < cells; ++r) {
    double* dwr = dw + static_cast<std::size_t>(r) * width;
    const double* wr = w + static_cast<std::size_t>(r) * width;
    for (std::size_t s = 0; s < n; ++s) {
      const double g = dmap[s][r];
      db[r] += g;
      if (g == 0.0) continue;
      const double* x = acts[s].a3.data();
      double* dx = da3[s].data();
      for (int c = 0; c < width; ++c) {
        dwr[c] += g * x[c];
        dx[c] += g * wr[c];
      }
    }
  }
  for (std::size_t s = 0; s < n; ++s) backward_convs(net, acts[s], std::move(da3[s]), grads);
  return total;
}

double adadelta_delta(double grad, double& sq_grad, double& sq_update, const AdadeltaConfig& c) {
  sq_grad = c.rho * sq_grad + (1.0 - c.rho) * grad * grad;
  const double delta = -(std::sqrt(sq_update + c.epsilon) / std::sqrt(sq_grad + c.epsilon)) * grad;
  sq_update = c.rho * sq_update + (1.0 - c.rho) * delta * delta;
  return delta;
}

Adadelta::Adadelta(const Network& net, AdadeltaConfig config) : config_(config) {
  for (const auto& p : net.params()) {
    sq_grad_.emplace_back(p.values.size(), 0.0);
    sq_update_.emplace_back(p.values.size(), 0.0);
  }
}

void Adadelta::step(Network& net, const Gradients& grads, double base_lr, const GroupMultipliers& mult) {
  auto& params = net.params();
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double lr = base_lr * (params[i].group == Group::Depth ? mult.depth : mult.fusion);
    auto& values = params[i].values;
    const auto& g = grads.values[i];
    for (std::size_t j = 0; j < values.size(); ++j)
      values[j] += lr * adadelta_delta(g[j], sq_grad_[i][j], sq_update_[i][j], config_);
  }
}

double StageSchedule::rate(int step) const {
  if (decay_every <= 0) return base_lr;
  return base_lr * std::pow(decay, step / decay_every);
}

namespace {

constexpr std::size_t kBlock = 32;

// Accumulates gradients and summed loss over examples [begin, end) of `picks`.
double accumulate(const Network& net, const ExampleSource& source, const std::vector<std::size_t>& picks,
                  std::size_t begin, std::size_t end, Gradients& grads) {
  const std::size_t size = net.arch().input_size();
  std::vector<double> inputs(kBlock * size);
  std::vector<double> targets(kBlock);
  double total = 0.0;
  for (std::size_t i = begin; i < end; i += kBlock) {
    const std::size_t n = std::min(kBlock, end - i);
    for (std::size_t s = 0; s < n; ++s)
      targets[s] = source.fill(picks[i + s], std::span<double>(inputs).subspan(s * size, size));
    total += accumulate_batch(net, std::span<const double>(inputs).first(n * size),
                              std::span<const double>(targets).first(n), grads);
  }
  return total;
}

void run_stage(Network& net, Adadelta& opt, const ExampleSource& source, const StageSchedule& stage,
               const TrainSchedule& schedule, int stage_id, Rng& rng, std::vector<LogRow>* log, int jobs) {
  if (stage.iterations <= 0) return;
  const std::size_t batch = static_cast<std::size_t>(std::max(1, schedule.batch));
  const int chunks = std::max(1, std::min<int>(jobs, static_cast<int>(batch)));
  std::vector<Gradients> partial(chunks, Gradients(net));
  std::vector<double> losses(chunks, 0.0);
  std::vector<std::size_t> picks(batch);

  for (int step = 0; step < stage.iterations; ++step) {
    for (auto& p : picks) p = rng.below(source.count);
    for (auto& g : partial) g.zero();
    auto work = [&](int c) {
      const std::size_t begin = batch * c / chunks, end = batch * (c + 1) / chunks;
      losses[c] = accumulate(net, source, picks, begin, end, partial[c]);
    };
    if (chunks == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (int c = 1; c < chunks; ++c) threads.emplace_back(work, c);
      work(0);
      for (auto& t : threads) t.join();
    }
    double total = losses[0];
    for (int c = 1; c < chunks; ++c) {
      partial[0].add(partial[c]);
      total += losses[c];
    }
    partial[0].scale(1.0 / static_cast<double>(batch));
    const double lr = stage.rate(step);
    opt.step(net, partial[0], lr, schedule.multipliers);
    if (log) log->push_back({stage_id, step, lr, total / static_cast<double>(batch)});
  }
}

}  // namespace

Network train(Network net, const ExampleSource& augmented, const ExampleSource& originals,
              const TrainSchedule& schedule, std::uint64_t seed, std::vector<LogRow>* log, int jobs) {
  if (originals.count == 0 && augmented.count == 0)
    throw Error(ErrorCode::EmptyTrainSet, "no training examples");
  const ExampleSource& first = augmented.count > 0 ? augmented : originals;
  const ExampleSource& second = originals.count > 0 ? originals : augmented;
  Rng rng(seed);
  Adadelta opt(net, schedule.adadelta);
  run_stage(net, opt, first, schedule.stage1, schedule, 1, rng, log, jobs);
  run_stage(net, opt, second, schedule.stage2, schedule, 2, rng, log, jobs);
  return net;
}

std::string format_log(const std::vector<LogRow>& log) {
  std::ostringstream out;
  out.precision(17);
  out << "stage,step,lr,loss\n";
  for (const auto& r : log) out << r.stage << ',' << r.step << ',' << r.lr << ',' << r.loss << '\n';
  return out.str();
}

SaliencyMap paint(const slic::Partition& part, std::span<const double> scores) {
  if (static_cast<int>(scores.size()) != part.count)
    throw Error(ErrorCode::ShapeMismatch, "one score per superpixel required");
  SaliencyMap map(part.labels.width(), part.labels.height());
  for (std::size_t i = 0; i < map.data().size(); ++i) map.data()[i] = scores[part.labels.data()[i]];
  return map;
}

std::vector<double> score_superpixels(const Network& net, int count,
                                      const std::function<void(int, std::span<double>)>& fill) {
  std::vector<double> input(net.arch().input_size());
  std::vector<double> scores(count);
  for (int p = 0; p < count; ++p) {
    fill(p, input);
    scores[p] = forward(net, input);
  }
  return scores;
}

SaliencyMap predict(const Network& net, const slic::Partition& part,
                    const std::function<void(int, std::span<double>)>& fill) {
  return paint(part, score_superpixels(net, part.count, fill));
}

namespace {

constexpr const char* kCheckpointMagic = "bedsal-checkpoint 1";

const char* group_name(Group g) { return g == Group::Depth ? "depth" : "fusion"; }

}  // namespace

void save_checkpoint(const Network& net, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const Architecture& a = net.arch();
  std::ostringstream manifest;
  manifest << kCheckpointMagic << '\n'
           << "architecture channels=" << a.channels << " side=" << a.side << " conv1=" << a.conv1
           << " conv2=" << a.conv2 << " conv3=" << a.conv3 << " hidden=" << a.hidden << '\n';
  for (const auto& p : net.params()) {
    std::vector<std::uint32_t> dims(p.dims.begin(), p.dims.end());
    tensor::write_tensor_f64(dims, p.values, dir / (p.name + ".bstn"));
    manifest << "param " << p.name << ' ' << group_name(p.group);
    for (int d : p.dims) manifest << ' ' << d;
    manifest << '\n';
  }
  std::ofstream out(dir / "manifest.txt", std::ios::binary);
  out << manifest.str();
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + (dir / "manifest.txt").string());
}

Network load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.txt";
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::MissingArtifact, "no checkpoint at " + dir.string());
  std::string line;
  std::getline(in, line);
  if (line != kCheckpointMagic) throw Error(ErrorCode::BadMagic, manifest_path.string() + " is not a checkpoint");

  Architecture a;
  std::getline(in, line);
  {
    std::istringstream fields(line);
    std::string word;
    fields >> word;
    if (word != "architecture") throw Error(ErrorCode::BadMagic, "checkpoint manifest lacks architecture");
    while (fields >> word) {
      const auto eq = word.find('=');
      if (eq == std::string::npos) throw Error(ErrorCode::BadMagic, "bad architecture field " + word);
      const std::string key = word.substr(0, eq);
      const int value = std::stoi(word.substr(eq + 1));
      if (key == "channels") a.channels = value;
      else if (key == "side") a.side = value;
      else if (key == "conv1") a.conv1 = value;
      else if (key == "conv2") a.conv2 = value;
      else if (key == "conv3") a.conv3 = value;
      else if (key == "hidden") a.hidden = value;
      else throw Error(ErrorCode::BadMagic, "unknown architecture field " + key);
    }
  }
  Network net(a);
  for (auto& p : net.params()) {
    const tensor::Tensor t = tensor::read_tensor(dir / (p.name + ".bstn"));
    if (!std::equal(t.dims.begin(), t.dims.end(), p.dims.begin(), p.dims.end(),
                    [](std::uint32_t x, int y) { return x == static_cast<std::uint32_t>(y); }))
      throw Error(ErrorCode::DimMismatch, "checkpoint tensor " + p.name + " has unexpected shape");
    p.values = t.values;
  }
  return net;
}

}  // namespace bedsal::model
