#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "bedsal/image.hpp"
#include "bedsal/slic.hpp"

namespace bedsal::model {

/// Layer sizes. The input is channels x side x side.
struct Architecture {
  int channels = 10;
  int side = kGridSide;
  int conv1 = 16;
  int conv2 = 16;
  int conv3 = 8;
  int hidden = 100;

  int input_size() const { return channels * side * side; }
  bool operator==(const Architecture&) const = default;
};

/// Parameters in the depth group get the depth learning-rate multiplier.
enum class Group { Depth, Fusion };

struct Parameter {
  std::string name;
  std::vector<int> dims;
  Group group = Group::Depth;
  std::vector<double> values;

  bool operator==(const Parameter&) const = default;
};

/// Depth branch: three 3x3 convolutions (zero padding, ReLU) and a linear map
/// to a side x side map. Fusion: fully connected hidden layer (ReLU) and one
/// logistic output unit.
class Network {
 public:
  explicit Network(const Architecture& arch);

  const Architecture& arch() const noexcept { return arch_; }
  std::vector<Parameter>& params() noexcept { return params_; }
  const std::vector<Parameter>& params() const noexcept { return params_; }
  const Parameter& param(const std::string& name) const;
  Parameter& param(const std::string& name);
  std::size_t parameter_count() const;

  bool operator==(const Network&) const = default;

 private:
  Architecture arch_;
  std::vector<Parameter> params_;
};

/// Channel counts the feature assembly can produce: 4 low-level layers plus
/// optional 6 enclosure and 7 color layers.
bool valid_channel_count(int channels);

/// Xavier-uniform weights and zero biases from `seed`.
Network init_network(int channels, std::uint64_t seed, Architecture arch = {});

/// Intermediate values kept by forward for backward.
struct Activations {
  std::vector<double> input;
  std::vector<double> a1, a2, a3;  // post-ReLU convolution outputs
  std::vector<double> map;         // depth-branch output, side x side
  std::vector<double> hidden;      // post-ReLU
  double logit = 0.0;
  double p = 0.0;
};

double forward(const Network& net, std::span<const double> input, Activations* cache = nullptr);

inline constexpr double kProbabilityClamp = 1e-7;

/// Binary cross-entropy with p clamped to [1e-7, 1-1e-7].
double loss(double p, double target);

/// Same layout as Network::params, one buffer per parameter.
struct Gradients {
  std::vector<std::vector<double>> values;

  explicit Gradients(const Network& net);
  void zero();
  void add(const Gradients& other);
  void scale(double factor);
};

/// Accumulates d loss / d parameter for one forward pass into `grads`. The
/// output gradient is p - target, the exact derivative of the unclamped loss.
void backward(const Network& net, const Activations& acts, double target, Gradients& grads);

/// Runs forward and backward for a block of examples (inputs concatenated),
/// adding their gradients to `grads`. Returns the summed loss. Equal to
/// per-example backward up to summation order, but reuses each row of the
/// large depth-map weight matrix across the block.
double accumulate_batch(const Network& net, std::span<const double> inputs, std::span<const double> targets,
                        Gradients& grads);

struct AdadeltaConfig {
  double rho = 0.9;
  double epsilon = 1e-8;
};

struct GroupMultipliers {
  double depth = 10.0;
  double fusion = 1.0;
};

/// One Adadelta update of a scalar; returns the unscaled step.
double adadelta_delta(double grad, double& sq_grad, double& sq_update, const AdadeltaConfig& config);

class Adadelta {
 public:
  Adadelta(const Network& net, AdadeltaConfig config = {});

  /// Applies base_lr * group multiplier * delta to every parameter.
  void step(Network& net, const Gradients& grads, double base_lr, const GroupMultipliers& mult);

  const std::vector<std::vector<double>>& sq_grad() const noexcept { return sq_grad_; }
  const std::vector<std::vector<double>>& sq_update() const noexcept { return sq_update_; }

 private:
  AdadeltaConfig config_;
  std::vector<std::vector<double>> sq_grad_;
  std::vector<std::vector<double>> sq_update_;
};

struct StageSchedule {
  double base_lr = 0.05;
  double decay = 0.1;
  int decay_every = 10000;  // 0 keeps the rate constant
  int iterations = 50000;

  double rate(int step) const;
};

struct TrainSchedule {
  StageSchedule stage1{0.05, 0.1, 10000, 50000};
  StageSchedule stage2{0.01, 1.0, 0, 1000};
  int batch = 1000;
  GroupMultipliers multipliers;
  AdadeltaConfig adadelta;
};

/// Indexed pool of training examples. `fill` writes example i's input into
/// `input` and returns its target. It must be safe to call concurrently.
struct ExampleSource {
  std::size_t count = 0;
  std::function<double(std::size_t i, std::span<double> input)> fill;
};

struct LogRow {
  int stage = 0;
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
};

/// Stage 1 on `augmented` (falls back to `originals` when empty), then stage 2
/// on `originals`. Each step averages the loss over `batch` examples drawn
/// uniformly with replacement. With jobs == 1 the result is bit-reproducible;
/// more jobs split each batch into that many concurrently evaluated chunks.
Network train(Network net, const ExampleSource& augmented, const ExampleSource& originals,
              const TrainSchedule& schedule, std::uint64_t seed, std::vector<LogRow>* log = nullptr,
              int jobs = 1);

std::string format_log(const std::vector<LogRow>& log);

/// Every pixel gets its superpixel's score.
SaliencyMap paint(const slic::Partition& part, std::span<const double> scores);

/// Scores superpixels 0..K-1 with `fill(p, input)` providing each input.
std::vector<double> score_superpixels(const Network& net, int count,
                                      const std::function<void(int, std::span<double>)>& fill);

SaliencyMap predict(const Network& net, const slic::Partition& part,
                    const std::function<void(int, std::span<double>)>& fill);

/// One f64 tensor file per parameter plus manifest.txt describing layers.
void save_checkpoint(const Network& net, const std::filesystem::path& dir);
Network load_checkpoint(const std::filesystem::path& dir);

}  // namespace bedsal::model
