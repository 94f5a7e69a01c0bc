#pragma once

// Regularization network: input -> ReLU(hidden1) -> ReLU(hidden2) -> scalar,
// alpha = alpha_scale * softplus(head). Parameters live in one contiguous
// vector so the optimizer, checkpoints and gradient checks work on flat data;
// the layer views below map into it.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <utility>

#include "deepreg/types.hpp"

namespace deepreg {

struct NetShape {
  int input = 0;
  int hidden1 = 0;
  int hidden2 = 0;

  std::size_t parameter_count() const;
  bool operator==(const NetShape&) const = default;
};

class ParamBlock {
 public:
  ParamBlock() = default;
  explicit ParamBlock(NetShape shape);

  const NetShape& shape() const { return shape_; }
  RVector& data() { return data_; }
  const RVector& data() const { return data_; }

  Eigen::Map<RMatrix> W1();
  Eigen::Map<const RMatrix> W1() const;
  Eigen::Map<RVector> b1();
  Eigen::Map<const RVector> b1() const;
  Eigen::Map<RMatrix> W2();
  Eigen::Map<const RMatrix> W2() const;
  Eigen::Map<RVector> b2();
  Eigen::Map<const RVector> b2() const;
  Eigen::Map<RVector> w3();
  Eigen::Map<const RVector> w3() const;
  double& b3();
  double b3() const;

 private:
  std::size_t off_b1() const;
  std::size_t off_W2() const;
  std::size_t off_b2() const;
  std::size_t off_w3() const;
  std::size_t off_b3() const;

  NetShape shape_;
  RVector data_;
};

struct RegNet {
  ParamBlock params;
  double alpha_scale = 1.0;
  double u_scale = 1.0;
  std::uint64_t seed = 0;

  const NetShape& shape() const { return params.shape(); }
};

using Gradients = ParamBlock;

/// Activations retained by a batched forward pass, one column per sample.
struct ForwardCache {
  RMatrix x;
  RMatrix z1;
  RMatrix h1;
  RMatrix z2;
  RMatrix h2;
  RVector z3;
};

struct BatchOutput {
  RVector alpha;
  ForwardCache cache;
};

struct SingleOutput {
  double alpha = 0.0;
  ForwardCache cache;
};

double softplus(double z);
double sigmoid(double z);

/// He-normal weights (std sqrt(2 / fan_in)) drawn from SplitMix64(seed) in
/// the order W1, W2, w3 (column-major within each); biases zero.
RegNet init_regnet(int input_dim, int hidden1, int hidden2, double alpha_scale, std::uint64_t seed);

SingleOutput forward(const RegNet& net, const RVector& x);
BatchOutput forward_batch(const RegNet& net, const RMatrix& x);

/// Gradients of sum_b dL_dalpha(b) * alpha(b) with respect to all
/// parameters. ReLU uses subgradient 0 at a zero pre-activation.
Gradients backward(const RegNet& net, const ForwardCache& cache, const RVector& dL_dalpha);
Gradients backward(const RegNet& net, const ForwardCache& cache, double dL_dalpha);

struct AdamState {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  RVector m;
  RVector v;

  static AdamState for_net(const RegNet& net, double learning_rate);
};

/// Bias-corrected Adam update in place. Throws NumericalFailure on a
/// non-finite gradient.
void adam_step(RegNet& net, AdamState& state, const Gradients& grads);

/// RNCK: shape (u32 x3), alpha_scale, u_scale, u64 seed, u64 count + f64
/// parameters, then optimizer f64 lr, beta1, beta2, epsilon, u64 step and the
/// two moment blocks.
void save_checkpoint(const RegNet& net, const AdamState& state, const std::filesystem::path& path);
std::pair<RegNet, AdamState> load_checkpoint(const std::filesystem::path& path);

}  // namespace deepreg
