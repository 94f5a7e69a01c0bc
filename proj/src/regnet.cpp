#include "deepreg/regnet.hpp"

#include <cmath>
#include <string>

#include "deepreg/binary_io.hpp"
#include "deepreg/error.hpp"
#include "deepreg/rng.hpp"

namespace deepreg {

std::size_t NetShape::parameter_count() const {
  const auto in = static_cast<std::size_t>(input);
  const auto a = static_cast<std::size_t>(hidden1);
  const auto b = static_cast<std::size_t>(hidden2);
  return a * in + a + b * a + b + b + 1;
}

ParamBlock::ParamBlock(NetShape shape)
    : shape_(shape), data_(RVector::Zero(static_cast<Eigen::Index>(shape.parameter_count()))) {}

std::size_t ParamBlock::off_b1() const {
  return static_cast<std::size_t>(shape_.hidden1) * static_cast<std::size_t>(shape_.input);
}
std::size_t ParamBlock::off_W2() const { return off_b1() + static_cast<std::size_t>(shape_.hidden1); }
std::size_t ParamBlock::off_b2() const {
  return off_W2() + static_cast<std::size_t>(shape_.hidden2) * static_cast<std::size_t>(shape_.hidden1);
}
std::size_t ParamBlock::off_w3() const { return off_b2() + static_cast<std::size_t>(shape_.hidden2); }
std::size_t ParamBlock::off_b3() const { return off_w3() + static_cast<std::size_t>(shape_.hidden2); }

Eigen::Map<RMatrix> ParamBlock::W1() { return {data_.data(), shape_.hidden1, shape_.input}; }
Eigen::Map<const RMatrix> ParamBlock::W1() const { return {data_.data(), shape_.hidden1, shape_.input}; }
Eigen::Map<RVector> ParamBlock::b1() { return {data_.data() + off_b1(), shape_.hidden1}; }
Eigen::Map<const RVector> ParamBlock::b1() const { return {data_.data() + off_b1(), shape_.hidden1}; }
Eigen::Map<RMatrix> ParamBlock::W2() { return {data_.data() + off_W2(), shape_.hidden2, shape_.hidden1}; }
Eigen::Map<const RMatrix> ParamBlock::W2() const {
  return {data_.data() + off_W2(), shape_.hidden2, shape_.hidden1};
}
Eigen::Map<RVector> ParamBlock::b2() { return {data_.data() + off_b2(), shape_.hidden2}; }
Eigen::Map<const RVector> ParamBlock::b2() const { return {data_.data() + off_b2(), shape_.hidden2}; }
Eigen::Map<RVector> ParamBlock::w3() { return {data_.data() + off_w3(), shape_.hidden2}; }
Eigen::Map<const RVector> ParamBlock::w3() const { return {data_.data() + off_w3(), shape_.hidden2}; }
double& ParamBlock::b3() { return data_(static_cast<Eigen::Index>(off_b3())); }
double ParamBlock::b3() const { return data_(static_cast<Eigen::Index>(off_b3())); }

double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

RegNet init_regnet(int input_dim, int hidden1, int hidden2, double alpha_scale, std::uint64_t seed) {
  if (input_dim < 1 || hidden1 < 1 || hidden2 < 1) {
    throw Error(ErrorCode::DimensionMismatch, "network dimensions must be >= 1");
  }
  if (!(alpha_scale > 0.0) || !std::isfinite(alpha_scale)) {
    throw Error(ErrorCode::NumericalFailure, "alpha_scale must be positive and finite");
  }
  RegNet net;
  net.params = ParamBlock(NetShape{input_dim, hidden1, hidden2});
  net.alpha_scale = alpha_scale;
  net.seed = seed;

  SplitMix64 rng(seed);
  auto fill = [&rng](auto&& block, int fan_in) {
    const double sd = std::sqrt(2.0 / fan_in);
    for (Eigen::Index i = 0; i < block.size(); ++i) block.data()[i] = sd * rng.normal();
  };
  fill(net.params.W1(), input_dim);
  fill(net.params.W2(), hidden1);
  fill(net.params.w3(), hidden2);
  return net;
}

BatchOutput forward_batch(const RegNet& net, const RMatrix& x) {
  if (x.rows() != net.shape().input) {
    throw Error(ErrorCode::DimensionMismatch, "input has " + std::to_string(x.rows()) + " rows, network expects " +
                                                   std::to_string(net.shape().input));
  }
  const ParamBlock& p = net.params;
  BatchOutput out;
  ForwardCache& c = out.cache;
  c.x = x;
  c.z1.noalias() = p.W1() * x;
  c.z1.colwise() += p.b1();
  c.h1 = c.z1.cwiseMax(0.0);
  c.z2.noalias() = p.W2() * c.h1;
  c.z2.colwise() += p.b2();
  c.h2 = c.z2.cwiseMax(0.0);
  c.z3.noalias() = c.h2.transpose() * p.w3();
  c.z3.array() += p.b3();
  out.alpha.resize(c.z3.size());
  for (Eigen::Index b = 0; b < c.z3.size(); ++b) out.alpha(b) = net.alpha_scale * softplus(c.z3(b));
  return out;
}

SingleOutput forward(const RegNet& net, const RVector& x) {
  BatchOutput batch = forward_batch(net, x);
  return {batch.alpha(0), std::move(batch.cache)};
}

Gradients backward(const RegNet& net, const ForwardCache& cache, const RVector& dL_dalpha) {
  if (dL_dalpha.size() != cache.z3.size()) throw Error(ErrorCode::DimensionMismatch, "upstream gradient size");
  const ParamBlock& p = net.params;
  Gradients g(net.shape());

  RVector dz3(dL_dalpha.size());
  for (Eigen::Index b = 0; b < dz3.size(); ++b) dz3(b) = dL_dalpha(b) * net.alpha_scale * sigmoid(cache.z3(b));

  g.w3().noalias() = cache.h2 * dz3;
  g.b3() = dz3.sum();

  RMatrix dz2 = p.w3() * dz3.transpose();
  dz2.array() *= (cache.z2.array() > 0.0).cast<double>();
  g.W2().noalias() = dz2 * cache.h1.transpose();
  g.b2() = dz2.rowwise().sum();

  RMatrix dz1;
  dz1.noalias() = p.W2().transpose() * dz2;
  dz1.array() *= (cache.z1.array() > 0.0).cast<double>();
  g.W1().noalias() = dz1 * cache.x.transpose();
  g.b1() = dz1.rowwise().sum();
  return g;
}

Gradients backward(const RegNet& net, const ForwardCache& cache, double dL_dalpha) {
  return backward(net, cache, RVector::Constant(1, dL_dalpha));
}

AdamState AdamState::for_net(const RegNet& net, double learning_rate) {
  AdamState s;
  s.learning_rate = learning_rate;
  s.m = RVector::Zero(net.params.data().size());
  s.v = RVector::Zero(net.params.data().size());
  return s;
}

void adam_step(RegNet& net, AdamState& state, const Gradients& grads) {
  RVector& theta = net.params.data();
  const RVector& g = grads.data();
  if (g.size() != theta.size()) throw Error(ErrorCode::DimensionMismatch, "gradient shape mismatch");
  if (!g.allFinite()) throw Error(ErrorCode::NumericalFailure, "non-finite gradient");
  if (state.m.size() != theta.size()) {
    state.m = RVector::Zero(theta.size());
    state.v = RVector::Zero(theta.size());
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * g;
  state.v = state.beta2 * state.v + (1.0 - state.beta2) * g.cwiseAbs2();
  theta.array() -= state.learning_rate * (state.m.array() / c1) / ((state.v.array() / c2).sqrt() + state.epsilon);
}

void save_checkpoint(const RegNet& net, const AdamState& state, const std::filesystem::path& path) {
  BinaryWriter w(path, {'R', 'N', 'C', 'K'});
  w.u32(static_cast<std::uint32_t>(net.shape().input));
  w.u32(static_cast<std::uint32_t>(net.shape().hidden1));
  w.u32(static_cast<std::uint32_t>(net.shape().hidden2));
  w.f64(net.alpha_scale);
  w.f64(net.u_scale);
  w.u64(net.seed);
  const RVector& theta = net.params.data();
  w.u64(static_cast<std::uint64_t>(theta.size()));
  for (Eigen::Index i = 0; i < theta.size(); ++i) w.f64(theta(i));
  w.f64(state.learning_rate);
  w.f64(state.beta1);
  w.f64(state.beta2);
  w.f64(state.epsilon);
  w.u64(state.step);
  const bool has_moments = state.m.size() == theta.size();
  for (Eigen::Index i = 0; i < theta.size(); ++i) w.f64(has_moments ? state.m(i) : 0.0);
  for (Eigen::Index i = 0; i < theta.size(); ++i) w.f64(has_moments ? state.v(i) : 0.0);
  w.close();
}

std::pair<RegNet, AdamState> load_checkpoint(const std::filesystem::path& path) {
  BinaryReader r(path, {'R', 'N', 'C', 'K'});
  NetShape shape;
  shape.input = static_cast<int>(r.u32());
  shape.hidden1 = static_cast<int>(r.u32());
  shape.hidden2 = static_cast<int>(r.u32());
  RegNet net;
  net.params = ParamBlock(shape);
  net.alpha_scale = r.f64();
  net.u_scale = r.f64();
  net.seed = r.u64();
  const std::uint64_t count = r.u64();
  if (count != shape.parameter_count()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": parameter count does not match shape");
  }
  RVector& theta = net.params.data();
  for (Eigen::Index i = 0; i < theta.size(); ++i) theta(i) = r.f64();
  AdamState s;
  s.learning_rate = r.f64();
  s.beta1 = r.f64();
  s.beta2 = r.f64();
  s.epsilon = r.f64();
  s.step = r.u64();
  s.m.resize(theta.size());
  s.v.resize(theta.size());
  for (Eigen::Index i = 0; i < theta.size(); ++i) s.m(i) = r.f64();
  for (Eigen::Index i = 0; i < theta.size(); ++i) s.v(i) = r.f64();
  return {std::move(net), std::move(s)};
}

}  // namespace deepreg
