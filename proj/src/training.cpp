#include "deepreg/training.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <string>

#include "deepreg/error.hpp"

namespace deepreg {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_finite(double value, int epoch, const char* what) {
  if (!std::isfinite(value)) {
    throw Error(ErrorCode::NumericalFailure, std::string(what) + " diverged at epoch " + std::to_string(epoch));
  }
}

}  // namespace

PatternSet make_pattern_set(const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& patterns,
                            double u_scale) {
  CMatrix columns(lib.patterns.rows(), static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t i = 0; i < patterns.size(); ++i) {
    if (patterns[i] >= lib.n_patterns()) throw Error(ErrorCode::DimensionMismatch, "pattern index out of range");
    columns.col(static_cast<Eigen::Index>(i)) = lib.patterns.col(static_cast<Eigen::Index>(patterns[i]));
  }
  const CMatrix coeffs = project_all(svd, columns);
  PatternSet set;
  set.index = patterns;
  set.power = coeffs.cwiseAbs2();
  set.features = coeffs.cwiseAbs() / u_scale;
  return set;
}

Dataset build_dataset(const Svd& svd, const RhsLibrary& lib, const RegMap& regmap, int m) {
  if (m < 1) throw Error(ErrorCode::ConfigError, "downsampling factor m must be >= 1");
  if (static_cast<Eigen::Index>(lib.patterns.rows()) != svd.U.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "library and operator sizes differ");
  }
  const std::size_t n_total = lib.n_patterns();
  std::vector<double> alpha(n_total, kNaN);
  std::vector<RegFlag> flag(n_total, RegFlag::Ok);
  for (std::size_t i = 0; i < regmap.size(); ++i) {
    if (regmap.index[i] >= n_total) throw Error(ErrorCode::DimensionMismatch, "regmap index outside library");
    alpha[regmap.index[i]] = regmap.alpha[i];
    flag[regmap.index[i]] = regmap.flag[i];
  }
  if (std::any_of(alpha.begin(), alpha.end(), [](double a) { return std::isnan(a); })) {
    throw Error(ErrorCode::DimensionMismatch, "regmap does not cover every library pattern");
  }

  Dataset ds;
  ds.m = m;
  ds.d2 = svd.D.cwiseAbs2();
  const RMatrix power = project_all(svd, lib.patterns).cwiseAbs2();

  ds.selected_orientation.resize(lib.n_points());
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    bool any_signal = false;
    for (std::size_t s = 0; s < lib.n_orientations(); ++s) any_signal |= flag[lib.index(p, s)] == RegFlag::Ok;
    std::size_t best_s = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lib.n_orientations(); ++s) {
      const std::size_t n = lib.index(p, s);
      if (any_signal && flag[n] != RegFlag::Ok) continue;
      const double norm2 = tikhonov_norm2(ds.d2, power.col(static_cast<Eigen::Index>(n)), alpha[n]);
      if (norm2 < best) {
        best = norm2;
        best_s = s;
      }
    }
    ds.selected_orientation[p] = best_s;
    const int ix = static_cast<int>(p) % lib.nx;
    const int iy = static_cast<int>(p) / lib.nx;
    (ix % m == 0 && iy % m == 0 ? ds.train_points : ds.validation_points).push_back(p);
  }

  auto chosen = [&](const std::vector<std::size_t>& points) {
    std::vector<std::size_t> out;
    out.reserve(points.size());
    for (std::size_t p : points) out.push_back(lib.index(p, ds.selected_orientation[p]));
    return out;
  };
  const auto train_idx = chosen(ds.train_points);
  const auto valid_idx = chosen(ds.validation_points);

  double u_max = 0.0;
  for (std::size_t n : train_idx) u_max = std::max(u_max, std::sqrt(power.col(static_cast<Eigen::Index>(n)).maxCoeff()));
  ds.u_scale = u_max > 0.0 ? u_max : 1.0;

  auto fill = [&](PatternSet& set, const std::vector<std::size_t>& idx) {
    set = make_pattern_set(svd, lib, idx, ds.u_scale);
    set.labels.resize(static_cast<Eigen::Index>(idx.size()));
    set.flags.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      set.labels(static_cast<Eigen::Index>(i)) = alpha[idx[i]];
      set.flags[i] = flag[idx[i]];
    }
  };
  fill(ds.train, train_idx);
  fill(ds.validation, valid_idx);
  return ds;
}

InformedTerms informed_terms(double alpha_nn, double alpha_m, double alpha_n, const InformedConfig& cfg,
                             const RVector& d2, const RVector& power) {
  InformedTerms t;
  if (!(alpha_n > 0.0)) return t;
  t.included = true;
  const double misfit = (alpha_nn - alpha_m) / alpha_n;
  t.j1 = misfit * misfit;
  t.w1 = alpha_n;
  t.discrepancy = discrepancy(alpha_nn, cfg.eta0, d2, power);
  t.j2 = t.discrepancy * t.discrepancy;
  const double sensitivity = discrepancy_derivative(alpha_nn, cfg.eta0, d2, power);
  t.w2 = 1.0 / (sensitivity + cfg.epsilon);
  t.d_w1j1 = t.w1 * 2.0 * misfit / alpha_n;
  t.d_w2j2 = t.w2 * 2.0 * t.discrepancy * sensitivity;
  return t;
}

ImagingTerm imaging_term(double alpha, const RVector& d2, const RVector& power) {
  ImagingTerm t;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    const double den = alpha + d2(j);
    if (den == 0.0) continue;
    t.value += power(j) * alpha / den;
    t.slope += power(j) * d2(j) / (den * den);
  }
  return t;
}

LossResult loss_basic(const RegNet& net, const PatternSet& set, bool with_grad) {
  if (set.labels.size() != static_cast<Eigen::Index>(set.size())) {
    throw Error(ErrorCode::DimensionMismatch, "basic loss needs one label per pattern");
  }
  LossResult r;
  r.included = set.size();
  if (set.size() == 0) {
    r.value = kNaN;
    if (with_grad) r.grads = Gradients(net.shape());
    return r;
  }
  BatchOutput out = forward_batch(net, set.features);
  r.alpha = out.alpha;
  const RVector diff = out.alpha - set.labels;
  const double n = static_cast<double>(set.size());
  r.value = diff.squaredNorm() / n;
  if (with_grad) r.grads = backward(net, out.cache, (2.0 / n) * diff);
  return r;
}

LossResult loss_informed(const RegNet& net, const PatternSet& set, const RVector& d2, const InformedConfig& cfg,
                         bool with_grad) {
  if (set.labels.size() != static_cast<Eigen::Index>(set.size())) {
    throw Error(ErrorCode::DimensionMismatch, "informed loss needs one label per pattern");
  }
  LossResult r;
  if (set.size() == 0) {
    r.value = kNaN;
    if (with_grad) r.grads = Gradients(net.shape());
    return r;
  }
  BatchOutput out = forward_batch(net, set.features);
  r.alpha = out.alpha;
  const double global = set.labels.maxCoeff();
  const auto count = static_cast<Eigen::Index>(set.size());

  std::vector<InformedTerms> terms(set.size());
  for (Eigen::Index t = 0; t < count; ++t) {
    const double alpha_n = cfg.alpha_norm == AlphaNorm::GlobalMax ? global : set.labels(t);
    terms[static_cast<std::size_t>(t)] =
        informed_terms(out.alpha(t), set.labels(t), alpha_n, cfg, d2, set.power.col(t));
    if (terms[static_cast<std::size_t>(t)].included) ++r.included;
  }
  RVector upstream = RVector::Zero(count);
  if (r.included > 0) {
    const double n = static_cast<double>(r.included);
    for (Eigen::Index t = 0; t < count; ++t) {
      const InformedTerms& term = terms[static_cast<std::size_t>(t)];
      if (!term.included) continue;
      r.j1 += term.w1 * term.j1 / n;
      r.j2 += term.w2 * term.j2 / n;
      upstream(t) = (term.d_w1j1 + term.d_w2j2) / n;
    }
  }
  r.value = r.j1 + r.j2;
  if (with_grad) r.grads = backward(net, out.cache, upstream);
  return r;
}

LossResult loss_imaging(const RegNet& net, const PatternSet& set, const RVector& d2, bool with_grad) {
  LossResult r;
  r.included = set.size();
  if (set.size() == 0) {
    r.value = kNaN;
    if (with_grad) r.grads = Gradients(net.shape());
    return r;
  }
  BatchOutput out = forward_batch(net, set.features);
  r.alpha = out.alpha;
  const auto count = static_cast<Eigen::Index>(set.size());
  const double n = static_cast<double>(count);
  RVector upstream(count);
  for (Eigen::Index t = 0; t < count; ++t) {
    const ImagingTerm term = imaging_term(out.alpha(t), d2, set.power.col(t));
    r.value += term.value / n;
    upstream(t) = term.slope / n;
  }
  if (with_grad) r.grads = backward(net, out.cache, upstream);
  return r;
}

std::string_view to_string(StopReason reason) {
  switch (reason) {
    case StopReason::None: return "none";
    case StopReason::Overfitting: return "overfitting";
    case StopReason::Underfitting: return "underfitting";
    case StopReason::ValidationConverged: return "validation_converged";
    case StopReason::TrainingConverged: return "training_converged";
  }
  return "none";
}

TraceRow& LossTrace::append_step2(int epoch, double J, double V) {
  TraceRow row;
  row.epoch = epoch;
  row.step = 2;
  row.J = J;
  row.V = V;
  row.rms_dJ = row.rms_dV = row.rho = kNaN;
  if (step2_begin == static_cast<std::size_t>(-1) || step2_begin >= rows.size()) {
    step2_begin = rows.size();
    epoch1 = epoch;
    row.J_hat = 1.0;
    row.V_hat = 1.0;
    row.dJ_hat = row.dV_hat = kNaN;
  } else {
    const TraceRow& base = rows[step2_begin];
    const TraceRow& prev = rows.back();
    if (epoch != prev.epoch + 1) throw Error(ErrorCode::DimensionMismatch, "Step-2 epochs must be consecutive");
    row.J_hat = J / base.J;
    row.V_hat = V / base.V;
    row.dJ_hat = row.J_hat - prev.J_hat;
    row.dV_hat = row.V_hat - prev.V_hat;
  }
  rows.push_back(row);
  return rows.back();
}

StopDecision stop_check(const LossTrace& trace, const StopConfig& cfg, int t) {
  if (trace.step2_begin == static_cast<std::size_t>(-1) || trace.step2_begin >= trace.rows.size()) {
    throw Error(ErrorCode::NotReady, "trace has no Step-2 rows");
  }
  const int epoch1 = trace.epoch1;
  if (t <= epoch1 + cfg.min_window) {
    throw Error(ErrorCode::NotReady, "epoch " + std::to_string(t) + " inside the warm-up window");
  }
  const int lo = std::max(t - cfg.n_rms, epoch1 + 1);
  const int hi = t - 1;
  const std::size_t available = trace.rows.size() - trace.step2_begin;
  if (hi - lo + 1 < 2 || static_cast<std::size_t>(hi - epoch1) >= available) {
    throw Error(ErrorCode::NotReady, "fewer than two loss variations in the window");
  }
  double sum_j = 0.0;
  double sum_v = 0.0;
  for (int e = lo; e <= hi; ++e) {
    const TraceRow& row = trace.rows[trace.step2_begin + static_cast<std::size_t>(e - epoch1)];
    sum_j += row.dJ_hat * row.dJ_hat;
    sum_v += row.dV_hat * row.dV_hat;
  }
  const double count = static_cast<double>(hi - lo + 1);
  StopDecision d;
  d.rms_dJ = std::sqrt(sum_j / count);
  d.rms_dV = std::sqrt(sum_v / count);
  d.rho = d.rms_dV / d.rms_dJ;

  auto fire = [&d](StopReason r) { d.fired |= 1u << static_cast<unsigned>(r); };
  if (d.rho < 1.0 / cfg.sigma_r) fire(StopReason::Overfitting);
  if (d.rho > cfg.sigma_r) fire(StopReason::Underfitting);
  if (d.rms_dV < cfg.sigma_a) fire(StopReason::ValidationConverged);
  if (d.rms_dJ < cfg.sigma_a) fire(StopReason::TrainingConverged);
  for (StopReason r : {StopReason::Overfitting, StopReason::Underfitting, StopReason::ValidationConverged,
                       StopReason::TrainingConverged}) {
    if (d.has(r)) {
      d.stop = true;
      d.reason = r;
      break;
    }
  }
  return d;
}

TrainResult train(const RegNet& initial, const Dataset& ds, const Schedule& schedule) {
  if (schedule.epoch1 < 0 || schedule.max_epochs2 < 0) throw Error(ErrorCode::ConfigError, "negative epoch count");
  if (ds.train.size() == 0) throw Error(ErrorCode::DimensionMismatch, "empty training set");

  // Training units: alpha measured in alpha_scale, so labels and D^2 are
  // divided by it and the network runs with a unit head scale.
  const double unit = std::isfinite(initial.alpha_scale) && initial.alpha_scale > 0.0 ? initial.alpha_scale : 1.0;
  Dataset scaled = ds;
  scaled.d2 /= unit;
  scaled.train.labels /= unit;
  scaled.validation.labels /= unit;
  const Dataset& data = scaled;

  auto step1_loss = [&](const RegNet& net, const PatternSet& set, bool grad) {
    return schedule.mode == TrainMode::Basic ? loss_basic(net, set, grad)
                                             : loss_informed(net, set, data.d2, schedule.informed, grad);
  };
  auto restore = [unit](RegNet net) {
    net.alpha_scale = unit;
    return net;
  };

  TrainResult result;
  RegNet net = initial;
  net.alpha_scale = 1.0;
  AdamState adam = AdamState::for_net(net, schedule.lr1);

  LossResult r = step1_loss(net, data.train, true);
  require_finite(r.value, 0, "Step-1 loss");
  double v = step1_loss(net, data.validation, false).value;
  const double j0 = r.value;
  const double v0 = v;
  {
    TraceRow row;
    row.epoch = 0;
    row.step = 1;
    row.J = j0;
    row.V = v0;
    row.dJ_hat = row.dV_hat = row.rms_dJ = row.rms_dV = row.rho = kNaN;
    result.trace.rows.push_back(row);
  }
  for (int t = 1; t <= schedule.epoch1; ++t) {
    adam_step(net, adam, r.grads);
    r = step1_loss(net, data.train, true);
    require_finite(r.value, t, "Step-1 loss");
    v = step1_loss(net, data.validation, false).value;
    TraceRow row;
    row.epoch = t;
    row.step = 1;
    row.J = r.value;
    row.V = v;
    row.J_hat = r.value / j0;
    row.V_hat = v / v0;
    const TraceRow& prev = result.trace.rows.back();
    row.dJ_hat = row.J_hat - prev.J_hat;
    row.dV_hat = row.V_hat - prev.V_hat;
    row.rms_dJ = row.rms_dV = row.rho = kNaN;
    result.trace.rows.push_back(row);
  }
  result.step1 = restore(net);
  result.step1_optimizer = adam;
  result.final_net = restore(net);
  result.final_optimizer = adam;
  result.last_saved_epoch = schedule.epoch1;
  if (schedule.max_epochs2 == 0) return result;

  AdamState adam2 = AdamState::for_net(net, schedule.lr2);
  r = loss_imaging(net, data.train, data.d2, true);
  require_finite(r.value, schedule.epoch1, "Step-2 loss");
  result.trace.append_step2(schedule.epoch1, r.value, loss_imaging(net, data.validation, data.d2, false).value);

  for (int t = schedule.epoch1 + 1; t <= schedule.epoch1 + schedule.max_epochs2; ++t) {
    adam_step(net, adam2, r.grads);
    r = loss_imaging(net, data.train, data.d2, true);
    require_finite(r.value, t, "Step-2 loss");
    TraceRow& row = result.trace.append_step2(t, r.value, loss_imaging(net, data.validation, data.d2, false).value);
    if (t > schedule.epoch1 + schedule.stop.min_window) {
      const StopDecision d = stop_check(result.trace, schedule.stop, t);
      row.rms_dJ = d.rms_dJ;
      row.rms_dV = d.rms_dV;
      row.rho = d.rho;
      if (d.stop) {
        row.stop = true;
        row.reason = d.reason;
        result.decision = d;
        result.stop_epoch = t;
        return result;
      }
    }
    result.final_net = restore(net);
    result.final_optimizer = adam2;
    result.last_saved_epoch = t;
  }
  return result;
}

RegMap predict_map(const RegNet& net, const Svd& svd, const RhsLibrary& lib) {
  RegMap map;
  map.eta = kNaN;
  map.index = all_patterns(lib);
  map.alpha.resize(map.index.size());
  map.flag.assign(map.index.size(), RegFlag::Ok);
  constexpr std::size_t kChunk = 1024;
  for (std::size_t begin = 0; begin < map.index.size(); begin += kChunk) {
    const std::size_t end = std::min(begin + kChunk, map.index.size());
    const auto cols = static_cast<Eigen::Index>(end - begin);
    const CMatrix coeffs =
        project_all(svd, lib.patterns.middleCols(static_cast<Eigen::Index>(begin), cols));
    const RVector alpha = forward_batch(net, coeffs.cwiseAbs() / net.u_scale).alpha;
    for (Eigen::Index i = 0; i < cols; ++i) map.alpha[begin + static_cast<std::size_t>(i)] = alpha(i);
  }
  return map;
}

void write_trace_csv(const LossTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "epoch,step,J,V,J_hat,V_hat,dJ_hat,dV_hat,rms_dJ,rms_dV,rho,stop_flag,reason\n" << std::setprecision(17);
  for (const TraceRow& r : trace.rows) {
    out << r.epoch << ',' << r.step << ',' << r.J << ',' << r.V << ',' << r.J_hat << ',' << r.V_hat << ','
        << r.dJ_hat << ',' << r.dV_hat << ',' << r.rms_dJ << ',' << r.rms_dV << ',' << r.rho << ','
        << (r.stop ? 1 : 0) << ',' << to_string(r.reason) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

}  // namespace deepreg
