#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/morozov.hpp"
#include "deepreg/regnet.hpp"
#include "deepreg/spectral.hpp"

namespace deepreg {

/// A set of library patterns prepared for the network: modulus features,
/// squared projections and (optionally) discrepancy-principle labels.
struct PatternSet {
  std::vector<std::size_t> index;  // library pattern n
  RMatrix features;                // N_eig x count, |U^* u| / u_scale
  RMatrix power;                   // N_eig x count, |U^* u|^2
  RVector labels;                  // alpha_M, empty when unlabeled
  std::vector<RegFlag> flags;

  std::size_t size() const { return index.size(); }
};

struct Dataset {
  PatternSet train;
  PatternSet validation;
  RVector d2;  // squared singular values
  double u_scale = 1.0;
  int m = 1;
  std::vector<std::size_t> selected_orientation;  // per grid point
  std::vector<std::size_t> train_points;
  std::vector<std::size_t> validation_points;
};

/// Training grid = every m-th point along each axis (starting at index 0),
/// validation = the remaining points. Each point keeps the orientation whose
/// Morozov solution has the smallest norm (ties -> smallest s; NoSignal
/// labels are skipped unless every orientation is NoSignal). The regmap must
/// cover every library pattern.
Dataset build_dataset(const Svd& svd, const RhsLibrary& lib, const RegMap& regmap, int m);

/// Features of arbitrary library columns, scaled by u_scale.
PatternSet make_pattern_set(const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& patterns,
                            double u_scale);

enum class AlphaNorm { PerSample, GlobalMax };

struct InformedConfig {
  double eta0 = kDefaultEta;
  double epsilon = 1e-12;
  AlphaNorm alpha_norm = AlphaNorm::GlobalMax;
};

/// Per-sample pieces of the discrepancy-informed loss. The weights are
/// treated as constants; d_w1j1 and d_w2j2 are the alpha-derivatives of
/// w1*J1 and w2*J2, the latter using discrepancy_derivative() as the
/// sensitivity of the discrepancy sum.
struct InformedTerms {
  double j1 = 0.0;
  double j2 = 0.0;
  double w1 = 0.0;
  double w2 = 0.0;
  double d_w1j1 = 0.0;
  double d_w2j2 = 0.0;
  double discrepancy = 0.0;
  bool included = false;
};

InformedTerms informed_terms(double alpha_nn, double alpha_m, double alpha_n, const InformedConfig& cfg,
                             const RVector& d2, const RVector& power);

/// Tikhonov objective at the optimal g, residual2 + alpha * g_norm2, and
/// its alpha-derivative; both reduce to sums over the spectrum:
///   value = sum_j |p_j|^2 alpha / (alpha + D_j^2)
///   slope = sum_j |p_j|^2 D_j^2 / (alpha + D_j^2)^2
struct ImagingTerm {
  double value = 0.0;
  double slope = 0.0;
};

ImagingTerm imaging_term(double alpha, const RVector& d2, const RVector& power);

struct LossResult {
  double value = 0.0;
  double j1 = 0.0;  // informed mode only: mean w1*J1
  double j2 = 0.0;  // informed mode only: mean w2*J2
  RVector alpha;
  Gradients grads;
  std::size_t included = 0;
};

LossResult loss_basic(const RegNet& net, const PatternSet& set, bool with_grad = true);
LossResult loss_informed(const RegNet& net, const PatternSet& set, const RVector& d2, const InformedConfig& cfg,
                         bool with_grad = true);
LossResult loss_imaging(const RegNet& net, const PatternSet& set, const RVector& d2, bool with_grad = true);

enum class StopReason : std::uint8_t {
  None = 0,
  Overfitting = 1,
  Underfitting = 2,
  ValidationConverged = 3,
  TrainingConverged = 4,
};

std::string_view to_string(StopReason reason);

struct StopConfig {
  double sigma_a = 1e-4;
  double sigma_r = 5.0;  // ratio bounds (1 / sigma_r, sigma_r)
  int n_rms = 10000;
  int min_window = 10;
};

struct TraceRow {
  int epoch = 0;
  int step = 1;
  double J = 0.0;
  double V = 0.0;
  double J_hat = 1.0;
  double V_hat = 1.0;
  double dJ_hat = 0.0;
  double dV_hat = 0.0;
  double rms_dJ = 0.0;
  double rms_dV = 0.0;
  double rho = 0.0;
  bool stop = false;
  StopReason reason = StopReason::None;
};

struct LossTrace {
  std::vector<TraceRow> rows;
  int epoch1 = 0;
  std::size_t step2_begin = static_cast<std::size_t>(-1);  // first Step-2 row

  /// Appends a Step-2 row for `epoch`, normalizing by the Step-2 row at
  /// epoch1 (the first one appended) and differencing against the previous.
  TraceRow& append_step2(int epoch, double J, double V);
};

struct StopDecision {
  bool stop = false;
  StopReason reason = StopReason::None;  // highest-priority fired branch
  unsigned fired = 0;                     // bit (1 << reason) per fired branch
  double rms_dJ = 0.0;
  double rms_dV = 0.0;
  double rho = 0.0;

  bool has(StopReason r) const { return (fired & (1u << static_cast<unsigned>(r))) != 0; }
};

/// rms of the Step-2 normalized loss variations at epochs in
/// [max(t - n_rms, epoch1), t) (epoch1 itself carries no variation), and
/// their ratio rho = rms_dV / rms_dJ. Stops when rho < 1/sigma_r
/// (overfitting), rho > sigma_r (underfitting), or either rms < sigma_a.
/// Throws NotReady when t <= epoch1 + min_window or fewer than two
/// variations are in the window.
StopDecision stop_check(const LossTrace& trace, const StopConfig& cfg, int t);

enum class TrainMode { Basic, Informed };

struct Schedule {
  TrainMode mode = TrainMode::Informed;
  int epoch1 = 1000;
  int max_epochs2 = 20000;
  double lr1 = 5e-6;
  double lr2 = 5e-8;
  InformedConfig informed;
  StopConfig stop;
};

struct TrainResult {
  RegNet step1;
  RegNet final_net;  // last model saved before the stop flag was raised
  AdamState step1_optimizer;
  AdamState final_optimizer;
  LossTrace trace;
  StopDecision decision;
  int stop_epoch = -1;  // -1 when Step 2 ran out of epochs without stopping
  int last_saved_epoch = 0;
};

/// Step 1 minimizes loss_basic or loss_informed for epoch1 Adam steps at
/// lr1; Step 2 continues from the Step-1 model minimizing loss_imaging at
/// lr2 until stop_check fires or max_epochs2 epochs pass. Row `epoch` of the
/// trace holds the losses of the model after `epoch` updates.
///
/// Training runs in units of net.alpha_scale: labels and D^2 are divided by
/// it, so Step-1 losses in the trace are in those units. The imaging loss is
/// unit-free and identical in either system.
TrainResult train(const RegNet& net, const Dataset& dataset, const Schedule& schedule);

/// Network map over every library pattern.
RegMap predict_map(const RegNet& net, const Svd& svd, const RhsLibrary& lib);

void write_trace_csv(const LossTrace& trace, const std::filesystem::path& path);

}  // namespace deepreg
