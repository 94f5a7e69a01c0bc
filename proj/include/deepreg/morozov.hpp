#pragma once

// Discrepancy-principle regularization maps. The discrepancy functional is
//
//   f(alpha) = sum_j (alpha - eta^2 D_j^2) / (alpha + D_j^2)^2 * |p_j|^2
//
// with p = U^* u_L. Its root satisfies ||F g - u||^2 = eta^2 * alpha * ||g||^2.
// discrepancy_derivative() is the closed form used to scale the discrepancy
// loss during training,
//
//   sum_j 2 D_j^2 (alpha + eta^2) / (alpha + D_j^2)^3 * |p_j|^2,
//
// which is strictly positive; note it is the exact derivative of the
// classical gap ||F g - u||^2 - eta^2 ||g||^2 (morozov_gap), not of f.
// discrepancy_slope() is the exact derivative of f.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/spectral.hpp"

namespace deepreg {

inline constexpr double kDefaultMorozovTol = 1e-12;
inline constexpr double kDefaultEta = 0.3;

double discrepancy(double alpha, double eta, const RVector& d2, const RVector& power);
double discrepancy_derivative(double alpha, double eta, const RVector& d2, const RVector& power);
double discrepancy_slope(double alpha, double eta, const RVector& d2, const RVector& power);
double morozov_gap(double alpha, double eta, const RVector& d2, const RVector& power);

double discrepancy(double alpha, double eta, const Svd& svd, const Projection& proj);
double discrepancy_derivative(double alpha, double eta, const Svd& svd, const Projection& proj);

/// Bisection on [0, hi] where hi starts at eta^2 max(D)^2 and doubles until
/// f(hi) >= 0, followed by a safeguarded Newton polish. Converged when
/// |f| <= tol * sum |p_j|^2 or the bracket collapses to machine precision.
/// Throws NoSignal for an all-zero projection and NoRoot when the bracket
/// would exceed 1e6 max(D)^2.
double solve_alpha(double eta, const RVector& d2, const RVector& power, double tol = kDefaultMorozovTol);
double solve_alpha(double eta, const Svd& svd, const Projection& proj, double tol = kDefaultMorozovTol);

enum class RegFlag : std::uint8_t { Ok = 0, NoSignal = 1 };

/// Regularization parameters for a subset of library patterns.
struct RegMap {
  double eta = 0.0;  // threshold the map was solved for; NaN for network maps
  std::vector<std::size_t> index;
  std::vector<double> alpha;
  std::vector<RegFlag> flag;

  std::size_t size() const { return index.size(); }
};

/// One solve per subset entry, in subset order. NoSignal patterns get
/// alpha = 0 with RegFlag::NoSignal; NoRoot is rethrown naming the index.
RegMap build_regmap(double eta, const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& subset,
                    double tol = kDefaultMorozovTol);

/// Same as above with precomputed |U^* u_L|^2 columns for the whole library.
RegMap build_regmap(double eta, const RVector& d2, const RMatrix& power, const std::vector<std::size_t>& subset,
                    double tol = kDefaultMorozovTol);

std::vector<std::size_t> all_patterns(const RhsLibrary& lib);

/// CSV columns n,p,s,x,y,phi,alpha,flag.
void write_regmap_csv(const RegMap& map, const RhsLibrary& lib, const std::filesystem::path& path);
RegMap read_regmap_csv(const std::filesystem::path& path);

}  // namespace deepreg
