#include "deepreg/morozov.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

#include "deepreg/error.hpp"

namespace deepreg {

double discrepancy(double alpha, double eta, const RVector& d2, const RVector& power) {
  const double eta2 = eta * eta;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    if (power(j) == 0.0) continue;
    const double den = alpha + d2(j);
    if (den == 0.0) return std::numeric_limits<double>::infinity();
    acc += (alpha - eta2 * d2(j)) / (den * den) * power(j);
  }
  return acc;
}

double discrepancy_derivative(double alpha, double eta, const RVector& d2, const RVector& power) {
  const double eta2 = eta * eta;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    const double den = alpha + d2(j);
    if (power(j) == 0.0 || den == 0.0) continue;
    acc += 2.0 * d2(j) * (alpha + eta2) / (den * den * den) * power(j);
  }
  return acc;
}

double discrepancy_slope(double alpha, double eta, const RVector& d2, const RVector& power) {
  const double eta2 = eta * eta;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    const double den = alpha + d2(j);
    if (power(j) == 0.0 || den == 0.0) continue;
    acc += (d2(j) * (1.0 + 2.0 * eta2) - alpha) / (den * den * den) * power(j);
  }
  return acc;
}

double morozov_gap(double alpha, double eta, const RVector& d2, const RVector& power) {
  return tikhonov_residual2(d2, power, alpha) - eta * eta * tikhonov_norm2(d2, power, alpha);
}

double discrepancy(double alpha, double eta, const Svd& svd, const Projection& proj) {
  return discrepancy(alpha, eta, svd.D.cwiseAbs2(), proj.power());
}

double discrepancy_derivative(double alpha, double eta, const Svd& svd, const Projection& proj) {
  return discrepancy_derivative(alpha, eta, svd.D.cwiseAbs2(), proj.power());
}

double solve_alpha(double eta, const RVector& d2, const RVector& power, double tol) {
  if (d2.size() != power.size()) throw Error(ErrorCode::DimensionMismatch, "spectrum/projection length mismatch");
  const double signal = power.sum();
  if (!(signal > 0.0)) throw Error(ErrorCode::NoSignal, "projection is identically zero");
  const double d2_max = d2.maxCoeff();
  if (!(d2_max > 0.0)) throw Error(ErrorCode::NoRoot, "operator has no nonzero singular value");

  const double target = tol * signal;
  double lo = 0.0;
  double hi = eta * eta * d2_max;
  if (hi <= 0.0) hi = d2_max;
  const double hi_cap = 1e6 * d2_max;
  if (discrepancy(lo, eta, d2, power) >= 0.0) return 0.0;
  while (discrepancy(hi, eta, d2, power) < 0.0) {
    lo = hi;
    hi *= 2.0;
    if (hi > hi_cap) throw Error(ErrorCode::NoRoot, "bracket expansion exceeded 1e6 max(D)^2");
  }

  double mid = 0.5 * (lo + hi);
  for (int it = 0; it < 200; ++it) {
    mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double f = discrepancy(mid, eta, d2, power);
    if (std::abs(f) <= target) break;
    (f < 0.0 ? lo : hi) = mid;
  }

  // Newton polish inside the final bracket, kept only while |f| decreases
  double best = mid;
  double best_f = std::abs(discrepancy(best, eta, d2, power));
  for (int it = 0; it < 6 && best_f > 0.0; ++it) {
    const double slope = discrepancy_slope(best, eta, d2, power);
    if (!(slope != 0.0)) break;
    const double next = best - discrepancy(best, eta, d2, power) / slope;
    if (!(next >= lo && next <= hi)) break;
    const double next_f = std::abs(discrepancy(next, eta, d2, power));
    if (!(next_f < best_f)) break;
    best = next;
    best_f = next_f;
  }
  return best;
}

double solve_alpha(double eta, const Svd& svd, const Projection& proj, double tol) {
  return solve_alpha(eta, svd.D.cwiseAbs2(), proj.power(), tol);
}

RegMap build_regmap(double eta, const RVector& d2, const RMatrix& power, const std::vector<std::size_t>& subset,
                    double tol) {
  RegMap map;
  map.eta = eta;
  map.index = subset;
  map.alpha.resize(subset.size());
  map.flag.resize(subset.size(), RegFlag::Ok);
  for (std::size_t i = 0; i < subset.size(); ++i) {
    const std::size_t n = subset[i];
    if (n >= static_cast<std::size_t>(power.cols())) {
      throw Error(ErrorCode::DimensionMismatch, "pattern index " + std::to_string(n) + " out of range");
    }
    try {
      map.alpha[i] = solve_alpha(eta, d2, power.col(static_cast<Eigen::Index>(n)), tol);
    } catch (const Error& e) {
      if (e.code() == ErrorCode::NoSignal) {
        map.alpha[i] = 0.0;
        map.flag[i] = RegFlag::NoSignal;
      } else if (e.code() == ErrorCode::NoRoot) {
        throw Error(ErrorCode::NoRoot, "pattern " + std::to_string(n) + ": " + e.what());
      } else {
        throw;
      }
    }
  }
  return map;
}

RegMap build_regmap(double eta, const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& subset,
                    double tol) {
  const RMatrix power = project_all(svd, lib.patterns).cwiseAbs2();
  return build_regmap(eta, svd.D.cwiseAbs2(), power, subset, tol);
}

std::vector<std::size_t> all_patterns(const RhsLibrary& lib) {
  std::vector<std::size_t> out(lib.n_patterns());
  for (std::size_t n = 0; n < out.size(); ++n) out[n] = n;
  return out;
}

void write_regmap_csv(const RegMap& map, const RhsLibrary& lib, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "n,p,s,x,y,phi,alpha,flag\n" << std::setprecision(17);
  for (std::size_t i = 0; i < map.size(); ++i) {
    const std::size_t n = map.index[i];
    if (n >= lib.n_patterns()) throw Error(ErrorCode::DimensionMismatch, "map index outside library");
    const auto [p, s] = lib.split(n);
    out << n << ',' << p << ',' << s << ',' << lib.grid[p].x << ',' << lib.grid[p].y << ','
        << lib.orientations[s] << ',' << map.alpha[i] << ',' << static_cast<int>(map.flag[i]) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

RegMap read_regmap_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open " + path.string());
  RegMap map;
  map.eta = std::numeric_limits<double>::quiet_NaN();
  std::string line;
  std::getline(in, line);
  if (line.rfind("n,p,s,x,y,phi,alpha,flag", 0) != 0) {
    throw Error(ErrorCode::IoError, path.string() + ": unexpected header");
  }
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    }
    try {
      map.index.push_back(std::stoull(fields[0]));
      map.alpha.push_back(std::stod(fields[6]));
      map.flag.push_back(static_cast<RegFlag>(std::stoi(fields[7])));
    } catch (const std::exception&) {
      throw Error(ErrorCode::IoError, path.string() + ":" + std::to_string(lineno) + ": malformed number");
    }
  }
  return map;
}

}  // namespace deepreg
