#include "deepreg/spectral.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <string>

#include "deepreg/binary_io.hpp"
#include "deepreg/error.hpp"

namespace deepreg {

Svd decompose(const CMatrix& op) {
  if (op.rows() != op.cols()) throw Error(ErrorCode::DimensionMismatch, "decompose expects a square matrix");
  if (!op.allFinite()) throw Error(ErrorCode::NumericalFailure, "operator has non-finite entries");

  Eigen::JacobiSVD<CMatrix> solver(op, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Svd svd{solver.matrixU(), solver.singularValues(), solver.matrixV()};
  if (!svd.U.allFinite() || !svd.V.allFinite() || !svd.D.allFinite()) {
    throw Error(ErrorCode::NumericalFailure, "SVD produced non-finite factors");
  }

  for (Eigen::Index j = 0; j < svd.size(); ++j) {
    Eigen::Index arg = 0;
    double best = -1.0;
    for (Eigen::Index i = 0; i < svd.U.rows(); ++i) {
      const double a = std::abs(svd.U(i, j));
      if (a > best) {
        best = a;
        arg = i;
      }
    }
    const Complex phase = std::conj(svd.U(arg, j)) / best;
    svd.U.col(j) *= phase;
    svd.V.col(j) *= phase;
    svd.U(arg, j) = Complex(std::abs(svd.U(arg, j)), 0.0);
  }
  return svd;
}

Projection project(const Svd& svd, const CVector& rhs) {
  if (rhs.size() != svd.U.rows()) {
    throw Error(ErrorCode::DimensionMismatch, "rhs length " + std::to_string(rhs.size()) +
                                                   " does not match operator size " +
                                                   std::to_string(svd.U.rows()));
  }
  return {svd.U.adjoint() * rhs};
}

CMatrix project_all(const Svd& svd, const CMatrix& patterns) {
  if (patterns.rows() != svd.U.rows()) throw Error(ErrorCode::DimensionMismatch, "pattern length mismatch");
  return svd.U.adjoint() * patterns;
}

TikhonovResult tikhonov_solution(const Svd& svd, const Projection& proj, double alpha) {
  if (proj.coeffs.size() != svd.size()) throw Error(ErrorCode::DimensionMismatch, "projection length mismatch");
  if (!(alpha >= 0.0)) throw Error(ErrorCode::NumericalFailure, "alpha must be >= 0");

  const RVector d2 = svd.D.cwiseAbs2();
  if (alpha == 0.0 && (svd.D.array() <= 0.0).any()) {
    throw Error(ErrorCode::SingularOperator, "alpha = 0 with a zero singular value");
  }
  const RVector filter = (svd.D.array() / (alpha + d2.array())).matrix();
  TikhonovResult out;
  out.g = svd.V * filter.cast<Complex>().cwiseProduct(proj.coeffs);
  const RVector power = proj.power();
  out.g_norm2 = tikhonov_norm2(d2, power, alpha);
  out.residual2 = tikhonov_residual2(d2, power, alpha);
  return out;
}

double tikhonov_norm2(const RVector& d2, const RVector& power, double alpha) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    const double den = alpha + d2(j);
    if (den > 0.0) acc += power(j) * d2(j) / (den * den);
  }
  return acc;
}

double tikhonov_residual2(const RVector& d2, const RVector& power, double alpha) {
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d2.size(); ++j) {
    const double den = alpha + d2(j);
    // a zero singular value leaves its component entirely in the residual
    acc += den > 0.0 ? power(j) * alpha * alpha / (den * den) : power(j);
  }
  return acc;
}

void export_picard(const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& patterns,
                   const std::filesystem::path& path) {
  if (lib.patterns.rows() != svd.U.rows()) throw Error(ErrorCode::DimensionMismatch, "library/operator size mismatch");
  CMatrix selected(lib.patterns.rows(), static_cast<Eigen::Index>(patterns.size()));
  for (std::size_t c = 0; c < patterns.size(); ++c) {
    if (patterns[c] >= lib.n_patterns()) throw Error(ErrorCode::DimensionMismatch, "pattern index out of range");
    selected.col(static_cast<Eigen::Index>(c)) = lib.patterns.col(static_cast<Eigen::Index>(patterns[c]));
  }
  const CMatrix coeffs = project_all(svd, selected);

  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "j,D";
  for (std::size_t n : patterns) out << ",pattern_" << n;
  out << '\n' << std::setprecision(17);
  for (Eigen::Index j = 0; j < svd.size(); ++j) {
    out << (j + 1) << ',' << svd.D(j);
    for (Eigen::Index c = 0; c < coeffs.cols(); ++c) out << ',' << std::abs(coeffs(j, c));
    out << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

void save_svd(const Svd& svd, const std::filesystem::path& path) {
  BinaryWriter w(path, {'R', 'S', 'V', 'D'});
  w.complex_matrix(svd.U);
  w.real_vector(svd.D);
  w.complex_matrix(svd.V);
  w.close();
}

Svd load_svd(const std::filesystem::path& path) {
  BinaryReader r(path, {'R', 'S', 'V', 'D'});
  Svd svd;
  svd.U = r.complex_matrix();
  svd.D = r.real_vector();
  svd.V = r.complex_matrix();
  if (svd.U.cols() != svd.D.size() || svd.V.cols() != svd.D.size()) {
    throw Error(ErrorCode::DimensionMismatch, path.string() + ": inconsistent SVD factors");
  }
  return svd;
}

}  // namespace deepreg
