#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/types.hpp"

namespace deepreg {

/// Full SVD F = U diag(D) V^*, D descending. Each column pair (u_j, v_j) is
/// rotated so the largest-modulus entry of u_j is real and positive.
struct Svd {
  CMatrix U;
  RVector D;
  CMatrix V;

  Eigen::Index size() const { return D.size(); }
};

/// Coefficients (u_j^*, u_L) of one right-hand side.
struct Projection {
  CVector coeffs;

  /// |coeffs_j|^2, the only part of a projection the regularization
  /// functionals depend on.
  RVector power() const { return coeffs.cwiseAbs2(); }
};

struct TikhonovResult {
  CVector g;
  double g_norm2 = 0.0;
  double residual2 = 0.0;
};

Svd decompose(const CMatrix& op);
inline Svd decompose(const Operator& op) { return decompose(op.entries); }

Projection project(const Svd& svd, const CVector& rhs);

/// U^* P for a whole pattern matrix; column n holds the coefficients of pattern n.
CMatrix project_all(const Svd& svd, const CMatrix& patterns);

TikhonovResult tikhonov_solution(const Svd& svd, const Projection& proj, double alpha);

// Spectral closed forms on squared coefficient moduli; these are what the
// solvers and losses evaluate per pattern without forming g.
double tikhonov_norm2(const RVector& d2, const RVector& power, double alpha);
double tikhonov_residual2(const RVector& d2, const RVector& power, double alpha);

/// Picard data: columns j (1-based), D_jj, then |(u_j^*, u_L^n)| for each
/// selected pattern n.
void export_picard(const Svd& svd, const RhsLibrary& lib, const std::vector<std::size_t>& patterns,
                   const std::filesystem::path& path);

void save_svd(const Svd& svd, const std::filesystem::path& path);
Svd load_svd(const std::filesystem::path& path);

}  // namespace deepreg
