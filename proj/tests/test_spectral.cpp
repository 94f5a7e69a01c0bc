#include <doctest.h>

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>

#include "deepreg/binary_io.hpp"
#include "deepreg/error.hpp"
#include "deepreg/spectral.hpp"
#include "test_helpers.hpp"

using namespace deepreg;
using testutil::random_cmatrix;
using testutil::random_cvector;

namespace {

double orthonormality_error(const CMatrix& Q) {
  return (Q.adjoint() * Q - CMatrix::Identity(Q.cols(), Q.cols())).cwiseAbs().maxCoeff();
}

RhsLibrary single_column_library(const CVector& column) {
  RhsLibrary lib;
  lib.patterns = column;
  lib.nx = 1;
  lib.ny = 1;
  lib.grid = {{0.0, 0.0}};
  lib.orientations = {0.0};
  return lib;
}

std::vector<std::vector<std::string>> read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) cols.push_back(c);
    rows.push_back(cols);
  }
  return rows;
}

}  // namespace

TEST_CASE("decompose the identity") {
  const Svd svd = decompose(CMatrix::Identity(5, 5));
  CHECK((svd.D.array() == 1.0).all());
  CHECK((svd.U - CMatrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-15);
  CHECK((svd.V - CMatrix::Identity(5, 5)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("decompose a diagonal matrix") {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = 1.0;
  m(1, 1) = 3.0;
  const Svd svd = decompose(m);
  CHECK(svd.D(0) == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(svd.D(1) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("random SVD invariants and Gram-matrix eigenvalue oracle") {
  SplitMix64 rng(11);
  for (int n : {3, 6, 17, 40}) {
    const CMatrix F = random_cmatrix(rng, n, n);
    const Svd svd = decompose(F);
    CHECK(orthonormality_error(svd.U) <= 1e-10);
    CHECK(orthonormality_error(svd.V) <= 1e-10);
    const CMatrix recon = svd.U * svd.D.cast<Complex>().asDiagonal() * svd.V.adjoint();
    CHECK((recon - F).norm() / F.norm() <= 1e-10);
    for (Eigen::Index j = 1; j < n; ++j) CHECK(svd.D(j) <= svd.D(j - 1));

    Eigen::SelfAdjointEigenSolver<CMatrix> eig(F.adjoint() * F);
    RVector ev = eig.eigenvalues();
    std::sort(ev.data(), ev.data() + ev.size(), std::greater<>());
    for (Eigen::Index j = 0; j < n; ++j) {
      CHECK(std::abs(svd.D(j) * svd.D(j) - ev(j)) <= 1e-8 * ev(0));
    }
    // phase convention
    for (Eigen::Index j = 0; j < n; ++j) {
      Eigen::Index arg = 0;
      svd.U.col(j).cwiseAbs().maxCoeff(&arg);
      CHECK(svd.U(arg, j).imag() == 0.0);
      CHECK(svd.U(arg, j).real() > 0.0);
    }
  }
}

TEST_CASE("decompose rejects non-finite input") {
  CMatrix m = CMatrix::Identity(3, 3);
  m(1, 2) = Complex(std::numeric_limits<double>::quiet_NaN(), 0.0);
  try {
    decompose(m);
    FAIL("expected NumericalFailure");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NumericalFailure);
  }
}

TEST_CASE("projection basics") {
  SplitMix64 rng(5);
  const Svd svd = decompose(random_cmatrix(rng, 8, 8));
  const Projection e1 = project(svd, svd.U.col(0));
  CHECK(std::abs(e1.coeffs(0) - Complex(1.0, 0.0)) <= 1e-12);
  CHECK(e1.coeffs.tail(7).cwiseAbs().maxCoeff() <= 1e-12);

  const CVector rhs = random_cvector(rng, 8);
  const Projection p = project(svd, rhs);
  CHECK(std::abs(p.coeffs.norm() - rhs.norm()) <= 1e-10 * rhs.norm());
  CHECK((svd.U * p.coeffs - rhs).norm() <= 1e-10 * rhs.norm());
  CHECK((p.power() - p.coeffs.cwiseAbs2()).cwiseAbs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(project(svd, random_cvector(rng, 7)), Error);
}

TEST_CASE("Tikhonov exact inverse at alpha = 0") {
  SplitMix64 rng(8);
  const CMatrix F = random_cmatrix(rng, 6, 6);
  const Svd svd = decompose(F);
  const CVector rhs = random_cvector(rng, 6);
  const TikhonovResult t = tikhonov_solution(svd, project(svd, rhs), 0.0);
  CHECK(t.residual2 == 0.0);
  CHECK((F * t.g - rhs).norm() <= 1e-8 * rhs.norm());
}

TEST_CASE("Tikhonov with a zero singular value and alpha = 0 is singular") {
  CMatrix F = CMatrix::Zero(3, 3);
  F(0, 0) = 2.0;
  F(1, 1) = 1.0;
  const Svd svd = decompose(F);
  try {
    tikhonov_solution(svd, project(svd, CVector::Ones(3)), 0.0);
    FAIL("expected SingularOperator");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularOperator);
  }
  const TikhonovResult t = tikhonov_solution(svd, project(svd, CVector::Ones(3)), 0.5);
  CHECK(t.residual2 >= 1.0);  // the null-space component stays in the residual
}

TEST_CASE("Tikhonov under huge damping vanishes") {
  SplitMix64 rng(9);
  const Svd svd = decompose(random_cmatrix(rng, 5, 5));
  const CVector rhs = random_cvector(rng, 5);
  const double alpha = 1e12 * svd.D(0) * svd.D(0);
  const TikhonovResult t = tikhonov_solution(svd, project(svd, rhs), alpha);
  CHECK(t.g.norm() <= rhs.norm() / alpha * svd.D(0));
  CHECK(t.g.norm() < 1e-11 * rhs.norm());
}

TEST_CASE("Tikhonov matches the normal equations") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 2 + trial % 19;
    const CMatrix F = random_cmatrix(rng, n, n);
    const CVector rhs = random_cvector(rng, n);
    const double alpha = trial == 0 ? 0.1 : rng.uniform(1e-3, 1.0);
    const Svd svd = decompose(F);
    const TikhonovResult t = tikhonov_solution(svd, project(svd, rhs), alpha);
    const CMatrix A = F.adjoint() * F + alpha * CMatrix::Identity(n, n);
    const CVector g = A.lu().solve(F.adjoint() * rhs);
    CHECK((t.g - g).norm() <= 1e-10 * g.norm());
    CHECK(std::abs(t.g_norm2 - g.squaredNorm()) <= 1e-10 * g.squaredNorm());
    const double dense = (F * g - rhs).squaredNorm();
    CHECK(std::abs(t.residual2 - dense) <= 1e-8 * dense);
  }
}

TEST_CASE("Tikhonov local optimality probe") {
  SplitMix64 rng(31);
  for (int trial = 0; trial < 5; ++trial) {
    const CMatrix F = random_cmatrix(rng, 6, 6);
    const CVector rhs = random_cvector(rng, 6);
    const double alpha = rng.uniform(0.01, 1.0);
    const Svd svd = decompose(F);
    const CVector g = tikhonov_solution(svd, project(svd, rhs), alpha).g;
    auto objective = [&](const CVector& x) { return (F * x - rhs).squaredNorm() + alpha * x.squaredNorm(); };
    const double best = objective(g);
    for (int d = 0; d < 100; ++d) {
      CVector dir = random_cvector(rng, 6);
      dir *= 1e-4 * g.norm() / dir.norm();
      CHECK(objective(g + dir) >= best);
    }
  }
}

TEST_CASE("Tikhonov norm decreases and residual increases with alpha") {
  SplitMix64 rng(41);
  const Svd svd = decompose(random_cmatrix(rng, 10, 10));
  const RVector power = project(svd, random_cvector(rng, 10)).power();
  const RVector d2 = svd.D.cwiseAbs2();
  double prev_norm = std::numeric_limits<double>::infinity();
  double prev_res = -1.0;
  for (double a = 1e-6; a < 1e3; a *= 1.7) {
    const double n = tikhonov_norm2(d2, power, a);
    const double r = tikhonov_residual2(d2, power, a);
    CHECK(n < prev_norm);
    CHECK(r > prev_res);
    prev_norm = n;
    prev_res = r;
  }
}

TEST_CASE("Picard export") {
  const auto dir = testutil::scratch_dir("picard");
  {
    const Svd svd = decompose(CMatrix::Identity(4, 4));
    const RhsLibrary lib = single_column_library(CVector::Unit(4, 0));
    export_picard(svd, lib, {0}, dir / "id.csv");
    const auto rows = read_csv(dir / "id.csv");
    REQUIRE(rows.size() == 5);
    CHECK(rows[0] == std::vector<std::string>{"j", "D", "pattern_0"});
    CHECK(rows[1][0] == "1");
    CHECK(std::stod(rows[1][2]) == 1.0);
    for (int j = 2; j <= 4; ++j) CHECK(std::stod(rows[j][2]) == 0.0);
  }
  {
    SplitMix64 rng(2);
    const Svd svd = decompose(random_cmatrix(rng, 6, 6));
    RhsLibrary lib;
    lib.patterns = random_cmatrix(rng, 6, 6);
    lib.nx = 3;
    lib.ny = 1;
    lib.grid = {{0, 0}, {1, 0}, {2, 0}};
    lib.orientations = {0.0, 1.0};
    const std::vector<std::size_t> picks{1, 4, 5};
    export_picard(svd, lib, picks, dir / "rand.csv");
    const auto rows = read_csv(dir / "rand.csv");
    REQUIRE(rows.size() == 7);
    for (const auto& r : rows) CHECK(r.size() == 2 + picks.size());
    for (std::size_t c = 0; c < picks.size(); ++c) {
      const Projection p = project(svd, lib.patterns.col(static_cast<Eigen::Index>(picks[c])));
      for (int j = 0; j < 6; ++j) {
        CHECK(std::abs(std::stod(rows[j + 1][2 + c]) - std::abs(p.coeffs(j))) <= 1e-12);
      }
    }
  }
}

TEST_CASE("SVD cache round trip") {
  const auto dir = testutil::scratch_dir("svd_io");
  SplitMix64 rng(4);
  const Svd svd = decompose(random_cmatrix(rng, 7, 7));
  save_svd(svd, dir / "svd.rsvd");
  const Svd back = load_svd(dir / "svd.rsvd");
  CHECK(back.U == svd.U);
  CHECK(back.D == svd.D);
  CHECK(back.V == svd.V);
  try {
    load_svd(dir / "missing.rsvd");
    FAIL("expected MissingInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingInput);
  }
  // wrong magic
  Operator op;
  op.entries = svd.U;
  save_operator(op, dir / "op.rnop");
  CHECK_THROWS_AS(load_svd(dir / "op.rnop"), Error);
}
