#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>

#include "deepreg/error.hpp"
#include "deepreg/morozov.hpp"
#include "test_helpers.hpp"

using namespace deepreg;

namespace {

RVector vec(std::initializer_list<double> v) {
  RVector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

struct Instance {
  RVector d2;
  RVector power;
};

Instance random_instance(SplitMix64& rng, int n) {
  Instance in{RVector(n), RVector(n)};
  for (int j = 0; j < n; ++j) {
    const double d = std::pow(10.0, rng.uniform(-3.0, 0.0));
    in.d2(j) = d * d;
    in.power(j) = std::pow(10.0, rng.uniform(-2.0, 1.0));
  }
  std::sort(in.d2.data(), in.d2.data() + n, std::greater<>());
  return in;
}

// Bisection in long double, independent of the library.
double oracle_root(double eta, const RVector& d2, const RVector& power) {
  auto f = [&](long double a) {
    long double acc = 0.0L;
    for (Eigen::Index j = 0; j < d2.size(); ++j) {
      const long double den = a + d2(j);
      acc += (a - static_cast<long double>(eta) * eta * d2(j)) / (den * den) * power(j);
    }
    return acc;
  };
  long double lo = 0.0L;
  long double hi = static_cast<long double>(eta) * eta * d2.maxCoeff();
  for (int it = 0; it < 300; ++it) {
    const long double mid = 0.5L * (lo + hi);
    (f(mid) < 0.0L ? lo : hi) = mid;
  }
  return static_cast<double>(0.5L * (lo + hi));
}

}  // namespace

TEST_CASE("single-mode discrepancy vanishes at eta^2 D^2") {
  CHECK(discrepancy(0.25, 0.5, vec({1.0}), vec({1.0})) == 0.0);
  CHECK(solve_alpha(0.5, vec({1.0}), vec({1.0})) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("discrepancy at alpha = 0") {
  const RVector d2 = vec({4.0, 1.0, 0.25});
  const RVector p = vec({1.0, 2.0, 0.5});
  const double eta = 0.3;
  const double expected = -eta * eta * (1.0 / 4.0 + 2.0 / 1.0 + 0.5 / 0.25);
  CHECK(discrepancy(0.0, eta, d2, p) == doctest::Approx(expected).epsilon(1e-14));
  CHECK(discrepancy(0.0, eta, d2, p) < 0.0);
}

TEST_CASE("discrepancy sign agrees with the residual identity it encodes") {
  SplitMix64 rng(12);
  const CMatrix F = testutil::random_cmatrix(rng, 3, 3);
  const Svd svd = decompose(F);
  const Projection proj = project(svd, testutil::random_cvector(rng, 3));
  const double eta = 0.4;
  for (double alpha : {1e-4, 1e-3, 1e-2, 0.1, 1.0, 10.0}) {
    const TikhonovResult t = tikhonov_solution(svd, proj, alpha);
    const CVector g = t.g;
    const double residual2 = (F * g - svd.U * proj.coeffs).squaredNorm();
    const double identity = residual2 - eta * eta * alpha * g.squaredNorm();
    const double f = discrepancy(alpha, eta, svd, proj);
    CHECK(f * alpha == doctest::Approx(identity).epsilon(1e-8).scale(1e-12));
    CHECK((f > 0) == (identity > 0));
  }
}

TEST_CASE("printed derivative is positive and zero without signal") {
  SplitMix64 rng(13);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng, 8);
    const double alpha = std::pow(10.0, rng.uniform(-8.0, 1.0));
    CHECK(discrepancy_derivative(alpha, rng.uniform(0.05, 0.5), in.d2, in.power) > 0.0);
  }
  CHECK(discrepancy_derivative(0.3, 0.3, vec({1.0, 0.5}), vec({0.0, 0.0})) == 0.0);
}

TEST_CASE("printed derivative equals the derivative of the classical gap") {
  SplitMix64 rng(14);
  for (int i = 0; i < 50; ++i) {
    const Instance in = random_instance(rng, 6);
    const double eta = rng.uniform(0.05, 0.5);
    const double alpha = in.d2(2) * rng.uniform(0.1, 10.0);
    const double h = 1e-5 * alpha;
    const double fd = (morozov_gap(alpha + h, eta, in.d2, in.power) - morozov_gap(alpha - h, eta, in.d2, in.power)) /
                      (2.0 * h);
    CHECK(testutil::rel(discrepancy_derivative(alpha, eta, in.d2, in.power), fd) <= 1e-6);
  }
}

TEST_CASE("discrepancy_slope matches central differences of discrepancy") {
  SplitMix64 rng(15);
  for (int i = 0; i < 50; ++i) {
    const Instance in = random_instance(rng, 6);
    const double eta = rng.uniform(0.05, 0.5);
    const double alpha = in.d2(2) * rng.uniform(0.1, 10.0);
    const double h = 1e-5 * alpha;
    const double fd =
        (discrepancy(alpha + h, eta, in.d2, in.power) - discrepancy(alpha - h, eta, in.d2, in.power)) / (2.0 * h);
    const double s = discrepancy_slope(alpha, eta, in.d2, in.power);
    CHECK(std::abs(s - fd) <= 1e-6 * std::max(std::abs(fd), discrepancy_derivative(alpha, eta, in.d2, in.power)));
  }
}

TEST_CASE("three-mode regression root") {
  const RVector d2 = vec({1.0, 0.25, 0.01});
  const RVector p = vec({1.0, 1.0, 1.0});
  const double alpha = solve_alpha(0.3, d2, p);
  CHECK(alpha == doctest::Approx(9.516990313014908e-4).epsilon(1e-10));
  CHECK(alpha == doctest::Approx(oracle_root(0.3, d2, p)).epsilon(1e-10));
  // The printed root balances the residual against eta^2 * alpha * ||g||^2.
  const double res = tikhonov_residual2(d2, p, alpha);
  const double g2 = tikhonov_norm2(d2, p, alpha);
  CHECK(res == doctest::Approx(0.09 * alpha * g2).epsilon(1e-5));
}

TEST_CASE("solve_alpha is homogeneous in the projection") {
  SplitMix64 rng(16);
  for (int i = 0; i < 20; ++i) {
    const Instance in = random_instance(rng, 10);
    const double a = solve_alpha(0.3, in.d2, in.power);
    const double b = solve_alpha(0.3, in.d2, (in.power * 49.0).eval());
    CHECK(b == doctest::Approx(a).epsilon(1e-9));
  }
}

TEST_CASE("solve_alpha tolerance, bracket and oracle on random instances") {
  SplitMix64 rng(17);
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(rng.uniform(0.0, 50.0));
    const Instance in = random_instance(rng, n);
    const double eta = rng.uniform(0.05, 0.5);
    double alpha = 0.0;
    REQUIRE_NOTHROW(alpha = solve_alpha(eta, in.d2, in.power));
    CHECK(alpha > 0.0);
    CHECK(alpha <= eta * eta * in.d2.maxCoeff() * (1 + 1e-15));
    if (i % 10 == 0) CHECK(alpha == doctest::Approx(oracle_root(eta, in.d2, in.power)).epsilon(1e-9));
    const double res = tikhonov_residual2(in.d2, in.power, alpha);
    const double g2 = tikhonov_norm2(in.d2, in.power, alpha);
    CHECK(std::abs(res - eta * eta * alpha * g2) <= 1e-6 * res);
  }
}

TEST_CASE("larger eta gives larger alpha") {
  SplitMix64 rng(18);
  for (int i = 0; i < 100; ++i) {
    const Instance in = random_instance(rng, 12);
    double prev = 0.0;
    for (double eta = 0.05; eta <= 0.5; eta += 0.05) {
      const double a = solve_alpha(eta, in.d2, in.power);
      CHECK(a > prev);
      prev = a;
    }
  }
}

TEST_CASE("solve_alpha errors") {
  try {
    solve_alpha(0.3, vec({1.0, 0.5}), vec({0.0, 0.0}));
    FAIL("expected NoSignal");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoSignal);
  }
  try {
    solve_alpha(0.3, vec({0.0, 0.0}), vec({1.0, 1.0}));
    FAIL("expected NoRoot");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::NoRoot);
  }
}

TEST_CASE("svd overloads agree with the spectral ones") {
  SplitMix64 rng(19);
  const Svd svd = decompose(testutil::random_cmatrix(rng, 5, 5));
  const Projection proj = project(svd, testutil::random_cvector(rng, 5));
  const RVector d2 = svd.D.cwiseAbs2();
  CHECK(discrepancy(0.1, 0.3, svd, proj) == discrepancy(0.1, 0.3, d2, proj.power()));
  CHECK(discrepancy_derivative(0.1, 0.3, svd, proj) == discrepancy_derivative(0.1, 0.3, d2, proj.power()));
  CHECK(solve_alpha(0.3, svd, proj) == solve_alpha(0.3, d2, proj.power()));
}

TEST_CASE("regmaps: singleton, permutation and NoSignal policy") {
  SplitMix64 rng(20);
  const Svd svd = decompose(testutil::random_cmatrix(rng, 6, 6));
  RhsLibrary lib;
  lib.patterns = testutil::random_cmatrix(rng, 6, 4);
  lib.patterns.col(2).setZero();
  lib.nx = 2;
  lib.ny = 1;
  lib.grid = {{0, 0}, {1, 0}};
  lib.orientations = {0.0, 1.5};

  const RegMap one = build_regmap(0.3, svd, lib, {1});
  REQUIRE(one.size() == 1);
  CHECK(one.alpha[0] == doctest::Approx(solve_alpha(0.3, svd, project(svd, lib.patterns.col(1)))).epsilon(1e-13));
  CHECK(one.eta == 0.3);

  const RegMap fwd = build_regmap(0.3, svd, lib, {0, 1, 2, 3});
  const RegMap rev = build_regmap(0.3, svd, lib, {3, 2, 1, 0});
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(fwd.alpha[i] == rev.alpha[3 - i]);
    CHECK(fwd.index[i] == rev.index[3 - i]);
  }
  CHECK(fwd.flag[2] == RegFlag::NoSignal);
  CHECK(fwd.alpha[2] == 0.0);
  for (std::size_t i : {0u, 1u, 3u}) {
    CHECK(fwd.flag[i] == RegFlag::Ok);
    CHECK(fwd.alpha[i] > 0.0);
  }
  CHECK_THROWS_AS(build_regmap(0.3, svd, lib, {4}), Error);
}

TEST_CASE("regmap CSV round trip") {
  const auto dir = testutil::scratch_dir("regmap_csv");
  SplitMix64 rng(22);
  const Svd svd = decompose(testutil::random_cmatrix(rng, 4, 4));
  RhsLibrary lib;
  lib.patterns = testutil::random_cmatrix(rng, 4, 1);
  lib.nx = 1;
  lib.ny = 1;
  lib.grid = {{0.25, -0.5}};
  lib.orientations = {0.0};
  const RegMap map = build_regmap(0.3, svd, lib, all_patterns(lib));
  write_regmap_csv(map, lib, dir / "m.csv");
  std::ifstream in(dir / "m.csv");
  std::string header, row, extra;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "n,p,s,x,y,phi,alpha,flag");
  CHECK_FALSE(static_cast<bool>(std::getline(in, extra)));
  const RegMap back = read_regmap_csv(dir / "m.csv");
  REQUIRE(back.size() == 1);
  CHECK(back.alpha[0] == map.alpha[0]);
  CHECK(back.index[0] == 0);
  CHECK(back.flag[0] == RegFlag::Ok);
  try {
    read_regmap_csv(dir / "absent.csv");
    FAIL("expected MissingInput");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::MissingInput);
  }
}
