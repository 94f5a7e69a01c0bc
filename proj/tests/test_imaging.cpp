#include <doctest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numbers>
#include <sstream>

#include "deepreg/error.hpp"
#include "deepreg/imaging.hpp"
#include "test_helpers.hpp"

using namespace deepreg;

namespace {

SceneConfig small_scene() {
  SceneConfig cfg;
  cfg.n_sensors = 12;
  cfg.wavenumber = 2.0 * std::numbers::pi;
  cfg.cracks = {Crack{{0.0, 0.0}, 0.8, 0.0, 0, 1.0}};
  return cfg;
}

Svd scene_svd(const SceneConfig& cfg) { return decompose(add_noise(build_operator(cfg), 0.1, 3)); }

RegMap uniform_map(const RhsLibrary& lib, double alpha) {
  RegMap m;
  m.index = all_patterns(lib);
  m.alpha.assign(m.index.size(), alpha);
  m.flag.assign(m.index.size(), RegFlag::Ok);
  return m;
}

RegMap random_map(const RhsLibrary& lib, SplitMix64& rng) {
  RegMap m = uniform_map(lib, 0.0);
  for (double& a : m.alpha) a = std::pow(10.0, rng.uniform(-6.0, -2.0));
  return m;
}

// Direct double loop: g for every (p, s) from the dense Tikhonov formula.
std::vector<double> brute_force_lsm(const Svd& svd, const RhsLibrary& lib, const RegMap& map) {
  std::vector<double> out(lib.n_points());
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lib.n_orientations(); ++s) {
      const std::size_t n = lib.index(p, s);
      const TikhonovResult t =
          tikhonov_solution(svd, project(svd, lib.patterns.col(static_cast<Eigen::Index>(n))), map.alpha[n]);
      best = std::min(best, t.g.squaredNorm());
    }
    out[p] = 1.0 / best;
  }
  return out;
}

IndicatorImage flat_image(int nx, int ny, double v) {
  IndicatorImage img;
  img.nx = nx;
  img.ny = ny;
  img.values.assign(static_cast<std::size_t>(nx * ny), v);
  return img;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("LSM image equals the brute-force double loop") {
  const SceneConfig cfg = small_scene();
  const Svd svd = scene_svd(cfg);
  SplitMix64 rng(1);
  for (auto [nx, ny, ns] : {std::tuple{2, 2, 3}, std::tuple{3, 3, 4}}) {
    const RhsLibrary lib = build_rhs_library(cfg, nx, ny, ns);
    const RegMap map = random_map(lib, rng);
    const IndicatorImage img = lsm_image(svd, lib, map, "morozov");
    const auto oracle = brute_force_lsm(svd, lib, map);
    CHECK(img.tag == "morozov");
    CHECK(img.floored == 0);
    for (std::size_t p = 0; p < oracle.size(); ++p) CHECK(std::abs(img.values[p] - oracle[p]) <= 1e-12 * oracle[p]);
  }
}

TEST_CASE("indicator is the reciprocal of the solution norm") {
  // F = I, alpha = 0 -> g = u; a column with norm 2 gives 1/4.
  Svd svd = decompose(CMatrix::Identity(3, 3));
  RhsLibrary lib;
  lib.patterns = CMatrix::Zero(3, 1);
  lib.patterns(1, 0) = 2.0;
  lib.nx = lib.ny = 1;
  lib.grid = {{0, 0}};
  lib.orientations = {0.0};
  CHECK(lsm_image(svd, lib, uniform_map(lib, 0.0)).values[0] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("single orientation is the identity selection") {
  const SceneConfig cfg = small_scene();
  const Svd svd = scene_svd(cfg);
  const RhsLibrary lib = build_rhs_library(cfg, 3, 2, 1);
  const RegMap map = uniform_map(lib, 1e-4);
  const IndicatorImage img = lsm_image(svd, lib, map);
  const RVector d2 = svd.D.cwiseAbs2();
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    const RVector power = project(svd, lib.patterns.col(static_cast<Eigen::Index>(p))).power();
    CHECK(img.values[p] == doctest::Approx(1.0 / tikhonov_norm2(d2, power, 1e-4)).epsilon(1e-14));
  }
}

TEST_CASE("duplicated orientation leaves the image unchanged") {
  const SceneConfig cfg = small_scene();
  const Svd svd = scene_svd(cfg);
  const RhsLibrary lib = build_rhs_library(cfg, 3, 3, 2);
  RhsLibrary dup = lib;
  dup.orientations = {lib.orientations[0], lib.orientations[1], lib.orientations[1]};
  dup.patterns.resize(lib.patterns.rows(), static_cast<Eigen::Index>(dup.n_patterns()));
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    for (std::size_t s = 0; s < 3; ++s) {
      dup.patterns.col(static_cast<Eigen::Index>(dup.index(p, s))) =
          lib.patterns.col(static_cast<Eigen::Index>(lib.index(p, std::min<std::size_t>(s, 1))));
    }
  }
  const IndicatorImage a = lsm_image(svd, lib, uniform_map(lib, 1e-5));
  const IndicatorImage b = lsm_image(svd, dup, uniform_map(dup, 1e-5));
  CHECK(a.values == b.values);
}

TEST_CASE("scaling every solution by c scales the indicator by 1/c^2") {
  const SceneConfig cfg = small_scene();
  const Svd svd = scene_svd(cfg);
  const RhsLibrary lib = build_rhs_library(cfg, 3, 3, 3);
  RhsLibrary scaled = lib;
  scaled.patterns *= 3.0;
  const IndicatorImage a = lsm_image(svd, lib, uniform_map(lib, 1e-5));
  const IndicatorImage b = lsm_image(svd, scaled, uniform_map(lib, 1e-5));
  for (std::size_t p = 0; p < a.values.size(); ++p) CHECK(b.values[p] == doctest::Approx(a.values[p] / 9.0));
}

TEST_CASE("zero-norm solutions are clamped to the floor") {
  Svd svd = decompose(CMatrix::Identity(2, 2));
  RhsLibrary lib;
  lib.patterns = CMatrix::Zero(2, 1);
  lib.nx = lib.ny = 1;
  lib.grid = {{0, 0}};
  lib.orientations = {0.0};
  const IndicatorImage img = lsm_image(svd, lib, uniform_map(lib, 0.1));
  CHECK(img.floored == 1);
  CHECK(img.values[0] == doctest::Approx(1.0 / kIndicatorFloor));
}

TEST_CASE("lsm_image needs a dense map") {
  const SceneConfig cfg = small_scene();
  const Svd svd = scene_svd(cfg);
  const RhsLibrary lib = build_rhs_library(cfg, 2, 2, 2);
  RegMap partial = uniform_map(lib, 1e-3);
  partial.index.pop_back();
  partial.alpha.pop_back();
  partial.flag.pop_back();
  CHECK_THROWS_AS(lsm_image(svd, lib, partial), Error);
}

TEST_CASE("masks") {
  SceneConfig cfg = small_scene();  // crack from (-0.4, 0) to (0.4, 0)
  const RhsLibrary lib = build_rhs_library(cfg, 5, 5, 1);  // spacing 0.5
  const RegionMask zero = build_masks(cfg, lib, 0.0);
  // only (0, 0) lies on the segment
  int count = 0;
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    if (zero.defect[p]) {
      ++count;
      CHECK(lib.grid[p].x == doctest::Approx(0.0));
      CHECK(lib.grid[p].y == doctest::Approx(0.0));
    }
  }
  CHECK(count == 1);
  const auto bg = zero.background();
  for (std::size_t p = 0; p < bg.size(); ++p) CHECK(bg[p] + zero.defect[p] == 1);

  const RegionMask wide = build_masks(cfg, lib, 0.5);
  count = 0;
  for (auto d : wide.defect) count += d;
  // (+-0.5, 0), (0, 0), (0, +-0.5); the corners (+-0.5, +-0.5) are 0.51 away
  CHECK(count == 5);

  try {
    build_masks(cfg, lib, 10.0);
    FAIL("expected EmptyBackground");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBackground);
  }
}

TEST_CASE("distance to a crack segment") {
  const Crack c{{0.0, 0.0}, 2.0, std::numbers::pi / 2, 0, 1.0};  // (0,-1) to (0,1)
  CHECK(distance_to_crack({0.5, 0.2}, c) == doctest::Approx(0.5));
  CHECK(distance_to_crack({0.0, 2.0}, c) == doctest::Approx(1.0));
  CHECK(distance_to_crack({3.0, -5.0}, c) == doctest::Approx(5.0));
}

TEST_CASE("contrast examples") {
  RegionMask mask;
  mask.nx = 4;
  mask.ny = 4;
  mask.defect.assign(16, 0);
  mask.defect[5] = 1;

  const ContrastReport flat = contrast(flat_image(4, 4, 7.0), mask);
  CHECK(flat.c_mean == doctest::Approx(1.0));
  CHECK(flat.c_max == doctest::Approx(1.0));

  IndicatorImage img = flat_image(4, 4, 1.0);
  img.values[5] = 10.0;
  const ContrastReport r = contrast(img, mask);
  CHECK(r.c_mean == doctest::Approx(10.0));
  CHECK(r.c_max == doctest::Approx(10.0));

  RegionMask all = mask;
  all.defect.assign(16, 1);
  try {
    contrast(img, all);
    FAIL("expected EmptyBackground");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyBackground);
  }
  RegionMask none = mask;
  none.defect.assign(16, 0);
  try {
    contrast(img, none);
    FAIL("expected EmptyDefect");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::EmptyDefect);
  }
}

TEST_CASE("contrast is scale invariant") {
  SplitMix64 rng(2);
  RegionMask mask;
  mask.nx = 5;
  mask.ny = 5;
  mask.defect.assign(25, 0);
  for (int i : {6, 7, 12}) mask.defect[static_cast<std::size_t>(i)] = 1;
  IndicatorImage img = flat_image(5, 5, 0.0);
  for (double& v : img.values) v = rng.uniform(0.1, 5.0);
  const ContrastReport a = contrast(img, mask);
  for (double& v : img.values) v *= 123.0;
  const ContrastReport b = contrast(img, mask);
  CHECK(b.c_mean == doctest::Approx(a.c_mean).epsilon(1e-13));
  CHECK(b.c_max == doctest::Approx(a.c_max).epsilon(1e-13));
  CHECK(a.c_max >= a.c_mean);
}

TEST_CASE("map misfit") {
  SplitMix64 rng(3);
  RegMap a;
  a.index = {0, 1, 2, 3};
  a.alpha = {1.0, 2.0, 3.0, 4.0};
  a.flag.assign(4, RegFlag::Ok);
  for (double v : map_misfit(a, a)) CHECK(v == 0.0);
  RegMap b = a;
  for (double& v : b.alpha) v += 0.5;
  for (double v : map_misfit(a, b)) CHECK(v == doctest::Approx(0.5));
  for (double& v : b.alpha) v = rng.uniform(0.0, 5.0);
  const auto m = map_misfit(a, b);
  for (std::size_t i = 0; i < 4; ++i) CHECK(m[i] == std::abs(a.alpha[i] - b.alpha[i]));
  b.index = {0, 1, 2, 4};
  try {
    map_misfit(a, b);
    FAIL("expected DimensionMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::DimensionMismatch);
  }
}

TEST_CASE("PGM, PBM and CSV writers") {
  const auto dir = testutil::scratch_dir("imaging_io");
  // 3 x 2 image; row iy = 1 is written first
  const std::vector<double> values{0.0, 0.5, 1.0, 2.0, 2.0, 2.0};
  write_pgm(values, 3, 2, 0.0, 2.0, dir / "img.pgm");
  const std::string pgm = slurp(dir / "img.pgm");
  std::istringstream head(pgm);
  std::string magic, comment_tag, min_field, max_field;
  head >> magic >> comment_tag >> min_field >> max_field;
  CHECK(magic == "P5");
  CHECK(comment_tag == "#");
  CHECK(min_field == "min=0");
  CHECK(max_field == "max=2");
  int w = 0, h = 0, maxval = 0;
  head >> w >> h >> maxval;
  CHECK(w == 3);
  CHECK(h == 2);
  CHECK(maxval == 65535);
  const std::string body = pgm.substr(pgm.size() - 12);
  auto level = [&body](int i) {
    return (static_cast<unsigned char>(body[2 * i]) << 8) | static_cast<unsigned char>(body[2 * i + 1]);
  };
  CHECK(level(0) == 65535);  // top row = largest y
  CHECK(level(3) == 0);
  CHECK(level(4) == 16384);  // 0.5 / 2 * 65535 rounded
  CHECK(level(5) == 32768);

  write_pbm({1, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, 1, 0, 0, 0, 0, 0, 0}, 9, 2, dir / "mask.pbm");
  const std::string pbm = slurp(dir / "mask.pbm");
  CHECK(pbm.substr(0, 7) == "P4\n9 2\n");
  REQUIRE(pbm.size() == 7 + 4);
  CHECK(static_cast<unsigned char>(pbm[7]) == 0x20);   // row y=1: ix 2
  CHECK(static_cast<unsigned char>(pbm[8]) == 0x00);
  CHECK(static_cast<unsigned char>(pbm[9]) == 0x80);   // row y=0: ix 0
  CHECK(static_cast<unsigned char>(pbm[10]) == 0x80);  // row y=0: ix 8
}
