#include "deepreg/forward_model.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "deepreg/error.hpp"
#include "deepreg/rng.hpp"

namespace deepreg {
namespace {

constexpr double kCoincidenceTol = 1e-12;

Complex hankel1(int order, double x) {
  return {std::cyl_bessel_j(static_cast<double>(order), x),
          std::cyl_neumann(static_cast<double>(order), x)};
}

void require_separated(Point x, Point y, double scale) {
  if (distance(x, y) <= kCoincidenceTol * std::max(1.0, scale)) {
    throw Error(ErrorCode::CoincidentPoints,
                "points (" + std::to_string(x.x) + ", " + std::to_string(x.y) + ") and (" +
                    std::to_string(y.x) + ", " + std::to_string(y.y) + ") coincide");
  }
}

bool inside_square(Point p, double h) {
  const double slack = 1e-12 * h;
  return std::abs(p.x) <= h + slack && std::abs(p.y) <= h + slack;
}

}  // namespace

void SceneConfig::validate() const {
  if (n_sensors < 4) throw Error(ErrorCode::ConfigError, "n_sensors must be >= 4");
  if (!(wavenumber > 0.0)) throw Error(ErrorCode::ConfigError, "wavenumber must be > 0");
  if (!(half_width > 0.0)) throw Error(ErrorCode::ConfigError, "half_width must be > 0");
  if (!(sensor_radius > 0.0)) throw Error(ErrorCode::ConfigError, "sensor_radius must be > 0");
  if (!(noise_delta >= 0.0 && noise_delta < 1.0)) {
    throw Error(ErrorCode::ConfigError, "noise_delta must lie in [0, 1)");
  }
  for (const Crack& c : cracks) {
    if (!(c.length > 0.0)) throw Error(ErrorCode::ConfigError, "crack length must be > 0");
    if (c.n_quad < 0) throw Error(ErrorCode::ConfigError, "crack n_quad must be >= 0");
    const double hx = 0.5 * c.length * std::cos(c.orientation);
    const double hy = 0.5 * c.length * std::sin(c.orientation);
    const Point a{c.center.x - hx, c.center.y - hy};
    const Point b{c.center.x + hx, c.center.y + hy};
    if (!inside_square(a, half_width) || !inside_square(b, half_width)) {
      throw Error(ErrorCode::ConfigError, "crack support leaves the sampling square");
    }
  }
}

Complex green(Point x, Point y, double k) {
  require_separated(x, y, distance(x, Point{}) + distance(y, Point{}));
  return Complex(0.0, 0.25) * hankel1(0, k * distance(x, y));
}

std::pair<Complex, Complex> green_gradient_y(Point x, Point y, double k) {
  require_separated(x, y, distance(x, Point{}) + distance(y, Point{}));
  const double r = distance(x, y);
  // d/dr H0(kr) = -k H1(kr), grad_y r = (y - x) / r
  const Complex radial = Complex(0.0, 0.25) * (-k) * hankel1(1, k * r) / r;
  return {radial * (y.x - x.x), radial * (y.y - x.y)};
}

std::vector<Point> sensor_positions(const SceneConfig& cfg) {
  std::vector<Point> out(static_cast<std::size_t>(cfg.n_sensors));
  for (int j = 0; j < cfg.n_sensors; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / cfg.n_sensors;
    out[static_cast<std::size_t>(j)] = {cfg.sensor_radius * std::cos(theta),
                                        cfg.sensor_radius * std::sin(theta)};
  }
  return out;
}

int quadrature_count(const Crack& crack, double k) {
  if (crack.n_quad > 0) return crack.n_quad;
  const int n = static_cast<int>(std::ceil(8.0 * crack.length * k / (2.0 * std::numbers::pi)));
  return std::max(n, 1);
}

std::vector<Point> crack_points(const Crack& crack, double k) {
  const int n = quadrature_count(crack, k);
  const double tx = std::cos(crack.orientation);
  const double ty = std::sin(crack.orientation);
  std::vector<Point> pts(static_cast<std::size_t>(n));
  for (int q = 0; q < n; ++q) {
    // midpoint rule along the segment
    const double s = crack.length * ((q + 0.5) / n - 0.5);
    pts[static_cast<std::size_t>(q)] = {crack.center.x + s * tx, crack.center.y + s * ty};
  }
  return pts;
}

Operator build_operator(const SceneConfig& cfg) {
  cfg.validate();
  const auto sensors = sensor_positions(cfg);
  const auto m = static_cast<Eigen::Index>(sensors.size());
  const double k = cfg.wavenumber;

  Operator op;
  op.entries = CMatrix::Zero(m, m);
  for (const Crack& crack : cfg.cracks) {
    const double tau = crack.contrast * crack.length / quadrature_count(crack, k);
    for (const Point& z : crack_points(crack, k)) {
      CVector g(m);
      for (Eigen::Index j = 0; j < m; ++j) g(j) = green(sensors[static_cast<std::size_t>(j)], z, k);
      // F[j][i] += tau * G(xi_j, z) * G(z, x_i); G is reciprocal so one column serves both
      op.entries.noalias() += tau * g * g.transpose();
    }
  }
  return op;
}

Operator add_noise(const Operator& op, double delta, std::uint64_t seed) {
  if (!(delta >= 0.0)) throw Error(ErrorCode::ConfigError, "noise delta must be >= 0");
  if (delta == 0.0) return op;
  const Eigen::Index m = op.entries.rows();
  SplitMix64 rng(seed);
  CMatrix noise(m, m);
  for (Eigen::Index r = 0; r < m; ++r) {
    for (Eigen::Index c = 0; c < m; ++c) {
      const double re = rng.uniform(-delta, delta);
      const double im = rng.uniform(-delta, delta);
      noise(r, c) = Complex(re, im);
    }
  }
  Operator out;
  out.entries = op.entries + noise * op.entries;
  out.is_noisy = true;
  out.delta = delta;
  return out;
}

RhsLibrary build_rhs_library(const SceneConfig& cfg, int grid_nx, int grid_ny, int n_orientations) {
  cfg.validate();
  if (grid_nx < 1 || grid_ny < 1) throw Error(ErrorCode::ConfigError, "grid dimensions must be >= 1");
  if (n_orientations < 1) throw Error(ErrorCode::ConfigError, "n_orientations must be >= 1");

  RhsLibrary lib;
  lib.nx = grid_nx;
  lib.ny = grid_ny;
  const double h = cfg.half_width;
  auto axis = [h](int i, int n) { return n == 1 ? 0.0 : -h + 2.0 * h * i / (n - 1); };
  lib.grid.reserve(static_cast<std::size_t>(grid_nx) * grid_ny);
  for (int iy = 0; iy < grid_ny; ++iy) {
    for (int ix = 0; ix < grid_nx; ++ix) lib.grid.push_back({axis(ix, grid_nx), axis(iy, grid_ny)});
  }
  for (int s = 0; s < n_orientations; ++s) {
    lib.orientations.push_back(std::numbers::pi * s / n_orientations);
  }

  const auto sensors = sensor_positions(cfg);
  const auto m = static_cast<Eigen::Index>(sensors.size());
  lib.patterns.resize(m, static_cast<Eigen::Index>(lib.n_patterns()));
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto [gx, gy] = green_gradient_y(sensors[static_cast<std::size_t>(j)], lib.grid[p], cfg.wavenumber);
      for (std::size_t s = 0; s < lib.n_orientations(); ++s) {
        const double phi = lib.orientations[s];
        lib.patterns(j, static_cast<Eigen::Index>(lib.index(p, s))) = std::cos(phi) * gx + std::sin(phi) * gy;
      }
    }
  }
  return lib;
}

}  // namespace deepreg
