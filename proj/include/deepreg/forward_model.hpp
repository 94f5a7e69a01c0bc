#pragma once

// Desk-scale scattering model: a 2D scalar Helmholtz kernel with Born point
// scatterers along straight cracks, a noisy perturbation of the resulting
// operator and the dipole pattern library used as right-hand sides.

#include <cstddef>
#include <cstdint>
#include <utility>
#include <vector>

#include "deepreg/types.hpp"

namespace deepreg {

struct Crack {
  Point center;
  double length = 0.0;
  double orientation = 0.0;  // angle of the segment direction, radians
  int n_quad = 0;            // 0 selects ceil(8 * length * k / 2pi)
  double contrast = 1.0;     // tau_q = contrast * length / n_quad
};

struct SceneConfig {
  double half_width = 1.0;     // sampling square is [-h, h]^2
  double sensor_radius = 2.0;  // sensors/sources on a circle of this radius
  int n_sensors = 64;
  double wavenumber = 10.0 * 3.14159265358979323846 / 2.0;
  std::vector<Crack> cracks;
  double noise_delta = 0.0;
  std::uint64_t rng_seed = 0;

  /// Throws ConfigError when an invariant is violated.
  void validate() const;
};

struct Operator {
  CMatrix entries;
  bool is_noisy = false;
  double delta = 0.0;
};

struct RhsLibrary {
  CMatrix patterns;  // M x (N_p * N_s), column n = p * N_s + s
  int nx = 0;
  int ny = 0;
  std::vector<Point> grid;          // N_p points, p = iy * nx + ix
  std::vector<double> orientations;  // N_s normal angles on [0, pi)

  std::size_t n_points() const { return grid.size(); }
  std::size_t n_orientations() const { return orientations.size(); }
  std::size_t n_patterns() const { return grid.size() * orientations.size(); }

  std::size_t index(std::size_t p, std::size_t s) const { return p * orientations.size() + s; }
  std::pair<std::size_t, std::size_t> split(std::size_t n) const {
    return {n / orientations.size(), n % orientations.size()};
  }
};

/// Outgoing 2D Helmholtz Green's function (i/4) H0^(1)(k |x - y|).
Complex green(Point x, Point y, double k);

/// Gradient of green(x, y, k) with respect to y.
std::pair<Complex, Complex> green_gradient_y(Point x, Point y, double k);

std::vector<Point> sensor_positions(const SceneConfig& cfg);
int quadrature_count(const Crack& crack, double k);
std::vector<Point> crack_points(const Crack& crack, double k);

Operator build_operator(const SceneConfig& cfg);

/// (I + N) F with Re/Im of every N entry uniform on [-delta, delta]. Entries
/// are drawn row-major from SplitMix64(seed), real part before imaginary part.
Operator add_noise(const Operator& op, double delta, std::uint64_t seed);

/// Inclusive nx x ny grid over the sampling square, n_orientations normals at
/// angles pi * s / n_orientations.
RhsLibrary build_rhs_library(const SceneConfig& cfg, int grid_nx, int grid_ny, int n_orientations);

}  // namespace deepreg
