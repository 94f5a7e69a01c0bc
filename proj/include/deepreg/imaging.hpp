#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/morozov.hpp"
#include "deepreg/spectral.hpp"

namespace deepreg {

inline constexpr double kIndicatorFloor = 1e-30;

/// LSM indicator 1 / min_s ||g(x_p, L_s)||^2 on the library grid.
struct IndicatorImage {
  int nx = 0;
  int ny = 0;
  std::vector<double> values;  // p = iy * nx + ix
  std::string tag;             // morozov | net_step1 | net_step2
  std::size_t floored = 0;     // pixels whose norm hit kIndicatorFloor
};

struct RegionMask {
  int nx = 0;
  int ny = 0;
  std::vector<std::uint8_t> defect;  // 1 inside the dilated crack support
  std::vector<std::uint8_t> background() const;
};

struct ContrastReport {
  double c_mean = 0.0;
  double c_max = 0.0;
};

/// regmap must hold an alpha for every library pattern.
IndicatorImage lsm_image(const Svd& svd, const RhsLibrary& lib, const RegMap& regmap, std::string tag = {});

/// Shortest distance from p to the segment of a crack.
double distance_to_crack(Point p, const Crack& crack);

/// defect = grid points within `radius` of any crack segment. Throws
/// EmptyBackground when every point is defect.
RegionMask build_masks(const SceneConfig& cfg, const RhsLibrary& lib, double radius);

/// I_b = rms over background; C_mn = mean(I / I_b), C_mx = max(I / I_b)
/// over the defect region.
ContrastReport contrast(const IndicatorImage& image, const RegionMask& mask);

/// Pointwise |alpha_a - alpha_b|; maps must list the same indices.
std::vector<double> map_misfit(const RegMap& a, const RegMap& b);

/// 16-bit binary PGM, top row = largest y, values quantized linearly on
/// [lo, hi] with a "# min=... max=..." comment for dequantization.
void write_pgm(const std::vector<double>& values, int nx, int ny, double lo, double hi,
               const std::filesystem::path& path);
void write_image_csv(const IndicatorImage& image, const RhsLibrary& lib, const std::filesystem::path& path);
void write_pbm(const std::vector<std::uint8_t>& bits, int nx, int ny, const std::filesystem::path& path);
void write_grid_csv(const std::vector<double>& values, const RegMap& layout, const RhsLibrary& lib,
                    const std::string& column, const std::filesystem::path& path);

}  // namespace deepreg
