#include "deepreg/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "deepreg/error.hpp"

namespace deepreg {

std::vector<std::uint8_t> RegionMask::background() const {
  std::vector<std::uint8_t> out(defect.size());
  std::transform(defect.begin(), defect.end(), out.begin(), [](std::uint8_t d) { return d ? 0 : 1; });
  return out;
}

IndicatorImage lsm_image(const Svd& svd, const RhsLibrary& lib, const RegMap& regmap, std::string tag) {
  const std::size_t n_total = lib.n_patterns();
  std::vector<double> alpha(n_total, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < regmap.size(); ++i) {
    if (regmap.index[i] >= n_total) throw Error(ErrorCode::DimensionMismatch, "regmap index outside library");
    alpha[regmap.index[i]] = regmap.alpha[i];
  }
  if (std::any_of(alpha.begin(), alpha.end(), [](double a) { return std::isnan(a); })) {
    throw Error(ErrorCode::DimensionMismatch, "regmap does not cover every library pattern");
  }
  const RVector d2 = svd.D.cwiseAbs2();
  const RMatrix power = project_all(svd, lib.patterns).cwiseAbs2();

  IndicatorImage img;
  img.nx = lib.nx;
  img.ny = lib.ny;
  img.tag = std::move(tag);
  img.values.resize(lib.n_points());
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t s = 0; s < lib.n_orientations(); ++s) {
      const std::size_t n = lib.index(p, s);
      best = std::min(best, tikhonov_norm2(d2, power.col(static_cast<Eigen::Index>(n)), alpha[n]));
    }
    if (!(best >= kIndicatorFloor)) {
      best = kIndicatorFloor;
      ++img.floored;
    }
    img.values[p] = 1.0 / best;
  }
  return img;
}

double distance_to_crack(Point p, const Crack& crack) {
  const double tx = std::cos(crack.orientation);
  const double ty = std::sin(crack.orientation);
  const double along = (p.x - crack.center.x) * tx + (p.y - crack.center.y) * ty;
  const double clamped = std::clamp(along, -0.5 * crack.length, 0.5 * crack.length);
  return distance(p, {crack.center.x + clamped * tx, crack.center.y + clamped * ty});
}

RegionMask build_masks(const SceneConfig& cfg, const RhsLibrary& lib, double radius) {
  if (!(radius >= 0.0)) throw Error(ErrorCode::ConfigError, "dilation radius must be >= 0");
  RegionMask mask;
  mask.nx = lib.nx;
  mask.ny = lib.ny;
  mask.defect.assign(lib.n_points(), 0);
  const double tol = 1e-12 * cfg.half_width;
  for (std::size_t p = 0; p < lib.n_points(); ++p) {
    for (const Crack& c : cfg.cracks) {
      if (distance_to_crack(lib.grid[p], c) <= radius + tol) {
        mask.defect[p] = 1;
        break;
      }
    }
  }
  if (std::all_of(mask.defect.begin(), mask.defect.end(), [](std::uint8_t d) { return d != 0; })) {
    throw Error(ErrorCode::EmptyBackground, "dilation radius covers the whole grid");
  }
  return mask;
}

ContrastReport contrast(const IndicatorImage& image, const RegionMask& mask) {
  if (image.values.size() != mask.defect.size()) throw Error(ErrorCode::DimensionMismatch, "image/mask size");
  double bg_sum = 0.0;
  std::size_t bg_count = 0;
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    if (!mask.defect[p]) {
      bg_sum += image.values[p] * image.values[p];
      ++bg_count;
    }
  }
  if (bg_count == 0) throw Error(ErrorCode::EmptyBackground, "mask has no background pixels");
  const double ib = std::sqrt(bg_sum / static_cast<double>(bg_count));

  ContrastReport r;
  std::size_t defect_count = 0;
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    if (!mask.defect[p]) continue;
    const double ratio = image.values[p] / ib;
    r.c_mean += ratio;
    r.c_max = defect_count == 0 ? ratio : std::max(r.c_max, ratio);
    ++defect_count;
  }
  if (defect_count == 0) throw Error(ErrorCode::EmptyDefect, "mask has no defect pixels");
  r.c_mean /= static_cast<double>(defect_count);
  return r;
}

std::vector<double> map_misfit(const RegMap& a, const RegMap& b) {
  if (a.index != b.index) throw Error(ErrorCode::DimensionMismatch, "maps cover different patterns");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a.alpha[i] - b.alpha[i]);
  return out;
}

void write_pgm(const std::vector<double>& values, int nx, int ny, double lo, double hi,
               const std::filesystem::path& path) {
  if (values.size() != static_cast<std::size_t>(nx) * static_cast<std::size_t>(ny)) {
    throw Error(ErrorCode::DimensionMismatch, "image size does not match grid");
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P5\n" << std::setprecision(17) << "# min=" << lo << " max=" << hi << '\n'
      << nx << ' ' << ny << "\n65535\n";
  const double span = hi > lo ? hi - lo : 1.0;
  for (int row = ny - 1; row >= 0; --row) {
    for (int ix = 0; ix < nx; ++ix) {
      const double v = values[static_cast<std::size_t>(row) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)];
      const double q = std::clamp((v - lo) / span, 0.0, 1.0) * 65535.0;
      const auto level = static_cast<std::uint16_t>(std::lround(q));
      const char bytes[2] = {static_cast<char>(level >> 8), static_cast<char>(level & 0xFF)};
      out.write(bytes, 2);
    }
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

void write_image_csv(const IndicatorImage& image, const RhsLibrary& lib, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "p,x,y,indicator,log10_indicator\n" << std::setprecision(17);
  for (std::size_t p = 0; p < image.values.size(); ++p) {
    out << p << ',' << lib.grid[p].x << ',' << lib.grid[p].y << ',' << image.values[p] << ','
        << std::log10(image.values[p]) << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

void write_pbm(const std::vector<std::uint8_t>& bits, int nx, int ny, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "P4\n" << nx << ' ' << ny << '\n';
  const int row_bytes = (nx + 7) / 8;
  std::vector<char> row(static_cast<std::size_t>(row_bytes));
  for (int iy = ny - 1; iy >= 0; --iy) {
    std::fill(row.begin(), row.end(), 0);
    for (int ix = 0; ix < nx; ++ix) {
      if (bits[static_cast<std::size_t>(iy) * static_cast<std::size_t>(nx) + static_cast<std::size_t>(ix)]) {
        row[static_cast<std::size_t>(ix / 8)] |= static_cast<char>(0x80 >> (ix % 8));
      }
    }
    out.write(row.data(), row_bytes);
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

void write_grid_csv(const std::vector<double>& values, const RegMap& layout, const RhsLibrary& lib,
                    const std::string& column, const std::filesystem::path& path) {
  if (values.size() != layout.size()) throw Error(ErrorCode::DimensionMismatch, "values/layout size");
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << "n,p,s,x,y," << column << '\n' << std::setprecision(17);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto [p, s] = lib.split(layout.index[i]);
    out << layout.index[i] << ',' << p << ',' << s << ',' << lib.grid[p].x << ',' << lib.grid[p].y << ','
        << values[i] << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed on " + path.string());
}

}  // namespace deepreg
