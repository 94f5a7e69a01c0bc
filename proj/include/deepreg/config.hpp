#pragma once

// Run configuration: flat UTF-8 text, one `section.key = value` per line,
// `#` starts a comment. `scene.crack = x y length orientation [n_quad
// [contrast]]` may repeat; list values are whitespace separated.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepreg/forward_model.hpp"
#include "deepreg/training.hpp"

namespace deepreg {

struct RunConfig {
  SceneConfig scene;
  int grid_nx = 40;
  int grid_ny = 40;
  int orientations = 8;

  double eta0 = kDefaultEta;
  double morozov_tol = kDefaultMorozovTol;
  std::vector<double> eta_sweep;  // defaults to 0.01, 0.02, ..., 0.40

  int hidden1 = 1000;
  int hidden2 = 500;

  std::uint64_t seed = 0;

  TrainMode mode = TrainMode::Informed;
  std::optional<int> epoch1;  // basic 2000, informed 1000
  int max_epochs2 = 20000;
  std::optional<double> lr1;  // basic 1e-5, informed 5e-6
  double lr2 = 5e-8;
  StopConfig stop;
  int m = 2;
  AlphaNorm alpha_norm = AlphaNorm::GlobalMax;
  double epsilon = 1e-12;

  std::optional<double> dilation_radius;  // default half a wavelength

  std::filesystem::path output_dir = "out";
  bool emit_picard = true;
  bool emit_masks = true;
  int picard_patterns = 8;

  RunConfig();

  int effective_epoch1() const;
  double effective_lr1() const;
  double effective_dilation_radius() const;
  std::uint64_t noise_seed() const { return seed + 1; }
  std::uint64_t net_seed() const { return seed + 2; }
  Schedule schedule() const;

  /// Throws ConfigError naming the offending field.
  void validate() const;
};

/// Parses config text on top of the defaults. Errors carry `origin:line`.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::filesystem::path& path);

/// Renders a config that parse_config() reads back to the same values.
std::string format_config(const RunConfig& cfg);

}  // namespace deepreg
