// deepreg: staged pipeline driver.
//
//   deepreg [--config PATH] [--seed N] [--out DIR] <simulate|morozov|train|image|report> ...
//
// Exit codes: 0 success, 1 usage or config error, 2 numerical failure,
// 3 missing or unreadable input.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "deepreg/config.hpp"
#include "deepreg/error.hpp"
#include "deepreg/pipeline.hpp"

namespace {

int exit_code(deepreg::ErrorCode code) {
  using deepreg::ErrorCode;
  switch (code) {
    case ErrorCode::ConfigError: return 1;
    case ErrorCode::MissingInput:
    case ErrorCode::IoError:
    case ErrorCode::DimensionMismatch: return 3;
    default: return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned Tikhonov regularization maps for linear-sampling imaging"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<long long> seed;
  std::string out_dir;
  app.add_option("--config", config_path, "Run configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Override run.seed")->check(CLI::NonNegativeNumber);
  app.add_option("--out", out_dir, "Override output.directory");

  auto* simulate = app.add_subcommand("simulate", "Build operators, pattern library and SVD");

  auto* morozov = app.add_subcommand("morozov", "Solve discrepancy-principle maps");
  std::optional<double> morozov_eta;
  bool sweep = false;
  morozov->add_option("--eta", morozov_eta, "Extra map at this threshold");
  morozov->add_flag("--sweep", sweep, "One dense map per morozov.eta_sweep value");

  auto* train = app.add_subcommand("train", "Two-step network training");

  auto* image = app.add_subcommand("image", "LSM images, masks, contrast and misfit grids");
  std::string source = "morozov";
  std::optional<double> image_eta;
  image->add_option("--source", source, "morozov or net")->check(CLI::IsMember({"morozov", "net"}));
  image->add_option("--eta", image_eta, "Image the map written by `morozov --eta`");

  auto* report = app.add_subcommand("report", "Picard data and trace plot data");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    deepreg::RunConfig cfg = config_path.empty() ? deepreg::RunConfig{} : deepreg::load_config(config_path);
    if (seed) cfg.seed = static_cast<std::uint64_t>(*seed);
    if (!out_dir.empty()) cfg.output_dir = out_dir;

    if (simulate->parsed()) {
      deepreg::cmd_simulate(cfg);
    } else if (morozov->parsed()) {
      deepreg::cmd_morozov(cfg, morozov_eta, sweep);
    } else if (train->parsed()) {
      const auto s = deepreg::cmd_train(cfg);
      std::cout << "step1 loss " << s.initial_loss << " -> " << s.step1_loss << "; stop "
                << deepreg::to_string(s.reason) << " at epoch " << s.stop_epoch << '\n';
    } else if (image->parsed()) {
      const auto rows = deepreg::cmd_image(
          cfg, source == "net" ? deepreg::ImageSource::Net : deepreg::ImageSource::Morozov, image_eta);
      for (const auto& r : rows) {
        std::cout << r.tag << " C_mn=" << r.report.c_mean << " C_mx=" << r.report.c_max << '\n';
      }
    } else if (report->parsed()) {
      deepreg::cmd_report(cfg);
    }
  } catch (const deepreg::Error& e) {
    std::cerr << "deepreg: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "deepreg: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
