#pragma once

// Pipeline stages. Each stage reads the artifacts of earlier stages from
// cfg.output_dir, checks every input before writing anything, and throws
// MissingInput naming the first absent file.
//
//   simulate  operator_clean.rnop operator_noisy.rnop library.rrhs svd.rsvd
//   morozov   morozov_map.csv (dense, eta0) morozov_train.csv
//             [morozov_eta_<eta>.csv] [morozov_sweep/eta_<eta>.csv ...]
//   train     rnet_step1.rnck [rnet_step2.rnck] trace.csv train_summary.txt
//   image     image_<tag>.{pgm,log10.pgm,csv} regmap_<tag>.csv masks.pbm
//             contrast_<source>.csv image_scale_<source>.csv
//             misfit_<a>_vs_<b>.csv
//   report    picard.csv trace_plot.csv

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "deepreg/config.hpp"
#include "deepreg/imaging.hpp"
#include "deepreg/training.hpp"

namespace deepreg {

enum class ImageSource { Morozov, Net };

struct ContrastRow {
  std::string tag;
  ContrastReport report;
};

struct TrainSummary {
  int epoch1 = 0;
  int stop_epoch = -1;
  int last_saved_epoch = 0;
  StopReason reason = StopReason::None;
  double initial_loss = 0.0;
  double step1_loss = 0.0;
};

void cmd_simulate(const RunConfig& cfg);

/// `eta` additionally writes morozov_eta_<eta>.csv; `sweep` writes one dense
/// map per cfg.eta_sweep entry.
void cmd_morozov(const RunConfig& cfg, std::optional<double> eta = std::nullopt, bool sweep = false);

TrainSummary cmd_train(const RunConfig& cfg);

/// For Morozov images `eta` selects morozov_eta_<eta>.csv instead of the
/// eta0 map.
std::vector<ContrastRow> cmd_image(const RunConfig& cfg, ImageSource source,
                                   std::optional<double> eta = std::nullopt);

void cmd_report(const RunConfig& cfg);

struct PipelineResult {
  TrainSummary train;
  std::vector<ContrastRow> morozov;
  std::vector<ContrastRow> net;
};

/// simulate, morozov, train, image(morozov), image(net), report.
PipelineResult run_pipeline(const RunConfig& cfg);

/// File name fragment for an eta value, e.g. 0.25 -> "0.250".
std::string eta_tag(double eta);

}  // namespace deepreg
