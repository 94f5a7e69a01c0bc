#include "deepreg/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "deepreg/binary_io.hpp"
#include "deepreg/error.hpp"
#include "deepreg/regnet.hpp"
#include "deepreg/spectral.hpp"

namespace deepreg {
namespace fs = std::filesystem;

namespace {

constexpr const char* kOpClean = "operator_clean.rnop";
constexpr const char* kOpNoisy = "operator_noisy.rnop";
constexpr const char* kLibrary = "library.rrhs";
constexpr const char* kSvd = "svd.rsvd";
constexpr const char* kMorozovMap = "morozov_map.csv";
constexpr const char* kMorozovTrain = "morozov_train.csv";
constexpr const char* kStep1 = "rnet_step1.rnck";
constexpr const char* kStep2 = "rnet_step2.rnck";
constexpr const char* kTrace = "trace.csv";

void require(const std::vector<fs::path>& paths) {
  for (const fs::path& p : paths) {
    if (!fs::exists(p)) throw Error(ErrorCode::MissingInput, "required input not found: " + p.string());
  }
}

fs::path prepare_output(const RunConfig& cfg) {
  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec || !fs::is_directory(cfg.output_dir)) {
    throw Error(ErrorCode::IoError, "cannot create output directory " + cfg.output_dir.string());
  }
  return cfg.output_dir;
}

std::ofstream open_text(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << std::setprecision(17);
  return out;
}

SceneConfig noisy_scene(const RunConfig& cfg) {
  SceneConfig scene = cfg.scene;
  scene.rng_seed = cfg.noise_seed();
  return scene;
}

std::vector<double> log10_values(const std::vector<double>& v) {
  std::vector<double> out(v.size());
  std::transform(v.begin(), v.end(), out.begin(), [](double x) { return std::log10(std::max(x, kIndicatorFloor)); });
  return out;
}

std::pair<double, double> min_max(const std::vector<double>& v) {
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  return {*lo, *hi};
}

// Evenly spaced picks over [0, n).
std::vector<std::size_t> spread(std::size_t n, std::size_t count) {
  std::vector<std::size_t> out;
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) out.push_back(count == 1 ? 0 : i * (n - 1) / (count - 1));
  return out;
}

}  // namespace

std::string eta_tag(double eta) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << eta;
  return os.str();
}

void cmd_simulate(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = prepare_output(cfg);
  const SceneConfig scene = noisy_scene(cfg);
  const Operator clean = build_operator(scene);
  const Operator noisy = add_noise(clean, scene.noise_delta, scene.rng_seed);
  const RhsLibrary lib = build_rhs_library(scene, cfg.grid_nx, cfg.grid_ny, cfg.orientations);
  const Svd svd = decompose(noisy);
  save_operator(clean, dir / kOpClean);
  save_operator(noisy, dir / kOpNoisy);
  save_library(lib, dir / kLibrary);
  save_svd(svd, dir / kSvd);
}

void cmd_morozov(const RunConfig& cfg, std::optional<double> eta, bool sweep) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  require({dir / kLibrary, dir / kSvd});
  if (eta && !(*eta > 0.0)) throw Error(ErrorCode::ConfigError, "eta must be > 0");
  const RhsLibrary lib = load_library(dir / kLibrary);
  const Svd svd = load_svd(dir / kSvd);
  const RVector d2 = svd.D.cwiseAbs2();
  const RMatrix power = project_all(svd, lib.patterns).cwiseAbs2();
  const auto all = all_patterns(lib);

  const RegMap dense = build_regmap(cfg.eta0, d2, power, all, cfg.morozov_tol);
  const Dataset ds = build_dataset(svd, lib, dense, cfg.m);
  RegMap train_map;
  train_map.eta = cfg.eta0;
  train_map.index = ds.train.index;
  train_map.alpha.assign(ds.train.labels.data(), ds.train.labels.data() + ds.train.labels.size());
  train_map.flag = ds.train.flags;

  write_regmap_csv(dense, lib, dir / kMorozovMap);
  write_regmap_csv(train_map, lib, dir / kMorozovTrain);
  if (eta) {
    write_regmap_csv(build_regmap(*eta, d2, power, all, cfg.morozov_tol), lib,
                     dir / ("morozov_eta_" + eta_tag(*eta) + ".csv"));
  }
  if (sweep) {
    const fs::path sweep_dir = dir / "morozov_sweep";
    fs::create_directories(sweep_dir);
    for (double e : cfg.eta_sweep) {
      write_regmap_csv(build_regmap(e, d2, power, all, cfg.morozov_tol), lib,
                       sweep_dir / ("eta_" + eta_tag(e) + ".csv"));
    }
  }
}

TrainSummary cmd_train(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  require({dir / kLibrary, dir / kSvd, dir / kMorozovMap});
  const RhsLibrary lib = load_library(dir / kLibrary);
  const Svd svd = load_svd(dir / kSvd);
  const RegMap dense = read_regmap_csv(dir / kMorozovMap);
  const Dataset ds = build_dataset(svd, lib, dense, cfg.m);

  double alpha_scale = ds.train.labels.size() > 0 ? ds.train.labels.maxCoeff() : 1.0;
  if (!(alpha_scale > 0.0)) alpha_scale = 1.0;
  RegNet net = init_regnet(static_cast<int>(svd.size()), cfg.hidden1, cfg.hidden2, alpha_scale, cfg.net_seed());
  net.u_scale = ds.u_scale;

  const Schedule schedule = cfg.schedule();
  const TrainResult result = train(net, ds, schedule);

  save_checkpoint(result.step1, result.step1_optimizer, dir / kStep1);
  std::error_code ec;
  fs::remove(dir / kStep2, ec);
  if (cfg.max_epochs2 > 0) save_checkpoint(result.final_net, result.final_optimizer, dir / kStep2);
  write_trace_csv(result.trace, dir / kTrace);

  TrainSummary s;
  s.epoch1 = schedule.epoch1;
  s.stop_epoch = result.stop_epoch;
  s.last_saved_epoch = result.last_saved_epoch;
  s.reason = result.decision.reason;
  s.initial_loss = result.trace.rows.front().J;
  s.step1_loss = result.trace.rows[static_cast<std::size_t>(schedule.epoch1)].J;

  std::ofstream out = open_text(dir / "train_summary.txt");
  out << "mode = " << (cfg.mode == TrainMode::Basic ? "basic" : "informed") << '\n'
      << "epoch1 = " << s.epoch1 << '\n'
      << "max_epochs2 = " << cfg.max_epochs2 << '\n'
      << "initial_loss = " << s.initial_loss << '\n'
      << "step1_loss = " << s.step1_loss << '\n'
      << "stop_epoch = " << s.stop_epoch << '\n'
      << "stop_reason = " << to_string(s.reason) << '\n'
      << "last_saved_epoch = " << s.last_saved_epoch << '\n';
  return s;
}

std::vector<ContrastRow> cmd_image(const RunConfig& cfg, ImageSource source, std::optional<double> eta) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  require({dir / kLibrary, dir / kSvd});

  std::vector<std::pair<std::string, fs::path>> inputs;
  if (source == ImageSource::Morozov) {
    const fs::path map = eta ? dir / ("morozov_eta_" + eta_tag(*eta) + ".csv") : dir / kMorozovMap;
    require({map});
    inputs.emplace_back(eta ? "morozov_eta_" + eta_tag(*eta) : "morozov", map);
  } else {
    require({dir / kStep1});
    inputs.emplace_back("net_step1", dir / kStep1);
    if (fs::exists(dir / kStep2)) inputs.emplace_back("net_step2", dir / kStep2);
  }
  if (source == ImageSource::Net && inputs.size() == 1) {
    std::error_code ec;
    fs::remove(dir / "regmap_net_step2.csv", ec);
  }

  const RhsLibrary lib = load_library(dir / kLibrary);
  const Svd svd = load_svd(dir / kSvd);
  const RegionMask mask = build_masks(cfg.scene, lib, cfg.effective_dilation_radius());

  std::vector<IndicatorImage> images;
  for (const auto& [tag, path] : inputs) {
    RegMap map;
    if (source == ImageSource::Morozov) {
      map = read_regmap_csv(path);
    } else {
      const RegNet net = load_checkpoint(path).first;
      if (net.shape().input != svd.size()) {
        throw Error(ErrorCode::DimensionMismatch, path.string() + " was trained on a different operator");
      }
      map = predict_map(net, svd, lib);
      write_regmap_csv(map, lib, dir / ("regmap_" + tag + ".csv"));
    }
    images.push_back(lsm_image(svd, lib, map, tag));
  }

  // One shared color scale per comparison group.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (const IndicatorImage& img : images) {
    const auto [a, b] = min_max(img.values);
    lo = std::min(lo, a);
    hi = std::max(hi, b);
  }
  const double log_lo = std::log10(std::max(lo, kIndicatorFloor));
  const double log_hi = std::log10(std::max(hi, kIndicatorFloor));

  const std::string group = source == ImageSource::Morozov ? "morozov" : "net";
  std::vector<ContrastRow> rows;
  for (const IndicatorImage& img : images) {
    write_pgm(img.values, img.nx, img.ny, lo, hi, dir / ("image_" + img.tag + ".pgm"));
    write_pgm(log10_values(img.values), img.nx, img.ny, log_lo, log_hi, dir / ("image_" + img.tag + ".log10.pgm"));
    write_image_csv(img, lib, dir / ("image_" + img.tag + ".csv"));
    rows.push_back({img.tag, contrast(img, mask)});
  }
  if (cfg.emit_masks) write_pbm(mask.defect, mask.nx, mask.ny, dir / "masks.pbm");

  {
    std::ofstream out = open_text(dir / ("contrast_" + group + ".csv"));
    out << "tag,metric,value\n";
    for (const ContrastRow& r : rows) {
      out << r.tag << ",C_mn," << r.report.c_mean << '\n';
      out << r.tag << ",C_mx," << r.report.c_max << '\n';
    }
  }
  {
    std::ofstream out = open_text(dir / ("image_scale_" + group + ".csv"));
    out << "scale,min,max\n";
    out << "linear," << lo << ',' << hi << '\n';
    out << "log10," << log_lo << ',' << log_hi << '\n';
  }

  // Misfit grids between every pair of maps present on disk.
  std::vector<std::pair<std::string, fs::path>> maps;
  if (fs::exists(dir / kMorozovMap)) maps.emplace_back("morozov", dir / kMorozovMap);
  for (const char* tag : {"net_step1", "net_step2"}) {
    const fs::path p = dir / ("regmap_" + std::string(tag) + ".csv");
    if (fs::exists(p)) maps.emplace_back(tag, p);
  }
  std::vector<RegMap> loaded;
  for (const auto& m : maps) loaded.push_back(read_regmap_csv(m.second));
  for (std::size_t a = 0; a < maps.size(); ++a) {
    for (std::size_t b = a + 1; b < maps.size(); ++b) {
      write_grid_csv(map_misfit(loaded[a], loaded[b]), loaded[a], lib, "misfit",
                     dir / ("misfit_" + maps[a].first + "_vs_" + maps[b].first + ".csv"));
    }
  }
  return rows;
}

void cmd_report(const RunConfig& cfg) {
  cfg.validate();
  const fs::path dir = cfg.output_dir;
  require({dir / kLibrary, dir / kSvd});
  const RhsLibrary lib = load_library(dir / kLibrary);
  const Svd svd = load_svd(dir / kSvd);

  if (cfg.emit_picard) {
    std::vector<std::size_t> picks;
    if (fs::exists(dir / kMorozovTrain)) {
      const RegMap train_map = read_regmap_csv(dir / kMorozovTrain);
      for (std::size_t i : spread(train_map.size(), static_cast<std::size_t>(cfg.picard_patterns))) {
        picks.push_back(train_map.index[i]);
      }
    } else {
      picks = spread(lib.n_patterns(), static_cast<std::size_t>(cfg.picard_patterns));
    }
    export_picard(svd, lib, picks, dir / "picard.csv");
  }

  if (fs::exists(dir / kTrace)) {
    std::ifstream in(dir / kTrace);
    std::ofstream out = open_text(dir / "trace_plot.csv");
    out << "epoch,step,J_hat,V_hat\n";
    std::string line;
    std::getline(in, line);
    while (std::getline(in, line)) {
      std::vector<std::string> cols;
      std::stringstream ss(line);
      std::string c;
      while (std::getline(ss, c, ',')) cols.push_back(c);
      if (cols.size() < 6) throw Error(ErrorCode::IoError, "malformed trace row: " + line);
      out << cols[0] << ',' << cols[1] << ',' << cols[4] << ',' << cols[5] << '\n';
    }
  }
}

PipelineResult run_pipeline(const RunConfig& cfg) {
  PipelineResult r;
  cmd_simulate(cfg);
  cmd_morozov(cfg);
  r.train = cmd_train(cfg);
  r.morozov = cmd_image(cfg, ImageSource::Morozov);
  r.net = cmd_image(cfg, ImageSource::Net);
  cmd_report(cfg);
  return r;
}

}  // namespace deepreg
