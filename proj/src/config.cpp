#include "deepreg/config.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>

#include "deepreg/error.hpp"

namespace deepreg {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

class FieldParser {
 public:
  FieldParser(std::string origin, std::size_t line, std::string key, std::string value)
      : where_(origin + ":" + std::to_string(line) + ": " + key), value_(std::move(value)) {}

  double real() const {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(value_, &used);
    } catch (const std::exception&) {
      fail("expected a number, got '" + value_ + "'");
    }
    if (used != value_.size()) fail("trailing characters in '" + value_ + "'");
    return v;
  }

  long long integer() const {
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(value_, &used);
    } catch (const std::exception&) {
      fail("expected an integer, got '" + value_ + "'");
    }
    if (used != value_.size()) fail("trailing characters in '" + value_ + "'");
    return v;
  }

  bool flag() const {
    if (value_ == "true" || value_ == "1" || value_ == "yes") return true;
    if (value_ == "false" || value_ == "0" || value_ == "no") return false;
    fail("expected true/false, got '" + value_ + "'");
  }

  std::vector<double> reals() const {
    std::stringstream ss(value_);
    std::vector<double> out;
    std::string tok;
    while (ss >> tok) {
      try {
        std::size_t used = 0;
        out.push_back(std::stod(tok, &used));
        if (used != tok.size()) fail("bad list entry '" + tok + "'");
      } catch (const std::invalid_argument&) {
        fail("bad list entry '" + tok + "'");
      } catch (const std::out_of_range&) {
        fail("bad list entry '" + tok + "'");
      }
    }
    return out;
  }

  const std::string& text() const { return value_; }

  [[noreturn]] void fail(const std::string& msg) const { throw Error(ErrorCode::ConfigError, where_ + ": " + msg); }

 private:
  std::string where_;
  std::string value_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

RunConfig::RunConfig() {
  scene.half_width = 1.0;
  scene.sensor_radius = 2.0;
  scene.n_sensors = 64;
  scene.wavenumber = 10.0 * std::numbers::pi;  // ten wavelengths across [-1, 1]
  scene.cracks = {Crack{{-0.4, 0.3}, 0.5, 0.3, 0, 1.0}, Crack{{0.35, -0.35}, 0.4, 2.0, 0, 1.0}};
  scene.noise_delta = 0.1;
  for (int i = 1; i <= 40; ++i) eta_sweep.push_back(0.01 * i);
}

int RunConfig::effective_epoch1() const {
  if (epoch1) return *epoch1;
  return mode == TrainMode::Basic ? 2000 : 1000;
}

double RunConfig::effective_lr1() const {
  if (lr1) return *lr1;
  return mode == TrainMode::Basic ? 1e-5 : 5e-6;
}

double RunConfig::effective_dilation_radius() const {
  if (dilation_radius) return *dilation_radius;
  return std::numbers::pi / scene.wavenumber;  // half a wavelength
}

Schedule RunConfig::schedule() const {
  Schedule s;
  s.mode = mode;
  s.epoch1 = effective_epoch1();
  s.max_epochs2 = max_epochs2;
  s.lr1 = effective_lr1();
  s.lr2 = lr2;
  s.informed.eta0 = eta0;
  s.informed.epsilon = epsilon;
  s.informed.alpha_norm = alpha_norm;
  s.stop = stop;
  return s;
}

void RunConfig::validate() const {
  scene.validate();
  auto bad = [](const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); };
  if (grid_nx < 1 || grid_ny < 1) bad("grid.nx and grid.ny must be >= 1");
  if (orientations < 1) bad("grid.orientations must be >= 1");
  if (!(eta0 > 0.0)) bad("morozov.eta0 must be > 0");
  if (!(morozov_tol > 0.0)) bad("morozov.tol must be > 0");
  for (double e : eta_sweep) {
    if (!(e > 0.0)) bad("morozov.eta_sweep entries must be > 0");
  }
  if (hidden1 < 1 || hidden2 < 1) bad("net.hidden1 and net.hidden2 must be >= 1");
  if (effective_epoch1() < 0) bad("train.epoch1 must be >= 0");
  if (max_epochs2 < 0) bad("train.max_epochs2 must be >= 0");
  if (!(effective_lr1() > 0.0) || !(lr2 > 0.0)) bad("learning rates must be > 0");
  if (!(stop.sigma_a > 0.0)) bad("train.sigma_a must be > 0");
  if (!(stop.sigma_r > 1.0)) bad("train.sigma_r must be > 1");
  if (stop.n_rms < 2) bad("train.n_rms must be >= 2");
  if (stop.min_window < 1) bad("train.min_window must be >= 1");
  if (m < 1) bad("train.m must be >= 1");
  if (!(epsilon >= 0.0)) bad("train.epsilon must be >= 0");
  if (dilation_radius && !(*dilation_radius >= 0.0)) bad("imaging.dilation_radius must be >= 0");
  if (picard_patterns < 0) bad("output.picard_patterns must be >= 0");
  for (const Crack& c : scene.cracks) {
    const Point ends[2] = {
        {c.center.x - 0.5 * c.length * std::cos(c.orientation), c.center.y - 0.5 * c.length * std::sin(c.orientation)},
        {c.center.x + 0.5 * c.length * std::cos(c.orientation), c.center.y + 0.5 * c.length * std::sin(c.orientation)}};
    for (Point e : ends) {
      if (distance(e, {}) >= scene.sensor_radius) bad("crack reaches the sensor circle");
    }
  }
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  bool cracks_reset = false;
  bool sweep_reset = false;
  std::istringstream in(text);
  std::string raw;
  std::size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto hash = raw.find('#');
    const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw Error(ErrorCode::ConfigError, origin + ":" + std::to_string(lineno) + ": expected `section.key = value`");
    }
    const std::string key = trim(line.substr(0, eq));
    const FieldParser f(origin, lineno, key, trim(line.substr(eq + 1)));

    if (key == "scene.half_width") cfg.scene.half_width = f.real();
    else if (key == "scene.sensor_radius") cfg.scene.sensor_radius = f.real();
    else if (key == "scene.n_sensors") cfg.scene.n_sensors = static_cast<int>(f.integer());
    else if (key == "scene.wavenumber") cfg.scene.wavenumber = f.real();
    else if (key == "scene.noise_delta") cfg.scene.noise_delta = f.real();
    else if (key == "scene.crack") {
      if (!cracks_reset) {
        cfg.scene.cracks.clear();
        cracks_reset = true;
      }
      const auto v = f.reals();
      if (v.size() < 4 || v.size() > 6) f.fail("expected `x y length orientation [n_quad [contrast]]`");
      Crack c{{v[0], v[1]}, v[2], v[3], v.size() >= 5 ? static_cast<int>(v[4]) : 0, v.size() == 6 ? v[5] : 1.0};
      cfg.scene.cracks.push_back(c);
    } else if (key == "scene.cracks") {
      if (f.text() != "none") f.fail("only `none` is accepted here; use scene.crack lines");
      cfg.scene.cracks.clear();
      cracks_reset = true;
    } else if (key == "grid.nx") cfg.grid_nx = static_cast<int>(f.integer());
    else if (key == "grid.ny") cfg.grid_ny = static_cast<int>(f.integer());
    else if (key == "grid.orientations") cfg.orientations = static_cast<int>(f.integer());
    else if (key == "morozov.eta0") cfg.eta0 = f.real();
    else if (key == "morozov.tol") cfg.morozov_tol = f.real();
    else if (key == "morozov.eta_sweep") {
      if (!sweep_reset) {
        cfg.eta_sweep.clear();
        sweep_reset = true;
      }
      const auto v = f.reals();
      cfg.eta_sweep.insert(cfg.eta_sweep.end(), v.begin(), v.end());
    } else if (key == "net.hidden1") cfg.hidden1 = static_cast<int>(f.integer());
    else if (key == "net.hidden2") cfg.hidden2 = static_cast<int>(f.integer());
    else if (key == "run.seed") {
      const long long s = f.integer();
      if (s < 0) f.fail("seed must be >= 0");
      cfg.seed = static_cast<std::uint64_t>(s);
    } else if (key == "train.mode") {
      if (f.text() == "basic") cfg.mode = TrainMode::Basic;
      else if (f.text() == "informed") cfg.mode = TrainMode::Informed;
      else f.fail("expected basic or informed");
    } else if (key == "train.epoch1") cfg.epoch1 = static_cast<int>(f.integer());
    else if (key == "train.max_epochs2") cfg.max_epochs2 = static_cast<int>(f.integer());
    else if (key == "train.lr1") cfg.lr1 = f.real();
    else if (key == "train.lr2") cfg.lr2 = f.real();
    else if (key == "train.sigma_a") cfg.stop.sigma_a = f.real();
    else if (key == "train.sigma_r") cfg.stop.sigma_r = f.real();
    else if (key == "train.n_rms") cfg.stop.n_rms = static_cast<int>(f.integer());
    else if (key == "train.min_window") cfg.stop.min_window = static_cast<int>(f.integer());
    else if (key == "train.m") cfg.m = static_cast<int>(f.integer());
    else if (key == "train.epsilon") cfg.epsilon = f.real();
    else if (key == "train.alpha_norm") {
      if (f.text() == "per_sample") cfg.alpha_norm = AlphaNorm::PerSample;
      else if (f.text() == "global_max") cfg.alpha_norm = AlphaNorm::GlobalMax;
      else f.fail("expected per_sample or global_max");
    } else if (key == "imaging.dilation_radius") cfg.dilation_radius = f.real();
    else if (key == "output.directory") cfg.output_dir = f.text();
    else if (key == "output.emit_picard") cfg.emit_picard = f.flag();
    else if (key == "output.emit_masks") cfg.emit_masks = f.flag();
    else if (key == "output.picard_patterns") cfg.picard_patterns = static_cast<int>(f.integer());
    else f.fail("unknown key");
  }
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::MissingInput, "cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path.string());
}

std::string format_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "scene.half_width = " << fmt(cfg.scene.half_width) << '\n'
     << "scene.sensor_radius = " << fmt(cfg.scene.sensor_radius) << '\n'
     << "scene.n_sensors = " << cfg.scene.n_sensors << '\n'
     << "scene.wavenumber = " << fmt(cfg.scene.wavenumber) << '\n'
     << "scene.noise_delta = " << fmt(cfg.scene.noise_delta) << '\n';
  if (cfg.scene.cracks.empty()) os << "scene.cracks = none\n";
  for (const Crack& c : cfg.scene.cracks) {
    os << "scene.crack = " << fmt(c.center.x) << ' ' << fmt(c.center.y) << ' ' << fmt(c.length) << ' '
       << fmt(c.orientation) << ' ' << c.n_quad << ' ' << fmt(c.contrast) << '\n';
  }
  os << "grid.nx = " << cfg.grid_nx << '\n'
     << "grid.ny = " << cfg.grid_ny << '\n'
     << "grid.orientations = " << cfg.orientations << '\n'
     << "morozov.eta0 = " << fmt(cfg.eta0) << '\n'
     << "morozov.tol = " << fmt(cfg.morozov_tol) << '\n'
     << "morozov.eta_sweep =";
  for (double e : cfg.eta_sweep) os << ' ' << fmt(e);
  os << '\n'
     << "net.hidden1 = " << cfg.hidden1 << '\n'
     << "net.hidden2 = " << cfg.hidden2 << '\n'
     << "run.seed = " << cfg.seed << '\n'
     << "train.mode = " << (cfg.mode == TrainMode::Basic ? "basic" : "informed") << '\n'
     << "train.epoch1 = " << cfg.effective_epoch1() << '\n'
     << "train.max_epochs2 = " << cfg.max_epochs2 << '\n'
     << "train.lr1 = " << fmt(cfg.effective_lr1()) << '\n'
     << "train.lr2 = " << fmt(cfg.lr2) << '\n'
     << "train.sigma_a = " << fmt(cfg.stop.sigma_a) << '\n'
     << "train.sigma_r = " << fmt(cfg.stop.sigma_r) << '\n'
     << "train.n_rms = " << cfg.stop.n_rms << '\n'
     << "train.min_window = " << cfg.stop.min_window << '\n'
     << "train.m = " << cfg.m << '\n'
     << "train.epsilon = " << fmt(cfg.epsilon) << '\n'
     << "train.alpha_norm = " << (cfg.alpha_norm == AlphaNorm::GlobalMax ? "global_max" : "per_sample") << '\n'
     << "imaging.dilation_radius = " << fmt(cfg.effective_dilation_radius()) << '\n'
     << "output.directory = " << cfg.output_dir.string() << '\n'
     << "output.emit_picard = " << (cfg.emit_picard ? "true" : "false") << '\n'
     << "output.emit_masks = " << (cfg.emit_masks ? "true" : "false") << '\n'
     << "output.picard_patterns = " << cfg.picard_patterns << '\n';
  return os.str();
}

}  // namespace deepreg
