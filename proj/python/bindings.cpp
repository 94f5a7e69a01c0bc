#include <pybind11/complex.h>
#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "deepreg/config.hpp"
#include "deepreg/error.hpp"
#include "deepreg/forward_model.hpp"
#include "deepreg/imaging.hpp"
#include "deepreg/morozov.hpp"
#include "deepreg/pipeline.hpp"
#include "deepreg/regnet.hpp"
#include "deepreg/spectral.hpp"
#include "deepreg/training.hpp"

namespace py = pybind11;
using namespace deepreg;

namespace {

Svd make_svd(const CMatrix& U, const RVector& D, const CMatrix& V) {
  if (U.cols() != D.size() || V.cols() != D.size()) throw Error(ErrorCode::DimensionMismatch, "U, D, V sizes");
  return Svd{U, D, V};
}

RegMap make_map(const RhsLibrary& lib, const std::vector<double>& alpha) {
  if (alpha.size() != lib.n_patterns()) throw Error(ErrorCode::DimensionMismatch, "one alpha per pattern");
  RegMap map;
  map.index = all_patterns(lib);
  map.alpha = alpha;
  map.flag.assign(alpha.size(), RegFlag::Ok);
  return map;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Learned Tikhonov regularization maps for linear-sampling imaging";

  static py::exception<Error> error(m, "DeepregError");
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetObject(error.ptr(), py::make_tuple(std::string(to_string(e.code())), e.what()).ptr());
    }
  });

  py::class_<Crack>(m, "Crack")
      .def(py::init([](double x, double y, double length, double orientation, int n_quad, double contrast) {
             return Crack{{x, y}, length, orientation, n_quad, contrast};
           }),
           py::arg("x"), py::arg("y"), py::arg("length"), py::arg("orientation"), py::arg("n_quad") = 0,
           py::arg("contrast") = 1.0)
      .def_property_readonly("center", [](const Crack& c) { return std::pair{c.center.x, c.center.y}; })
      .def_readwrite("length", &Crack::length)
      .def_readwrite("orientation", &Crack::orientation)
      .def_readwrite("n_quad", &Crack::n_quad)
      .def_readwrite("contrast", &Crack::contrast);

  py::class_<SceneConfig>(m, "SceneConfig")
      .def(py::init<>())
      .def_readwrite("half_width", &SceneConfig::half_width)
      .def_readwrite("sensor_radius", &SceneConfig::sensor_radius)
      .def_readwrite("n_sensors", &SceneConfig::n_sensors)
      .def_readwrite("wavenumber", &SceneConfig::wavenumber)
      .def_readwrite("cracks", &SceneConfig::cracks)
      .def_readwrite("noise_delta", &SceneConfig::noise_delta)
      .def_readwrite("rng_seed", &SceneConfig::rng_seed)
      .def("validate", &SceneConfig::validate);

  py::class_<RhsLibrary>(m, "RhsLibrary")
      .def_readonly("patterns", &RhsLibrary::patterns)
      .def_readonly("nx", &RhsLibrary::nx)
      .def_readonly("ny", &RhsLibrary::ny)
      .def_readonly("orientations", &RhsLibrary::orientations)
      .def_property_readonly("grid",
                             [](const RhsLibrary& lib) {
                               std::vector<std::pair<double, double>> out;
                               for (const Point& p : lib.grid) out.emplace_back(p.x, p.y);
                               return out;
                             })
      .def("index", &RhsLibrary::index, py::arg("p"), py::arg("s"));

  m.def("green", [](std::pair<double, double> x, std::pair<double, double> y,
                    double k) { return green({x.first, x.second}, {y.first, y.second}, k); },
        py::arg("x"), py::arg("y"), py::arg("k"));
  m.def("build_operator", [](const SceneConfig& cfg) { return build_operator(cfg).entries; }, py::arg("scene"));
  m.def("add_noise",
        [](const CMatrix& F, double delta, std::uint64_t seed) {
          return add_noise(Operator{F, false, 0.0}, delta, seed).entries;
        },
        py::arg("F"), py::arg("delta"), py::arg("seed"));
  m.def("build_rhs_library", &build_rhs_library, py::arg("scene"), py::arg("nx"), py::arg("ny"),
        py::arg("n_orientations"));

  m.def("decompose",
        [](const CMatrix& F) {
          const Svd s = decompose(F);
          return py::make_tuple(s.U, s.D, s.V);
        },
        py::arg("F"), "Returns (U, D, V) with F = U diag(D) V^*.");
  m.def("tikhonov_solution",
        [](const CMatrix& U, const RVector& D, const CMatrix& V, const CVector& u, double alpha) {
          const Svd s = make_svd(U, D, V);
          return tikhonov_solution(s, project(s, u), alpha).g;
        },
        py::arg("U"), py::arg("D"), py::arg("V"), py::arg("u"), py::arg("alpha"));

  m.def("discrepancy", py::overload_cast<double, double, const RVector&, const RVector&>(&discrepancy),
        py::arg("alpha"), py::arg("eta"), py::arg("d2"), py::arg("power"));
  m.def("discrepancy_derivative",
        py::overload_cast<double, double, const RVector&, const RVector&>(&discrepancy_derivative), py::arg("alpha"),
        py::arg("eta"), py::arg("d2"), py::arg("power"));
  m.def("solve_alpha", py::overload_cast<double, const RVector&, const RVector&, double>(&solve_alpha),
        py::arg("eta"), py::arg("d2"), py::arg("power"), py::arg("tol") = kDefaultMorozovTol);
  m.def("imaging_term",
        [](double alpha, const RVector& d2, const RVector& power) {
          const ImagingTerm t = imaging_term(alpha, d2, power);
          return py::make_tuple(t.value, t.slope);
        },
        py::arg("alpha"), py::arg("d2"), py::arg("power"));

  m.def("lsm_image",
        [](const CMatrix& U, const RVector& D, const CMatrix& V, const RhsLibrary& lib,
           const std::vector<double>& alpha) {
          return lsm_image(make_svd(U, D, V), lib, make_map(lib, alpha)).values;
        },
        py::arg("U"), py::arg("D"), py::arg("V"), py::arg("library"), py::arg("alpha"),
        "Indicator per grid point for one alpha per library pattern.");
  m.def("contrast",
        [](const SceneConfig& scene, const RhsLibrary& lib, const std::vector<double>& values, double radius) {
          IndicatorImage img;
          img.nx = lib.nx;
          img.ny = lib.ny;
          img.values = values;
          const ContrastReport r = contrast(img, build_masks(scene, lib, radius));
          return py::make_tuple(r.c_mean, r.c_max);
        },
        py::arg("scene"), py::arg("library"), py::arg("values"), py::arg("radius"), "Returns (C_mn, C_mx).");

  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_readwrite("scene", &RunConfig::scene)
      .def_readwrite("grid_nx", &RunConfig::grid_nx)
      .def_readwrite("grid_ny", &RunConfig::grid_ny)
      .def_readwrite("orientations", &RunConfig::orientations)
      .def_readwrite("eta0", &RunConfig::eta0)
      .def_readwrite("hidden1", &RunConfig::hidden1)
      .def_readwrite("hidden2", &RunConfig::hidden2)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("epoch1", &RunConfig::epoch1)
      .def_readwrite("max_epochs2", &RunConfig::max_epochs2)
      .def_readwrite("lr1", &RunConfig::lr1)
      .def_readwrite("lr2", &RunConfig::lr2)
      .def_readwrite("m", &RunConfig::m)
      .def_readwrite("output_dir", &RunConfig::output_dir)
      .def_property(
          "mode", [](const RunConfig& c) { return c.mode == TrainMode::Basic ? "basic" : "informed"; },
          [](RunConfig& c, const std::string& v) {
            if (v != "basic" && v != "informed") throw Error(ErrorCode::ConfigError, "mode: basic or informed");
            c.mode = v == "basic" ? TrainMode::Basic : TrainMode::Informed;
          })
      .def("validate", &RunConfig::validate)
      .def("format", &format_config);
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("origin") = "<config>");
  m.def("load_config", &load_config, py::arg("path"));

  m.def("simulate", &cmd_simulate, py::arg("config"));
  m.def("morozov", &cmd_morozov, py::arg("config"), py::arg("eta") = py::none(), py::arg("sweep") = false);
  m.def("train",
        [](const RunConfig& cfg) {
          const TrainSummary s = cmd_train(cfg);
          py::dict d;
          d["epoch1"] = s.epoch1;
          d["stop_epoch"] = s.stop_epoch;
          d["last_saved_epoch"] = s.last_saved_epoch;
          d["reason"] = std::string(to_string(s.reason));
          d["initial_loss"] = s.initial_loss;
          d["step1_loss"] = s.step1_loss;
          return d;
        },
        py::arg("config"));
  m.def("image",
        [](const RunConfig& cfg, const std::string& source, std::optional<double> eta) {
          if (source != "morozov" && source != "net") throw Error(ErrorCode::ConfigError, "source: morozov or net");
          py::dict out;
          for (const ContrastRow& r :
               cmd_image(cfg, source == "net" ? ImageSource::Net : ImageSource::Morozov, eta)) {
            out[py::str(r.tag)] = py::make_tuple(r.report.c_mean, r.report.c_max);
          }
          return out;
        },
        py::arg("config"), py::arg("source") = "morozov", py::arg("eta") = py::none(),
        "Returns {tag: (C_mn, C_mx)}.");
  m.def("report", &cmd_report, py::arg("config"));
}
