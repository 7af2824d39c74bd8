#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "survenet/cli.hpp"
#include "survenet/evaluation.hpp"
#include "survenet/model_selection.hpp"
#include "survenet/simulation.hpp"

namespace py = pybind11;
using namespace survenet;

namespace {

SurvivalDataset make_dataset(const Vector& times, const Eigen::VectorXi& status, const Matrix& x) {
  SurvivalDataset d;
  d.times = times;
  d.status = status;
  d.covariates = x;
  d.validate();
  return d;
}

py::dict fit(const Vector& times, const Eigen::VectorXi& status, const Matrix& x, const std::string& method,
             std::optional<std::vector<double>> lambda2_grid, std::optional<std::vector<double>> lambda0_grid,
             std::optional<std::vector<double>> t1_grid, int folds, double gamma, double varsigma,
             std::uint64_t seed, int bootstrap_b, const std::string& weight_mode, bool cv_refit_weights) {
  TuningGrid grid;
  if (lambda2_grid) grid.lambda2_grid = *lambda2_grid;
  if (lambda0_grid) grid.lambda0_grid = *lambda0_grid;
  if (t1_grid) grid.t1_grid = *t1_grid;
  grid.folds = folds;
  grid.gamma = gamma;
  grid.varsigma = varsigma;
  grid.seed = seed;
  grid.cv_refit_weights = cv_refit_weights;
  grid.validate();
  WeightOptions w;
  w.mode = wenet_weight_mode_from_string(weight_mode);
  w.bootstrap_b = bootstrap_b;
  w.seed = derive_seed(seed, 7);

  TunedFit t;
  {
    py::gil_scoped_release release;
    t = fit_tuned(prepare(make_dataset(times, status, x)), method_from_string(method), grid, w);
  }
  py::dict out;
  out["method"] = to_string(t.method);
  out["beta"] = t.fit.beta;
  out["intercept"] = t.fit.intercept;
  out["selected"] = t.fit.selected;
  out["t1"] = t.t1;
  out["lambda2"] = t.lambda2;
  out["lambda0"] = t.cc ? py::cast(t.cc->lambda0) : py::none();
  out["weights"] = t.weights.w;
  out["cv_s"] = t.cv_s;
  out["cv_table"] = t.cv_table;
  out["aicc"] = t.aicc ? py::cast(*t.aicc) : py::none();
  out["xi"] = t.fit.xi ? py::cast(*t.fit.xi) : py::none();
  return out;
}

py::dict simulate_dataset(int sim, double rho, const std::string& model, double censoring, std::optional<Index> n,
                          std::uint64_t seed) {
  if (sim != 1 && sim != 2) throw InputError("sim must be 1 or 2");
  const ErrorLaw law = error_law_from_string(model);
  SimDesign d = sim == 1 ? sim1_design(rho, law, censoring) : sim2_design(rho, law, censoring);
  if (n) d.n = *n;
  d.seed = seed;
  d.validate();
  const double c0 = calibrate_c0(d, d.target_censoring);
  const CensoredSample s = simulate(d, c0);
  py::dict out;
  out["times"] = s.data.times;
  out["status"] = s.data.status;
  out["x"] = s.data.covariates;
  out["true_times"] = s.true_times;
  out["beta_true"] = d.beta_true;
  out["c0"] = c0;
  out["censoring_rate"] = s.censoring_rate;
  return out;
}

}  // namespace

PYBIND11_MODULE(_survenet, m) {
  m.doc() = "Variable selection for accelerated failure time models on right-censored data";
  static py::exception<InputError> input_error(m, "InputError", PyExc_ValueError);
  static py::exception<SolverError> solver_error(m, "SolverError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const InputError& e) {
      py::set_error(input_error, e.what());
    } catch (const SolverError& e) {
      py::set_error(solver_error, e.what());
    }
  });

  m.def("version", &version_string);

  m.def(
      "km_weights",
      [](const Vector& times, const Eigen::VectorXi& status) {
        const SurvivalDataset d = sorted_by_time(make_dataset(times, status, Matrix::Zero(times.size(), 0)));
        return compute_km_weights(d).weights;
      },
      py::arg("times"), py::arg("status"), "K-M jump sizes in time-sorted order (no tail correction).");

  m.def("fit", &fit, py::arg("times"), py::arg("status"), py::arg("x"), py::arg("method") = "aenet",
        py::arg("lambda2_grid") = py::none(), py::arg("lambda0_grid") = py::none(), py::arg("t1_grid") = py::none(),
        py::arg("folds") = 5, py::arg("gamma") = 1.0, py::arg("varsigma") = kDefaultVarsigma, py::arg("seed") = 1,
        py::arg("bootstrap_b") = kDefaultBootstrapB, py::arg("weight_mode") = "auto",
        py::arg("cv_refit_weights") = false,
        "Cross-validated fit of one method. `times` are log times; `status` is 1 for events.");

  m.def("simulate", &simulate_dataset, py::arg("sim") = 1, py::arg("rho") = 0.0, py::arg("model") = "lognormal",
        py::arg("censoring") = 30.0, py::arg("n") = py::none(), py::arg("seed") = 1);

  m.def(
      "sis_screen",
      [](const Vector& times, const Eigen::VectorXi& status, const Matrix& x, std::optional<Index> d_n) {
        const StandardizedData s = prepare(make_dataset(times, status, x));
        return sis_screen(s, d_n ? *d_n : std::min(default_sis_dn(s.n()), s.p()));
      },
      py::arg("times"), py::arg("status"), py::arg("x"), py::arg("d_n") = py::none());

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::ostringstream out, err;
        const int code = run_cli(args, out, err);
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs the command line in-process; returns (exit_code, stdout, stderr).");
}
