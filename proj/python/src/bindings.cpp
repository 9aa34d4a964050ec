#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "phl/config.hpp"
#include "phl/control.hpp"
#include "phl/error.hpp"
#include "phl/harness.hpp"
#include "phl/numerics.hpp"
#include "phl/predictors.hpp"
#include "phl/theory.hpp"

namespace py = pybind11;
using phl::Matrix;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

Array to_numpy(const Matrix& m) {
  Array out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

Matrix from_numpy(const Array& a, const char* name) {
  if (a.ndim() != 2) throw py::value_error(std::string(name) + " must be a 2-D array");
  const auto r = static_cast<std::size_t>(a.shape(0)), c = static_cast<std::size_t>(a.shape(1));
  return Matrix(r, c, std::vector<double>(a.data(), a.data() + r * c));
}

phl::Trajectory trajectory(const Array& y, const Array& u) {
  phl::Trajectory t{from_numpy(y, "y"), from_numpy(u, "u"), std::nullopt};
  if (t.u.rows() != t.y.rows()) throw py::value_error("y and u need the same number of rows");
  return t;
}

phl::TerminalMode terminal_mode(const std::string& s) {
  if (s == "error") return phl::TerminalMode::Error;
  if (s == "min_norm") return phl::TerminalMode::MinNorm;
  throw py::value_error("terminal must be 'error' or 'min_norm'");
}

py::dict theory_summary(const phl::LtiModel& m, int horizon) {
  const phl::SystemAnalysis sys = phl::analyze(m, horizon);
  py::dict d;
  d["regime"] = m.well_specified() ? "well" : "mis";
  d["horizon"] = horizon;
  d["rho_A"] = phl::numerics::spectral_radius(m.a());
  for (auto kind : {phl::theory::PredictorKind::Multi, phl::theory::PredictorKind::Single}) {
    const auto rep = phl::theory::asymptotic_report(m, sys, kind);
    const std::string p = kind == phl::theory::PredictorKind::Multi ? "multi_step" : "single_step";
    d[py::str(p + "_irreducible")] = rep.irreducible;
    d[py::str(p + "_rate")] = rep.reducible_rate;
  }
  if (!m.well_specified()) d["single_step_limit_rho"] = phl::theory::lemma1_check(m, sys.bundle);
  return d;
}

}  // namespace

PYBIND11_MODULE(_core, mod) {
  mod.doc() = "Multi-step vs single-step linear prediction: simulation, fitting, theory, MPC.";

  // Messages carry the error kind as a prefix, e.g. "TooShort: ...".
  py::register_exception<phl::Error>(mod, "PhlError", PyExc_RuntimeError);

  py::class_<phl::LtiModel>(mod, "Model")
      .def(py::init([](const Array& a, const Array& b, const Array& b_w, const Array& c,
                       const Array& d_v) {
             return phl::LtiModel(from_numpy(a, "A"), from_numpy(b, "B"), from_numpy(b_w, "B_w"),
                                  from_numpy(c, "C"), from_numpy(d_v, "D_v"));
           }),
           py::arg("A"), py::arg("B"), py::arg("B_w"), py::arg("C"), py::arg("D_v"))
      .def_property_readonly("A", [](const phl::LtiModel& m) { return to_numpy(m.a()); })
      .def_property_readonly("B", [](const phl::LtiModel& m) { return to_numpy(m.b()); })
      .def_property_readonly("B_w", [](const phl::LtiModel& m) { return to_numpy(m.b_w()); })
      .def_property_readonly("C", [](const phl::LtiModel& m) { return to_numpy(m.c()); })
      .def_property_readonly("D_v", [](const phl::LtiModel& m) { return to_numpy(m.d_v()); })
      .def_property_readonly("well_specified", &phl::LtiModel::well_specified)
      .def("with_input",
           [](const phl::LtiModel& m, const Array& b) { return m.with_input(from_numpy(b, "B")); })
      .def("to_json", &phl::model_to_json)
      .def_static("from_json", &phl::model_from_json);

  mod.def("eq10_system", &phl::eq10_system, py::arg("a"), py::arg("well_specified"));
  mod.def("example1_system", &phl::example1_system);

  mod.def(
      "simulate",
      [](const phl::LtiModel& m, std::size_t n, std::uint64_t seed) {
        const phl::Trajectory t = phl::simulate(m, n, seed);
        return py::make_tuple(to_numpy(t.y), to_numpy(t.u));
      },
      py::arg("model"), py::arg("n"), py::arg("seed"),
      "Open-loop trajectory from x = 0; returns (y, u) with one row per step.");

  py::class_<phl::Predictor>(mod, "Predictor")
      .def_property_readonly("G", [](const phl::Predictor& p) { return to_numpy(p.g); })
      .def_readonly("horizon", &phl::Predictor::horizon)
      .def_property_readonly("structure",
                             [](const phl::Predictor& p) { return std::string(to_string(p.structure)); })
      .def("predict",
           [](const phl::Predictor& p, const std::vector<double>& y, const std::vector<double>& u) {
             return phl::predict(p, y, u);
           })
      .def("to_json", &phl::predictor_to_json)
      .def_static("from_json", &phl::predictor_from_json);

  mod.def(
      "fit_multi_step",
      [](const Array& y, const Array& u, int horizon, double ridge) {
        return phl::fit_multi_step(trajectory(y, u), horizon, ridge);
      },
      py::arg("y"), py::arg("u"), py::arg("horizon"), py::arg("ridge") = 0.0);
  mod.def(
      "fit_single_step",
      [](const Array& y, const Array& u, int horizon, double ridge) {
        return phl::single_step_predictor(trajectory(y, u), horizon, ridge);
      },
      py::arg("y"), py::arg("u"), py::arg("horizon"), py::arg("ridge") = 0.0,
      "One-step least squares composed into an H-step rollout.");
  mod.def(
      "compose_rollout",
      [](const Array& g_y, const Array& g_u, int horizon) {
        return phl::compose_rollout(from_numpy(g_y, "g_y"), from_numpy(g_u, "g_u"), horizon);
      },
      py::arg("g_y"), py::arg("g_u"), py::arg("horizon"));
  mod.def(
      "analytic_loss",
      [](const phl::Predictor& p, const phl::LtiModel& m) {
        return phl::analytic_loss(p, m, phl::analyze(m, p.horizon));
      },
      py::arg("predictor"), py::arg("model"));

  mod.def("theory", &theory_summary, py::arg("model"), py::arg("horizon"),
          "Closed-form asymptotic quantities for the model at the given horizon.");

  mod.def(
      "synthesize_mpc",
      [](const phl::Predictor& p, int horizon, const std::string& terminal) {
        return to_numpy(phl::synthesize_mpc(p, {horizon, terminal_mode(terminal)}).f);
      },
      py::arg("predictor"), py::arg("horizon") = 0, py::arg("terminal") = "error",
      "Feedback gain F of the terminal-constrained MPC (u_t = F y_t).");
  mod.def(
      "closed_loop_metrics",
      [](const phl::LtiModel& m, const Array& f) {
        const auto cl = phl::closed_loop_metrics(m, from_numpy(f, "F"));
        py::dict d;
        d["lqr_cost"] = cl.lqr_cost;
        d["rho_cl"] = cl.rho_cl;
        d["stable"] = cl.stable;
        return d;
      },
      py::arg("model"), py::arg("F"));

  mod.def(
      "run_experiment",
      [](const std::string& config_json) {
        const auto rows = [&] {
          py::gil_scoped_release release;
          return phl::run_experiment(phl::parse_config(config_json));
        }();
        std::ostringstream out;
        phl::write_csv(out, rows);
        return out.str();
      },
      py::arg("config_json"), "Runs a sweep from a JSON config and returns the CSV text.");
}
