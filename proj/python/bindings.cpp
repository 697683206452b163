#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>

#include "riskhjb/cli.hpp"
#include "riskhjb/config.hpp"
#include "riskhjb/hamiltonian.hpp"
#include "riskhjb/montecarlo.hpp"
#include "riskhjb/oracle.hpp"
#include "riskhjb/solver.hpp"

namespace py = pybind11;
using namespace riskhjb;

namespace {

// Reports cross the boundary as JSON text; the Python side decodes them.
py::object to_py(const nlohmann::json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

RunConfig with_theta(RunConfig c, std::optional<double> theta) {
  if (theta) c.model.theta = *theta;
  return c;
}

py::dict solve(const RunConfig& config, const std::vector<int>& nodes, int time_steps, std::optional<double> theta,
               const std::string& method) {
  const RunConfig c = with_theta(config, theta);
  const Lattice lat = lattice_for(c, nodes, time_steps);
  SolveResult r;
  {
    py::gil_scoped_release release;
    if (method == "policy_iteration")
      r = policy_iteration_solve(c.model, lat);
    else if (method == "direct")
      r = direct_solve(c.model, lat);
    else
      throw Error(ErrorCode::InvalidArgument, "method must be policy_iteration or direct");
  }
  Eigen::MatrixXd points(lat.size(), lat.n());
  for (int i = 0; i < lat.size(); ++i) points.row(i) = lat.point(i).transpose();
  std::vector<double> times;
  for (int k = 0; k <= lat.time_steps(); ++k) times.push_back(lat.time(k));
  py::list policy;
  for (const auto& h : r.policy.h) policy.append(h);
  py::dict out;
  out["times"] = times;
  out["points"] = points;
  std::vector<int> nodes_per_axis;
  for (int a = 0; a < lat.n(); ++a) nodes_per_axis.push_back(lat.nodes(a));
  out["nodes"] = nodes_per_axis;
  out["phi_tilde"] = r.value.values;
  out["phi"] = transform(r.value, c.model.theta, TransformDirection::ToRiskSensitive).values;
  out["policy"] = policy;
  out["report"] = to_py(report_to_json(r.report));
  return out;
}

}  // namespace

PYBIND11_MODULE(_riskhjb, m) {
  m.doc() = "Risk-sensitive jump-diffusion asset management by policy iteration";

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      const std::string msg = e.what();
      if (e.code() == ErrorCode::ParseError || e.code() == ErrorCode::InvalidArgument ||
          e.code() == ErrorCode::DimensionMismatch)
        PyErr_SetString(PyExc_ValueError, msg.c_str());
      else
        PyErr_SetString(PyExc_RuntimeError, msg.c_str());
    }
  });

  py::class_<RunConfig>(m, "Config")
      .def_property_readonly("n", [](const RunConfig& c) { return c.model.n(); })
      .def_property_readonly("m", [](const RunConfig& c) { return c.model.m(); })
      .def_property_readonly("theta", [](const RunConfig& c) { return c.model.theta; })
      .def_property_readonly("T", [](const RunConfig& c) { return c.model.T; })
      .def_property_readonly("hash", [](const RunConfig& c) { return config_hash(c.model); })
      .def("model_json", [](const RunConfig& c) { return to_py(model_to_json(c.model)); });

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("text"), py::arg("source") = "<string>");

  m.def(
      "validate",
      [](const RunConfig& c) {
        const Lattice lat = lattice_for(c);
        ProbeSpec probe;
        probe.lower = lat.lower();
        probe.upper = lat.upper();
        return to_py(validation_to_json(validate_model(c.model, probe)));
      },
      py::arg("config"));

  m.def("solve", &solve, py::arg("config"), py::arg("nodes") = std::vector<int>{}, py::arg("time_steps") = 0,
        py::arg("theta") = std::nullopt, py::arg("method") = "policy_iteration");

  m.def(
      "minimize_hamiltonian",
      [](const RunConfig& c, double t, const Eigen::VectorXd& x, double r, const Eigen::VectorXd& p) {
        HamiltonianInputs in{t, x, r, p};
        const MinimizerResult res = minimize_hamiltonian(in, c.model, {});
        py::dict out;
        out["h_star"] = res.h_star;
        out["objective"] = res.objective;
        out["kkt_residual"] = res.kkt_residual;
        out["active_set"] = res.active_set;
        out["jump_margin"] = res.jump_margin;
        return out;
      },
      py::arg("config"), py::arg("t"), py::arg("x"), py::arg("r"), py::arg("p"));

  m.def(
      "riccati",
      [](const RunConfig& c, int ode_steps) {
        const Lattice lat = lattice_for(c);
        const LGQSpec spec = lgq_from_model(c.model, lat.lower(), lat.upper());
        const RiccatiSolution sol = riccati_solve(spec, ode_steps);
        std::vector<std::pair<double, Eigen::VectorXd>> probes;
        for (int i = 0; i <= 10; ++i)
          for (int node : lat.interior_core()) probes.emplace_back(c.model.T * i / 10.0, lat.point(node));
        py::dict out;
        out["times"] = sol.times;
        out["Q"] = sol.Q;
        out["q"] = sol.q;
        out["k"] = sol.k;
        out["ansatz_residual"] = verify_ansatz(spec, sol, probes);
        return out;
      },
      py::arg("config"), py::arg("ode_steps") = 10000);

  m.def(
      "simulate",
      [](const RunConfig& c, const Eigen::VectorXd& h, const Eigen::VectorXd& x0, long long paths, double dt,
         std::uint64_t seed, bool antithetic) {
        SimConfig cfg;
        cfg.paths = paths;
        cfg.dt = dt;
        cfg.seed = seed;
        cfg.antithetic = antithetic;
        const Policy policy = Policy::constant(h);
        py::gil_scoped_release release;
        const WealthEstimate w = estimate_J_wealth(c.model, policy, x0, 0.0, cfg);
        const SimEstimate chi = estimate_chi_mean(c.model, policy, 0.0, x0, cfg);
        const SimEstimate itp = estimate_I_tilde(c.model, policy, 0.0, x0, cfg);
        py::gil_scoped_acquire acquire;
        return to_py({{"J", to_json(w.J)},
                      {"mean_log_wealth", w.mean_log_wealth},
                      {"var_log_wealth", w.var_log_wealth},
                      {"chi_mean", to_json(chi)},
                      {"I_tilde", to_json(itp)}});
      },
      py::arg("config"), py::arg("h"), py::arg("x0"), py::arg("paths") = 10000, py::arg("dt") = 0.01,
      py::arg("seed") = 1, py::arg("antithetic") = false);

  m.attr("__version__") = kToolVersion;
}
