#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mflow/experiments.hpp"
#include "mflow/scheme.hpp"
#include "mflow/stability.hpp"
#include "mflow/wasserstein1d.hpp"

namespace py = pybind11;
using namespace mflow;

namespace {

py::dict consistency(const std::string& name) {
  const SchemeCoefficients s = builtin_scheme(name);
  const ConsistencyReport r = consistency_vars(s);
  auto column = [](const std::vector<Rational>& v) {
    std::vector<std::string> out;
    for (const auto& x : v) out.push_back(to_string(x));
    return out;
  };
  py::dict d;
  d["steps"] = s.steps();
  d["stages"] = s.stages();
  d["a"] = column(r.a);
  d["b"] = column(r.b);
  d["c"] = column(r.c);
  d["d"] = column(r.d);
  d["order"] = r.order;
  return d;
}

// {(i, j): "num/den"} for the nonzero weights.
std::map<std::pair<int, int>, std::string> weight_table(const std::string& name) {
  const WeightMatrix w = weights(builtin_scheme(name));
  std::map<std::pair<int, int>, std::string> out;
  for (int i = 0; i <= w.stages(); ++i)
    for (int j = -w.steps() + 1; j < i; ++j)
      if (w.at(i, j) != 0) out[{i, j}] = to_string(w.at(i, j));
  return out;
}

py::dict certify(const std::string& name) {
  const StabilityCertificate c = certify_builtin(name);
  std::vector<double> lambdas;
  for (const auto& s : c.spectra) lambdas.push_back(s.max_eigenvalue);
  py::dict d;
  d["kind"] = std::string(to_string(c.kind));
  d["max_eigenvalues"] = lambdas;
  d["report"] = format_certificate(c);
  return d;
}

py::dict convergence_table(const std::string& config_json) {
  const ConvergenceTable t = convergence(config_from_json(config_json));
  std::vector<int> steps;
  std::vector<double> errors;
  for (const auto& r : t.rows) {
    steps.push_back(r.steps);
    errors.push_back(r.error);
  }
  py::dict d;
  d["steps"] = steps;
  d["errors"] = errors;
  d["slope"] = t.slope;
  return d;
}

py::dict trace(const std::string& config_json) {
  const EnergyTrace t = energy_trace(config_from_json(config_json));
  py::dict d;
  d["energy"] = t.energy;
  d["d2"] = t.d2;
  d["max_increase"] = t.max_increase();
  return d;
}

}  // namespace

PYBIND11_MODULE(_mflow, m) {
  m.doc() = "Mixed variational schemes for gradient flows in metric spaces.";

  m.def("builtin_scheme_names", &builtin_scheme_names);
  m.def("consistency", &consistency, py::arg("scheme"),
        "Consistency variables a, b, c, d (as 'num/den' strings, index j + M - 1) and the order.");
  m.def("weights", &weight_table, py::arg("scheme"));
  m.def("certify", &certify, py::arg("scheme"));

  m.def("relative_l2_error",
        [](const std::vector<double>& u, const std::vector<double>& ref) { return relative_l2_error(u, ref); });
  m.def("fit_order", [](const std::vector<int>& steps, const std::vector<double>& errors) {
    return fit_order(steps, errors);
  });
  m.def("convergence", &convergence_table, py::arg("config_json"),
        "Runs a convergence study described by a JSON config.");
  m.def("energy_trace", &trace, py::arg("config_json"));

  m.def("initial_quantile", [](int resolution) { return initial_quantile(resolution).values(); });
  m.def("w2_distance_squared", [](const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    return w2_distance_squared(QuantileFunction(x), QuantileFunction(y));
  });
  m.def("quantile_to_density", [](const Eigen::VectorXd& x, const std::vector<double>& grid) {
    return quantile_to_density(QuantileFunction(x), grid);
  });
  m.def("exact_heat_solution", [](double t, const std::vector<double>& grid) {
    return exact_heat_solution(t, grid);
  });
  m.def("uniform_grid", &uniform_grid);
}
