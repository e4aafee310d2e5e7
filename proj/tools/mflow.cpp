// mflow: command-line harness for the mixed variational schemes.
//
//   mflow verify-scheme [name] [--scheme-file f]
//   mflow certify [name] [--scheme-file f] [--l1 r --l2 r]
//   mflow run | convergence | energy-trace [--config f] [--problem p] [--scheme s] [--out dir]
//
// Failures print one JSON line {"error": ..., "kind": ...} on stderr and
// exit nonzero (2: bad input, 3: solver failure).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "mflow/experiments.hpp"
#include "mflow/euclidean.hpp"
#include "mflow/scheme.hpp"
#include "mflow/stability.hpp"

namespace fs = std::filesystem;
using namespace mflow;

namespace {

struct Options {
  std::string scheme_name;
  std::string scheme_file;
  std::string l1, l2;
  std::string config_path;
  std::string problem;
  std::string out_dir = ".";
};

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

SchemeCoefficients load_scheme(const Options& o) {
  if (!o.scheme_file.empty()) return scheme_from_json(slurp(o.scheme_file));
  return builtin_scheme(o.scheme_name.empty() ? "stage3_order2" : o.scheme_name);
}

RunConfig load_config(const Options& o) {
  RunConfig c;
  if (!o.config_path.empty()) {
    c = config_from_json(slurp(o.config_path));
  } else {
    c = default_config(parse_problem(o.problem.empty() ? "heat" : o.problem),
                       o.scheme_name.empty() ? "stage3_order2" : o.scheme_name);
  }
  if (!o.config_path.empty() && !o.problem.empty() && parse_problem(o.problem) != c.problem)
    throw std::invalid_argument("--problem disagrees with the config file");
  if (!o.config_path.empty() && !o.scheme_name.empty()) c.scheme = o.scheme_name;
  if (!o.scheme_file.empty()) c.scheme_file = o.scheme_file;
  c.validate();
  return c;
}

std::ofstream open_out(const Options& o, const std::string& name) {
  fs::create_directories(o.out_dir);
  const fs::path path = fs::path(o.out_dir) / name;
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot write '" + path.string() + "'");
  return out;
}

void write_metadata(const Options& o, const RunConfig& c, const std::string& command,
                    const nlohmann::ordered_json& extra) {
  nlohmann::ordered_json doc;
  doc["command"] = command;
  doc["config"] = nlohmann::ordered_json::parse(config_to_json(c));
  const StageSolverOptions solver;
  doc["stage_solver"] = {{"step_tol", solver.step_tol},
                         {"max_newton_iterations", solver.max_newton_iterations},
                         {"descent_rel_decrease_tol", solver.descent.rel_decrease_tol},
                         {"descent_grad_tol", solver.descent.grad_tol}};
  for (const auto& [k, v] : extra.items()) doc[k] = v;
  open_out(o, command + "_metadata.json") << doc.dump(2) << '\n';
}

int verify_scheme(const Options& o) {
  const SchemeCoefficients s = load_scheme(o);
  const ConsistencyReport r = consistency_vars(s);
  std::cout << "steps: " << s.steps() << "\nstages: " << s.stages() << '\n';
  std::cout << "j,a,b,c,d\n";
  for (int j = -s.steps() + 1; j <= s.stages(); ++j)
    std::cout << j << ',' << to_string(r.a_at(j)) << ',' << to_string(r.b_at(j)) << ','
              << to_string(r.c_at(j)) << ',' << to_string(r.d_at(j)) << '\n';
  std::cout << "order: " << r.order << '\n';
  return 0;
}

int certify(const Options& o) {
  if (o.l1.empty() != o.l2.empty()) throw std::invalid_argument("--l1 and --l2 go together");
  StabilityCertificate cert;
  const std::string name = o.scheme_name.empty() ? "stage3_order2" : o.scheme_name;
  if (o.scheme_file.empty() && o.l1.empty()) {
    cert = certify_builtin(name);
  } else if (o.scheme_file.empty()) {
    // Published parts, theta repaired for the requested shifts.
    const SchemeCoefficients s = builtin_scheme(name);
    const Rational l1 = parse_rational(o.l1), l2 = parse_rational(o.l2);
    const WeightMatrix w = shifted_weights(s, l1, l2);
    cert = certify_bounded(s, l1, l2, project_partition(builtin_certificate_input(name).decomposition, w));
  } else {
    const SchemeCoefficients s = load_scheme(o);
    if (o.l1.empty()) {
      cert = certify_dissipative(s, template_decomposition(s, weights(s)));
    } else {
      const Rational l1 = parse_rational(o.l1), l2 = parse_rational(o.l2);
      cert = certify_bounded(s, l1, l2, template_decomposition(s, shifted_weights(s, l1, l2)));
    }
  }
  std::cout << format_certificate(cert);
  return 0;
}

int run_cmd(const Options& o) {
  const RunConfig c = load_config(o);
  const SchemeCoefficients scheme = resolve_scheme(c);
  nlohmann::ordered_json extra;
  if (c.problem == Problem::euclidean_quadratic) {
    const EuclideanQuadratic space = EuclideanQuadratic::random(c.euclidean_dim, c.seed);
    const double k = to_double(c.final_time / c.trace_steps);
    const auto traj = run(scheme, space, Eigen::VectorXd::Ones(c.euclidean_dim), k, c.trace_steps, c.bootstrap);
    auto out = open_out(o, "trajectory.csv");
    write_trajectory_csv(out, space, traj);
    extra["stalled_steps"] = 0;
  } else {
    const auto r = run_wasserstein(c, scheme, c.trace_steps);
    {
      auto out = open_out(o, "trajectory.csv");
      write_trajectory_csv(out, r.space, r.trajectory);
    }
    const auto grid = uniform_grid(c.grid_points);
    {
      auto out = open_out(o, "density.csv");
      write_density_csv(out, grid, quantile_to_density(r.trajectory.points.back(), grid));
    }
    {
      auto out = open_out(o, "quantile.csv");
      write_quantile_csv(out, r.trajectory.points.back());
    }
    int stalled = 0;
    for (const auto& rep : r.trajectory.reports) stalled += rep.any_stalled() ? 1 : 0;
    extra["stalled_steps"] = stalled;
  }
  write_metadata(o, c, "run", extra);
  std::cout << "wrote trajectory for " << c.trace_steps << " steps to " << o.out_dir << '\n';
  return 0;
}

int convergence_cmd(const Options& o) {
  const RunConfig c = load_config(o);
  const ConvergenceTable t = convergence(c);
  {
    auto out = open_out(o, "convergence.csv");
    write_convergence_csv(out, t);
  }
  nlohmann::ordered_json extra;
  extra["slope"] = t.slope;
  if (t.proxy)
    extra["proxy"] = {{"steps", t.proxy->steps},
                      {"k", t.proxy->k},
                      {"last_difference", t.proxy->last_difference},
                      {"refinements", t.proxy->refinements}};
  write_metadata(o, c, "convergence", extra);
  write_convergence_csv(std::cout, t);
  std::cout << "slope: " << t.slope << '\n';
  return 0;
}

int energy_trace_cmd(const Options& o) {
  const RunConfig c = load_config(o);
  const EnergyTrace t = energy_trace(c);
  {
    auto out = open_out(o, "energy.csv");
    write_energy_csv(out, t);
  }
  nlohmann::ordered_json extra;
  extra["max_increase"] = t.max_increase();
  extra["excess_over_first"] = t.excess_over_first();
  write_metadata(o, c, "energy-trace", extra);
  std::cout.precision(17);
  std::cout << "max_increase: " << t.max_increase() << "\nexcess_over_first: " << t.excess_over_first() << '\n';
  return 0;
}

int fail(const std::string& kind, const std::string& what, int code) {
  nlohmann::json line{{"error", what}, {"kind", kind}};
  std::cerr << line.dump() << '\n';
  return code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed variational schemes for gradient flows"};
  app.require_subcommand(1);
  Options o;

  auto add_scheme = [&](CLI::App* sub) {
    sub->add_option("scheme", o.scheme_name, "Built-in scheme name");
    sub->add_option("--scheme-file", o.scheme_file, "Scheme JSON file");
  };
  auto add_run = [&](CLI::App* sub) {
    add_scheme(sub);
    sub->add_option("--config", o.config_path, "Run configuration (JSON)");
    sub->add_option("--problem", o.problem, "heat, pme, fokker_planck or euclidean_quadratic");
    sub->add_option("--out", o.out_dir, "Output directory");
  };

  auto* verify = app.add_subcommand("verify-scheme", "Consistency variables and order");
  add_scheme(verify);
  auto* cert = app.add_subcommand("certify", "Energy stability certificate");
  add_scheme(cert);
  cert->add_option("--l1", o.l1, "Shift on w(0,-1) for the boundedness criterion");
  cert->add_option("--l2", o.l2, "Shift on w(N,0) for the boundedness criterion");
  auto* runc = app.add_subcommand("run", "Trajectory, final density and quantiles");
  add_run(runc);
  auto* conv = app.add_subcommand("convergence", "Convergence table");
  add_run(conv);
  auto* trace = app.add_subcommand("energy-trace", "Energy sequence E(u_n)");
  add_run(trace);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return fail("usage", e.what(), 2);
  }

  try {
    if (*verify) return verify_scheme(o);
    if (*cert) return certify(o);
    if (*runc) return run_cmd(o);
    if (*conv) return convergence_cmd(o);
    if (*trace) return energy_trace_cmd(o);
  } catch (const StageFailure& e) {
    return fail("solver", e.what(), 3);
  } catch (const std::invalid_argument& e) {
    return fail("input", e.what(), 2);
  } catch (const std::out_of_range& e) {
    return fail("input", e.what(), 2);
  } catch (const std::exception& e) {
    return fail("failure", e.what(), 3);
  }
  return 0;
}
