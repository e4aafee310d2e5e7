#include "mflow/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <limits>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

#include "mflow/euclidean.hpp"

namespace mflow {

using nlohmann::json;

Problem parse_problem(std::string_view name) {
  if (name == "heat") return Problem::heat;
  if (name == "pme" || name == "porous_medium") return Problem::pme;
  if (name == "fokker_planck" || name == "fp") return Problem::fokker_planck;
  if (name == "euclidean_quadratic" || name == "euclidean") return Problem::euclidean_quadratic;
  throw std::invalid_argument("unknown problem '" + std::string(name) + "'");
}

std::string_view to_string(Problem problem) {
  switch (problem) {
    case Problem::heat: return "heat";
    case Problem::pme: return "pme";
    case Problem::fokker_planck: return "fokker_planck";
    case Problem::euclidean_quadratic: return "euclidean_quadratic";
  }
  return "?";
}

bool is_wasserstein(Problem problem) { return problem != Problem::euclidean_quadratic; }

EnergyKind energy_for(Problem problem) {
  switch (problem) {
    case Problem::heat: return EnergyKind::entropy;
    case Problem::pme: return EnergyKind::cubic;
    case Problem::fokker_planck: return EnergyKind::cubic_potential;
    case Problem::euclidean_quadratic: break;
  }
  throw std::invalid_argument("problem has no Wasserstein energy");
}

namespace {

std::string_view to_string(StageSolverOptions::Method m) {
  return m == StageSolverOptions::Method::newton ? "newton" : "gradient_descent";
}

StageSolverOptions::Method parse_method(std::string_view s) {
  if (s == "newton") return StageSolverOptions::Method::newton;
  if (s == "gradient_descent") return StageSolverOptions::Method::gradient_descent;
  throw std::invalid_argument("unknown solver '" + std::string(s) + "'");
}

bool third_order(std::string_view scheme) { return scheme == "diag7_order3"; }

}  // namespace

void RunConfig::validate() const {
  if (final_time <= 0) throw std::invalid_argument("final_time must be positive");
  if (step_counts.empty()) throw std::invalid_argument("step_counts must not be empty");
  for (std::size_t i = 0; i < step_counts.size(); ++i) {
    if (step_counts[i] < 1) throw std::invalid_argument("step counts must be positive");
    if (i > 0 && step_counts[i] <= step_counts[i - 1])
      throw std::invalid_argument("step_counts must be strictly increasing");
  }
  if (resolution < 3) throw std::invalid_argument("resolution must be at least 3");
  if (grid_points < 2) throw std::invalid_argument("grid_points must be at least 2");
  if (!(proxy_tol > 0.0)) throw std::invalid_argument("proxy_tol must be positive");
  if (proxy_initial_steps < 1) throw std::invalid_argument("proxy_initial_steps must be positive");
  if (trace_steps < 1) throw std::invalid_argument("trace_steps must be positive");
  if (euclidean_dim < 1) throw std::invalid_argument("euclidean_dim must be positive");
}

RunConfig default_config(Problem problem, std::string_view scheme) {
  RunConfig c;
  c.problem = problem;
  c.scheme = std::string(scheme);
  const bool third = third_order(scheme);
  switch (problem) {
    case Problem::heat:
      c.final_time = Rational(1, 16);
      c.step_counts = {4, 6, 8, 12, 16, 24};
      c.resolution = 32768;
      break;
    case Problem::pme:
      c.final_time = Rational(1, 8);
      c.step_counts = {4, 6, 8, 12, 16, 24, 32};
      break;
    case Problem::fokker_planck:
      c.final_time = Rational(1, 8);
      c.step_counts = third ? std::vector<int>{8, 12, 16, 24, 32, 48, 64}
                            : std::vector<int>{6, 8, 12, 16, 24, 32, 48};
      break;
    case Problem::euclidean_quadratic:
      c.final_time = Rational(1, 4);
      c.step_counts = {4, 8, 16, 32, 64};
      break;
  }
  return c;
}

RunConfig config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  const Problem problem = parse_problem(doc.value("problem", std::string("heat")));
  RunConfig c = default_config(problem, doc.value("scheme", std::string("stage3_order2")));
  try {
    for (const auto& [key, v] : doc.items()) {
      if (key == "problem" || key == "scheme") continue;
      if (key == "scheme_file") c.scheme_file = v.get<std::string>();
      else if (key == "final_time")
        c.final_time = v.is_string() ? parse_rational(v.get<std::string>()) : Rational(v.get<long long>());
      else if (key == "step_counts") c.step_counts = v.get<std::vector<int>>();
      else if (key == "resolution") c.resolution = v.get<int>();
      else if (key == "grid_points") c.grid_points = v.get<int>();
      else if (key == "proxy_tol") {
        if (v.is_string() && (v.get<std::string>() == "inf" || v.get<std::string>() == "infinity"))
          c.proxy_tol = std::numeric_limits<double>::infinity();
        else
          c.proxy_tol = v.get<double>();
      } else if (key == "proxy_scheme") c.proxy_scheme = v.get<std::string>();
      else if (key == "proxy_initial_steps") c.proxy_initial_steps = v.get<int>();
      else if (key == "trace_steps") c.trace_steps = v.get<int>();
      else if (key == "bootstrap") c.bootstrap = parse_bootstrap(v.get<std::string>());
      else if (key == "solver") c.solver = parse_method(v.get<std::string>());
      else if (key == "euclidean_dim") c.euclidean_dim = v.get<int>();
      else if (key == "seed") c.seed = v.get<std::uint64_t>();
      else throw std::invalid_argument("unknown config key '" + key + "'");
    }
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config field has the wrong type: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_to_json(const RunConfig& c) {
  nlohmann::ordered_json doc;
  doc["problem"] = std::string(to_string(c.problem));
  doc["scheme"] = c.scheme;
  if (!c.scheme_file.empty()) doc["scheme_file"] = c.scheme_file;
  doc["final_time"] = to_string(c.final_time);
  doc["step_counts"] = c.step_counts;
  doc["resolution"] = c.resolution;
  doc["grid_points"] = c.grid_points;
  if (std::isinf(c.proxy_tol))
    doc["proxy_tol"] = "inf";
  else
    doc["proxy_tol"] = c.proxy_tol;
  doc["proxy_scheme"] = c.proxy_scheme;
  doc["proxy_initial_steps"] = c.proxy_initial_steps;
  doc["trace_steps"] = c.trace_steps;
  doc["bootstrap"] = to_string(c.bootstrap);
  doc["solver"] = std::string(to_string(c.solver));
  doc["euclidean_dim"] = c.euclidean_dim;
  doc["seed"] = c.seed;
  return doc.dump(2);
}

SchemeCoefficients resolve_scheme(const RunConfig& config) {
  if (config.scheme_file.empty()) return builtin_scheme(config.scheme);
  std::ifstream in(config.scheme_file);
  if (!in) throw std::invalid_argument("cannot open scheme file '" + config.scheme_file + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return scheme_from_json(ss.str());
}

double relative_l2_error(std::span<const double> u, std::span<const double> ref) {
  if (u.size() != ref.size() || u.size() < 2)
    throw std::invalid_argument("relative_l2_error: grids differ");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double w = (i == 0 || i + 1 == u.size()) ? 0.5 : 1.0;
    num += w * (u[i] - ref[i]) * (u[i] - ref[i]);
    den += w * ref[i] * ref[i];
  }
  if (!(den > 0.0)) throw std::invalid_argument("relative_l2_error: reference is zero");
  return std::sqrt(num / den);
}

double fit_order(std::span<const int> steps, std::span<const double> errors) {
  if (steps.size() != errors.size()) throw std::invalid_argument("fit_order: size mismatch");
  if (steps.size() < 2) throw std::invalid_argument("fit_order needs at least two rows");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = static_cast<double>(steps.size());
  for (std::size_t i = 0; i < steps.size(); ++i) {
    if (!(errors[i] > 0.0) || steps[i] < 1) throw std::invalid_argument("fit_order: errors must be positive");
    const double x = -std::log(static_cast<double>(steps[i]));
    const double y = std::log(errors[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double denom = n * sxx - sx * sx;
  if (!(denom > 0.0)) throw std::invalid_argument("fit_order: step counts must differ");
  return (n * sxy - sx * sy) / denom;
}

void finish_table(ConvergenceTable& table) {
  std::vector<int> steps;
  std::vector<double> errors;
  for (std::size_t i = 0; i < table.rows.size(); ++i) {
    auto& r = table.rows[i];
    steps.push_back(r.steps);
    errors.push_back(r.error);
    r.order.reset();
    if (i > 0) {
      const auto& p = table.rows[i - 1];
      r.order = std::log(p.error / r.error) / std::log(static_cast<double>(r.steps) / p.steps);
    }
  }
  table.slope = table.rows.size() >= 2 ? fit_order(steps, errors) : std::numeric_limits<double>::quiet_NaN();
}

namespace {

Wasserstein1D make_space(const RunConfig& config) {
  StageSolverOptions opts;
  opts.method = config.solver;
  return Wasserstein1D(EnergyFunctional{energy_for(config.problem)}, opts);
}

EuclideanQuadratic make_euclidean(const RunConfig& config) {
  return EuclideanQuadratic::random(config.euclidean_dim, config.seed);
}

Eigen::VectorXd euclidean_start(const RunConfig& config) {
  return Eigen::VectorXd::Ones(config.euclidean_dim);
}

double step_size(const RunConfig& config, int steps) { return to_double(config.final_time / steps); }

// Runs fn(i) for i in [0, jobs) on worker_count(jobs) threads; rethrows the
// first failure.
void parallel_for(int jobs, const std::function<void(int)>& fn) {
  const int workers = worker_count(jobs);
  if (workers <= 1) {
    for (int i = 0; i < jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  {
    std::vector<std::jthread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < jobs; i = next++) {
          try {
            fn(i);
          } catch (...) {
            std::lock_guard lock(failure_mutex);
            if (!failure) failure = std::current_exception();
          }
        }
      });
  }
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

int worker_count(int jobs) {
  int n = static_cast<int>(std::thread::hardware_concurrency());
  if (const char* env = std::getenv("MFLOW_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && v > 0) n = static_cast<int>(v);
  }
  return std::max(1, std::min(n, jobs));
}

WassersteinRun run_wasserstein(const RunConfig& config, const SchemeCoefficients& scheme, int steps) {
  Wasserstein1D space = make_space(config);
  auto traj = run(scheme, space, initial_quantile(config.resolution), step_size(config, steps), steps,
                  config.bootstrap);
  return {std::move(traj), space};
}

std::vector<double> final_density(const RunConfig& config, const SchemeCoefficients& scheme, int steps) {
  const auto r = run_wasserstein(config, scheme, steps);
  return quantile_to_density(r.trajectory.points.back(), uniform_grid(config.grid_points));
}

ProxyResult proxy_exact(const RunConfig& config, double tol) {
  if (!is_wasserstein(config.problem)) throw std::invalid_argument("proxy_exact needs a Wasserstein problem");
  if (!(tol > 0.0)) throw std::invalid_argument("proxy_exact needs a positive tolerance");
  const SchemeCoefficients scheme = builtin_scheme(config.proxy_scheme);
  const double floor = to_double(config.final_time) * std::ldexp(1.0, -20);
  ProxyResult out;
  int steps = config.proxy_initial_steps;
  if (step_size(config, steps) < floor)
    throw std::runtime_error("proxy_exact: initial step size is below the floor 2^-20 T");
  out.density = final_density(config, scheme, steps);
  out.info = {steps, step_size(config, steps), std::numeric_limits<double>::infinity(), 0};
  while (!(out.info.last_difference < tol)) {
    if (std::isinf(tol)) break;
    if (step_size(config, 2 * steps) < floor)
      throw std::runtime_error("proxy_exact: no convergence to " + std::to_string(tol) +
                               " before the step size floor (last difference " +
                               std::to_string(out.info.last_difference) + ")");
    steps *= 2;
    std::vector<double> finer = final_density(config, scheme, steps);
    out.info.last_difference = relative_l2_error(out.density, finer);
    out.density = std::move(finer);
    out.info.steps = steps;
    out.info.k = step_size(config, steps);
    ++out.info.refinements;
  }
  return out;
}

ConvergenceTable convergence(const RunConfig& config) {
  config.validate();
  const SchemeCoefficients scheme = resolve_scheme(config);
  ConvergenceTable table;
  table.problem = config.problem;
  table.scheme = config.scheme_file.empty() ? config.scheme : config.scheme_file;
  const int rows = static_cast<int>(config.step_counts.size());
  table.rows.resize(static_cast<std::size_t>(rows));

  if (config.problem == Problem::euclidean_quadratic) {
    const EuclideanQuadratic space = make_euclidean(config);
    const Eigen::VectorXd u0 = euclidean_start(config);
    const Eigen::VectorXd exact = space.exact_flow(u0, to_double(config.final_time));
    parallel_for(rows, [&](int i) {
      const int n = config.step_counts[static_cast<std::size_t>(i)];
      const auto traj = run(scheme, space, u0, step_size(config, n), n, config.bootstrap);
      table.rows[static_cast<std::size_t>(i)] = {n, step_size(config, n),
                                                 (traj.points.back() - exact).norm() / exact.norm(), {}};
    });
    finish_table(table);
    return table;
  }

  const std::vector<double> grid = uniform_grid(config.grid_points);
  std::vector<double> reference;
  if (config.problem == Problem::heat) {
    reference = exact_heat_solution(to_double(config.final_time), grid);
  } else {
    ProxyResult proxy = proxy_exact(config, config.proxy_tol);
    reference = std::move(proxy.density);
    table.proxy = proxy.info;
  }
  parallel_for(rows, [&](int i) {
    const int n = config.step_counts[static_cast<std::size_t>(i)];
    const auto u = final_density(config, scheme, n);
    table.rows[static_cast<std::size_t>(i)] = {n, step_size(config, n), relative_l2_error(u, reference), {}};
  });
  finish_table(table);
  return table;
}

double EnergyTrace::max_increase() const {
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t n = 1; n < energy.size(); ++n) worst = std::max(worst, energy[n] - energy[n - 1]);
  return worst;
}

double EnergyTrace::excess_over_first() const {
  if (energy.size() < 2) return 0.0;
  double worst = 0.0;
  for (std::size_t n = 1; n < energy.size(); ++n) worst = std::max(worst, energy[n] - energy[1]);
  return worst;
}

namespace {

template <MetricEnergySpace S>
EnergyTrace trace_of(const S& space, const Trajectory<typename S::Point>& traj) {
  EnergyTrace out;
  out.k = traj.k;
  out.bootstrapped = traj.bootstrapped;
  for (std::size_t n = 0; n < traj.points.size(); ++n) {
    out.energy.push_back(space.energy(traj.points[n]));
    out.d2.push_back(n == 0 ? 0.0 : space.distance_squared(traj.points[n], traj.points[n - 1]));
  }
  return out;
}

}  // namespace

EnergyTrace energy_trace(const RunConfig& config) {
  config.validate();
  const SchemeCoefficients scheme = resolve_scheme(config);
  const double k = step_size(config, config.trace_steps);
  if (config.problem == Problem::euclidean_quadratic) {
    const EuclideanQuadratic space = make_euclidean(config);
    return trace_of(space, run(scheme, space, euclidean_start(config), k, config.trace_steps, config.bootstrap));
  }
  const auto r = run_wasserstein(config, scheme, config.trace_steps);
  return trace_of(r.space, r.trajectory);
}

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table) {
  const auto old = out.precision(17);
  out << "steps,k,error,order\n";
  for (const auto& r : table.rows) {
    out << r.steps << ',' << r.k << ',' << r.error << ',';
    if (r.order) out << *r.order;
    out << '\n';
  }
  out.precision(old);
}

void write_energy_csv(std::ostream& out, const EnergyTrace& trace) {
  const auto old = out.precision(17);
  out << "n,energy,d2,bootstrap\n";
  for (std::size_t n = 0; n < trace.energy.size(); ++n) {
    out << n << ',' << trace.energy[n] << ',';
    if (n > 0) out << trace.d2[n];
    out << ',' << (trace.bootstrapped[n] ? 1 : 0) << '\n';
  }
  out.precision(old);
}

void write_density_csv(std::ostream& out, std::span<const double> grid, std::span<const double> u) {
  if (grid.size() != u.size()) throw std::invalid_argument("write_density_csv: size mismatch");
  const auto old = out.precision(17);
  out << "x,u\n";
  for (std::size_t i = 0; i < grid.size(); ++i) out << grid[i] << ',' << u[i] << '\n';
  out.precision(old);
}

void write_quantile_csv(std::ostream& out, const QuantileFunction& x) {
  const auto old = out.precision(17);
  out << "y,X\n";
  for (int m = 0; m < x.resolution(); ++m) out << x.mass_coordinate(m) << ',' << x[m] << '\n';
  out.precision(old);
}

}  // namespace mflow
