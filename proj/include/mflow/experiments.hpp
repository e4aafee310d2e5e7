#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mflow/metric_flow.hpp"
#include "mflow/rational.hpp"
#include "mflow/scheme.hpp"
#include "mflow/wasserstein1d.hpp"

namespace mflow {

enum class Problem { heat, pme, fokker_planck, euclidean_quadratic };

Problem parse_problem(std::string_view name);
std::string_view to_string(Problem problem);
bool is_wasserstein(Problem problem);
/// heat -> entropy, pme -> cubic, fokker_planck -> cubic_potential.
EnergyKind energy_for(Problem problem);

/// Everything a run, convergence study or energy trace needs. Loaded from a
/// JSON document whose keys match the field names; absent keys keep the
/// per-problem defaults of default_config.
struct RunConfig {
  Problem problem = Problem::heat;
  std::string scheme = "stage3_order2";
  std::string scheme_file;  // overrides `scheme` when set
  Rational final_time{1, 16};
  std::vector<int> step_counts;
  int resolution = 4096;    // M_q
  int grid_points = 2048;   // error / output grid
  double proxy_tol = 1e-9;  // +inf accepted ("inf")
  std::string proxy_scheme = "stage3_order2";
  int proxy_initial_steps = 64;
  int trace_steps = 16;  // run and energy-trace
  BootstrapPolicy bootstrap = BootstrapPolicy::stage3();
  StageSolverOptions::Method solver = StageSolverOptions::Method::newton;
  int euclidean_dim = 5;
  std::uint64_t seed = 1;

  /// Throws std::invalid_argument on a bad field.
  void validate() const;
};

/// Step lists and final times of the published tables; the resolution is 32768
/// for heat (compared with the closed form) and 4096 otherwise (compared with
/// a proxy at the same resolution).
RunConfig default_config(Problem problem, std::string_view scheme = "stage3_order2");
RunConfig config_from_json(std::string_view text);
std::string config_to_json(const RunConfig& config);

SchemeCoefficients resolve_scheme(const RunConfig& config);

/// ||u - ref|| / ||ref|| with trapezoidal weights on a uniform grid.
double relative_l2_error(std::span<const double> u, std::span<const double> ref);

/// Least-squares slope of log(error) against log(1/steps).
double fit_order(std::span<const int> steps, std::span<const double> errors);

struct ConvergenceRow {
  int steps = 0;
  double k = 0.0;
  double error = 0.0;
  std::optional<double> order;  // against the previous row
};

struct ProxyInfo {
  int steps = 0;  // of the returned proxy
  double k = 0.0;
  double last_difference = 0.0;  // relative L2, +inf when only one proxy was computed
  int refinements = 0;
};

struct ConvergenceTable {
  Problem problem = Problem::heat;
  std::string scheme;
  std::vector<ConvergenceRow> rows;
  double slope = 0.0;
  std::optional<ProxyInfo> proxy;
};

/// Fills the pairwise orders and the fitted slope from the errors.
void finish_table(ConvergenceTable& table);

struct ProxyResult {
  std::vector<double> density;  // on uniform_grid(grid_points)
  ProxyInfo info;
};

/// Reference solution by step halving: runs `proxy_scheme` from
/// proxy_initial_steps, doubling the step count until two consecutive
/// densities differ by less than `tol` (relative L2). Throws
/// std::runtime_error when k would drop below 2^-20 T.
ProxyResult proxy_exact(const RunConfig& config, double tol);

/// Final-time density of a Wasserstein run with n steps.
std::vector<double> final_density(const RunConfig& config, const SchemeCoefficients& scheme, int steps);

/// Runs every step count (rows in parallel, capped by MFLOW_THREADS) and
/// measures errors against the closed form (heat, euclidean_quadratic) or
/// proxy_exact (pme, fokker_planck).
ConvergenceTable convergence(const RunConfig& config);

/// Number of worker threads for independent rows: MFLOW_THREADS if set,
/// else the hardware concurrency, never more than `jobs`.
int worker_count(int jobs);

struct EnergyTrace {
  std::vector<double> energy;  // E(u_0) .. E(u_n)
  std::vector<double> d2;      // d2[n] = d^2(u_n, u_{n-1}); d2[0] = 0
  std::vector<bool> bootstrapped;
  double k = 0.0;

  /// max_n E(u_{n+1}) - E(u_n).
  double max_increase() const;
  /// max_n E(u_n) - E(u_1) over n >= 1.
  double excess_over_first() const;
};

/// Energy sequence of a run with trace_steps steps of size final_time / trace_steps.
EnergyTrace energy_trace(const RunConfig& config);

struct WassersteinRun {
  Trajectory<QuantileFunction> trajectory;
  Wasserstein1D space;
};

WassersteinRun run_wasserstein(const RunConfig& config, const SchemeCoefficients& scheme, int steps);

void write_convergence_csv(std::ostream& out, const ConvergenceTable& table);
void write_energy_csv(std::ostream& out, const EnergyTrace& trace);
void write_density_csv(std::ostream& out, std::span<const double> grid, std::span<const double> u);
void write_quantile_csv(std::ostream& out, const QuantileFunction& x);

}  // namespace mflow
