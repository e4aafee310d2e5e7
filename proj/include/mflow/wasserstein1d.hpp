#pragma once

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mflow/descent.hpp"
#include "mflow/metric_flow.hpp"

namespace mflow {

/// Inverse CDF of a probability density on [-1, 1], sampled at the mass
/// midpoints y_m = (m + 1/2) / M_q, m = 0..M_q-1.
///
/// The samples split [-1, 1] into M_q + 1 cells: two boundary half-cells of
/// mass 1/(2 M_q) ([-1, X_0] and [X_{M-1}, 1]) and M_q - 1 interior cells of
/// mass 1/M_q. All discrete energies are the exact energies of the
/// piecewise-constant density carried by these cells.
class QuantileFunction {
 public:
  QuantileFunction() = default;
  /// Throws std::invalid_argument unless the values are non-decreasing (to
  /// 1e-14) and inside [-1, 1].
  explicit QuantileFunction(Eigen::VectorXd values);

  int resolution() const { return static_cast<int>(values_.size()); }
  const Eigen::VectorXd& values() const { return values_; }
  double operator[](int m) const { return values_(m); }
  double mass_coordinate(int m) const { return (m + 0.5) / resolution(); }
  bool strictly_monotone() const;

 private:
  Eigen::VectorXd values_;
};

enum class EnergyKind { zero, entropy, cubic, cubic_potential };

struct EnergyFunctional {
  EnergyKind kind = EnergyKind::entropy;

  static double potential(double x);  // V(x) = 2 + cos(pi x)
  static double potential_slope(double x);
  static double potential_curvature(double x);
};

EnergyKind parse_energy_kind(std::string_view name);
std::string_view to_string(EnergyKind kind);

/// (1/M_q) sum_m (X_m - Y_m)^2.
double w2_distance_squared(const QuantileFunction& x, const QuantileFunction& y);

/// Trapezoidal CDF of grid samples, inverted by linear interpolation at the
/// mass midpoints. Requires u >= 0 and total mass within 1e-8 of one.
QuantileFunction density_to_quantile(std::span<const double> grid, std::span<const double> density,
                                     int resolution);

/// Quantiles of an analytic CDF on [-1, 1] (safeguarded Newton on cdf = y).
QuantileFunction quantile_from_cdf(const std::function<double(double)>& cdf,
                                   const std::function<double(double)>& pdf, int resolution);

/// u(x) = 1/X'(y) at y = X^{-1}(x): derivative of the six-point Lagrange
/// interpolant of the CDF through the nodes (X_m, y_m), extended past the
/// walls by reflection. Requires strictly increasing X.
std::vector<double> quantile_to_density(const QuantileFunction& x, std::span<const double> grid);

/// Discrete energies in quantile coordinates:
///   entropy          sum_cells mass * log(rho)
///   cubic            1/2 sum_cells mass * rho^2
///   cubic_potential  cubic + (1/M_q) sum_m V(X_m)
double energy(const QuantileFunction& x, const EnergyFunctional& f);

/// L2(0,1) gradient of `energy` (partial derivatives times M_q).
Eigen::VectorXd energy_gradient(const QuantileFunction& x, const EnergyFunctional& f);

double initial_density(double x);  // 1/2 + cos(pi x)/4
QuantileFunction initial_quantile(int resolution);

/// 1/2 + cos(pi x) exp(-pi^2 t) / 4 on the given points.
std::vector<double> exact_heat_solution(double t, std::span<const double> grid);

/// n points evenly spaced on [-1, 1], endpoints included.
std::vector<double> uniform_grid(int n);

struct StageSolverOptions {
  enum class Method { newton, gradient_descent };
  Method method = Method::newton;
  double step_tol = 1e-13;  // Newton: stop once max |update| falls below this
  int max_newton_iterations = 200;
  DescentOptions descent{};  // gradient_descent method
};

/// Metric-energy space (P_2([-1,1]), W_2) in quantile coordinates.
class Wasserstein1D {
 public:
  using Point = QuantileFunction;

  explicit Wasserstein1D(EnergyFunctional f, StageSolverOptions options = {})
      : f_(f), options_(options) {}

  const EnergyFunctional& functional() const { return f_; }
  const StageSolverOptions& options() const { return options_; }

  double energy(const Point& x) const { return mflow::energy(x, f_); }
  double distance_squared(const Point& x, const Point& y) const { return w2_distance_squared(x, y); }

  /// Minimizes energy + 1/(2k) sum gamma_j W2^2(., X_j) over monotone X.
  /// Requires a positive gamma sum. After every accepted update the iterate
  /// is projected onto monotone sequences (pool adjacent violators).
  StageResult<Point> stage_solve(std::span<const Limiter<Point>> limiters, double k,
                                 const Point& warm_start) const;

 private:
  EnergyFunctional f_;
  StageSolverOptions options_;
};

static_assert(MetricEnergySpace<Wasserstein1D>);

}  // namespace mflow
