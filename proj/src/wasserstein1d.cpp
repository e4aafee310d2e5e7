#include "mflow/wasserstein1d.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

#include "mflow/isotonic.hpp"
#include "mflow/linalg.hpp"

namespace mflow {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kRoundoffRegime = 1e-6;

bool non_decreasing(const Eigen::VectorXd& v, double slack) {
  for (Eigen::Index m = 1; m < v.size(); ++m)
    if (v(m) < v(m - 1) - slack) return false;
  return true;
}

// Value, partial derivatives and tridiagonal Hessian of the discrete energy.
struct EnergyTerms {
  double value = 0.0;
  Eigen::VectorXd grad;
  Eigen::VectorXd diag;
  Eigen::VectorXd off;  // off(m) couples m and m+1
  bool feasible = true;
};

bool has_cell_term(EnergyKind kind) { return kind != EnergyKind::zero; }

EnergyTerms evaluate(const Eigen::VectorXd& x, EnergyKind kind, bool with_hessian) {
  const Eigen::Index n = x.size();
  const double h = 1.0 / static_cast<double>(n);
  EnergyTerms t;
  t.grad = Eigen::VectorXd::Zero(n);
  if (with_hessian) {
    t.diag = Eigen::VectorXd::Zero(n);
    t.off = Eigen::VectorXd::Zero(std::max<Eigen::Index>(n - 1, 0));
  }

  if (has_cell_term(kind)) {
    // Cell c spans [x(c-1), x(c)] with x(-1) = -1 and x(n) = 1.
    for (Eigen::Index c = 0; c <= n; ++c) {
      const double left = c == 0 ? -1.0 : x(c - 1);
      const double right = c == n ? 1.0 : x(c);
      const double width = right - left;
      if (!(width > 0.0)) {
        t.feasible = false;
        t.value = std::numeric_limits<double>::infinity();
        return t;
      }
      const double mass = (c == 0 || c == n) ? 0.5 * h : h;
      const double rho = mass / width;
      double pressure, stiffness;
      if (kind == EnergyKind::entropy) {
        t.value += mass * std::log(rho);
        pressure = rho;
        stiffness = rho * rho / mass;
      } else {
        t.value += 0.5 * mass * rho * rho;
        pressure = rho * rho * rho;
        stiffness = 3.0 * rho * rho * rho * rho / mass;
      }
      // dE/dwidth = -pressure; width grows with x(c) and shrinks with x(c-1).
      if (c < n) t.grad(c) -= pressure;
      if (c > 0) t.grad(c - 1) += pressure;
      if (with_hessian) {
        if (c < n) t.diag(c) += stiffness;
        if (c > 0) t.diag(c - 1) += stiffness;
        if (c > 0 && c < n) t.off(c - 1) -= stiffness;
      }
    }
  }

  if (kind == EnergyKind::cubic_potential) {
    for (Eigen::Index m = 0; m < n; ++m) {
      t.value += h * EnergyFunctional::potential(x(m));
      t.grad(m) += h * EnergyFunctional::potential_slope(x(m));
      if (with_hessian) t.diag(m) += h * EnergyFunctional::potential_curvature(x(m));
    }
  }
  return t;
}

void require_monotone_for(const QuantileFunction& x, EnergyKind kind) {
  if (has_cell_term(kind) && !x.strictly_monotone())
    throw std::domain_error("energy needs a strictly increasing quantile function");
}

}  // namespace

QuantileFunction::QuantileFunction(Eigen::VectorXd values) : values_(std::move(values)) {
  if (values_.size() == 0) throw std::invalid_argument("quantile function needs samples");
  if (!non_decreasing(values_, 1e-14))
    throw std::invalid_argument("quantile function must be non-decreasing");
  if (values_.minCoeff() < -1.0 - 1e-14 || values_.maxCoeff() > 1.0 + 1e-14)
    throw std::invalid_argument("quantile function leaves [-1, 1]");
}

bool QuantileFunction::strictly_monotone() const {
  const Eigen::Index n = values_.size();
  if (n == 0 || !(values_(0) > -1.0) || !(values_(n - 1) < 1.0)) return false;
  for (Eigen::Index m = 1; m < n; ++m)
    if (!(values_(m) > values_(m - 1))) return false;
  return true;
}

double EnergyFunctional::potential(double x) { return 2.0 + std::cos(kPi * x); }
double EnergyFunctional::potential_slope(double x) { return -kPi * std::sin(kPi * x); }
double EnergyFunctional::potential_curvature(double x) { return -kPi * kPi * std::cos(kPi * x); }

EnergyKind parse_energy_kind(std::string_view name) {
  if (name == "zero") return EnergyKind::zero;
  if (name == "entropy") return EnergyKind::entropy;
  if (name == "cubic") return EnergyKind::cubic;
  if (name == "cubic_potential") return EnergyKind::cubic_potential;
  throw std::invalid_argument("unknown energy '" + std::string(name) + "'");
}

std::string_view to_string(EnergyKind kind) {
  switch (kind) {
    case EnergyKind::zero: return "zero";
    case EnergyKind::entropy: return "entropy";
    case EnergyKind::cubic: return "cubic";
    case EnergyKind::cubic_potential: return "cubic_potential";
  }
  return "?";
}

double w2_distance_squared(const QuantileFunction& x, const QuantileFunction& y) {
  if (x.resolution() != y.resolution())
    throw std::invalid_argument("w2_distance_squared: resolution mismatch");
  return (x.values() - y.values()).squaredNorm() / static_cast<double>(x.resolution());
}

QuantileFunction density_to_quantile(std::span<const double> grid, std::span<const double> density,
                                     int resolution) {
  if (grid.size() != density.size() || grid.size() < 2)
    throw std::invalid_argument("density_to_quantile: need matching grid and samples");
  if (resolution < 1) throw std::invalid_argument("density_to_quantile: resolution must be positive");
  for (double u : density)
    if (u < 0.0 || !std::isfinite(u)) throw std::domain_error("density_to_quantile: negative density");
  std::vector<double> cdf(grid.size(), 0.0);
  for (std::size_t i = 1; i < grid.size(); ++i) {
    if (!(grid[i] > grid[i - 1])) throw std::invalid_argument("density_to_quantile: grid not increasing");
    cdf[i] = cdf[i - 1] + 0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]);
  }
  if (std::abs(cdf.back() - 1.0) > 1e-8)
    throw std::domain_error("density_to_quantile: mass " + std::to_string(cdf.back()) + " is not one");
  Eigen::VectorXd x(resolution);
  for (int m = 0; m < resolution; ++m) {
    const double y = (m + 0.5) / resolution;
    auto it = std::lower_bound(cdf.begin(), cdf.end(), y);
    if (it == cdf.end()) {
      x(m) = grid.back();
      continue;
    }
    const auto k = static_cast<std::size_t>(it - cdf.begin());
    const double frac = (y - cdf[k - 1]) / (cdf[k] - cdf[k - 1]);
    x(m) = grid[k - 1] + frac * (grid[k] - grid[k - 1]);
  }
  return QuantileFunction(std::move(x));
}

QuantileFunction quantile_from_cdf(const std::function<double(double)>& cdf,
                                   const std::function<double(double)>& pdf, int resolution) {
  Eigen::VectorXd x(resolution);
  for (int m = 0; m < resolution; ++m) {
    const double y = (m + 0.5) / resolution;
    double lo = -1.0, hi = 1.0, z = -1.0 + 2.0 * y;
    for (int it = 0; it < 200; ++it) {
      const double r = cdf(z) - y;
      if (r == 0.0) break;
      (r > 0.0 ? hi : lo) = z;
      double next = z - r / pdf(z);
      if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
      if (std::abs(next - z) <= 1e-17) {
        z = next;
        break;
      }
      z = next;
    }
    x(m) = z;
  }
  return QuantileFunction(std::move(x));
}

std::vector<double> quantile_to_density(const QuantileFunction& q, std::span<const double> grid) {
  constexpr int kStencil = 6;
  constexpr int kHalf = kStencil / 2;
  const int n = q.resolution();
  if (n < kHalf) throw std::invalid_argument("quantile_to_density: resolution too small");
  if (!q.strictly_monotone())
    throw std::domain_error("quantile_to_density: quantile function not strictly increasing");

  // CDF nodes (x, y), reflected across both walls.
  std::vector<double> xs, ys;
  xs.reserve(static_cast<std::size_t>(n + 2 * kHalf));
  ys.reserve(xs.capacity());
  for (int i = kHalf - 1; i >= 0; --i) {
    xs.push_back(-2.0 - q[i]);
    ys.push_back(-q.mass_coordinate(i));
  }
  for (int i = 0; i < n; ++i) {
    xs.push_back(q[i]);
    ys.push_back(q.mass_coordinate(i));
  }
  for (int i = n - 1; i >= n - kHalf; --i) {
    xs.push_back(2.0 - q[i]);
    ys.push_back(2.0 - q.mass_coordinate(i));
  }

  const auto total = static_cast<std::ptrdiff_t>(xs.size());
  std::vector<double> out(grid.size(), 0.0);
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const double x = grid[g];
    if (x < -1.0 || x > 1.0) continue;
    const auto upper = std::upper_bound(xs.begin(), xs.end(), x) - xs.begin();
    const std::ptrdiff_t start = std::clamp<std::ptrdiff_t>(upper - kHalf, 0, total - kStencil);
    const double* px = xs.data() + start;
    const double* py = ys.data() + start;
    double slope = 0.0;
    for (int a = 0; a < kStencil; ++a) {
      double da = 0.0;
      for (int b = 0; b < kStencil; ++b) {
        if (b == a) continue;
        double term = 1.0 / (px[a] - px[b]);
        for (int c = 0; c < kStencil; ++c)
          if (c != a && c != b) term *= (x - px[c]) / (px[a] - px[c]);
        da += term;
      }
      slope += (py[a] - py[0]) * da;
    }
    out[g] = slope;
  }
  return out;
}

double energy(const QuantileFunction& x, const EnergyFunctional& f) {
  require_monotone_for(x, f.kind);
  return evaluate(x.values(), f.kind, false).value;
}

Eigen::VectorXd energy_gradient(const QuantileFunction& x, const EnergyFunctional& f) {
  require_monotone_for(x, f.kind);
  return evaluate(x.values(), f.kind, false).grad * static_cast<double>(x.resolution());
}

double initial_density(double x) { return 0.5 + 0.25 * std::cos(kPi * x); }

QuantileFunction initial_quantile(int resolution) {
  return quantile_from_cdf([](double x) { return 0.5 * (x + 1.0) + std::sin(kPi * x) / (4.0 * kPi); },
                           initial_density, resolution);
}

std::vector<double> exact_heat_solution(double t, std::span<const double> grid) {
  if (t < 0.0) throw std::invalid_argument("exact_heat_solution: negative time");
  std::vector<double> u(grid.size());
  const double decay = std::exp(-kPi * kPi * t);
  for (std::size_t i = 0; i < grid.size(); ++i) u[i] = 0.5 + 0.25 * std::cos(kPi * grid[i]) * decay;
  return u;
}

std::vector<double> uniform_grid(int n) {
  if (n < 2) throw std::invalid_argument("uniform_grid needs at least two points");
  std::vector<double> x(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] = -1.0 + 2.0 * i / (n - 1);
  x.back() = 1.0;
  return x;
}

StageResult<QuantileFunction> Wasserstein1D::stage_solve(std::span<const Limiter<Point>> limiters,
                                                         double k, const Point& warm_start) const {
  const Eigen::Index n = warm_start.resolution();
  const double h = 1.0 / static_cast<double>(n);
  double total = 0.0;
  Eigen::VectorXd pull = Eigen::VectorXd::Zero(n);
  for (const auto& l : limiters) {
    if (l.anchor.get().resolution() != n) throw std::invalid_argument("stage_solve: resolution mismatch");
    total += l.gamma;
    pull += l.gamma * l.anchor.get().values();
  }
  if (!(total > 0.0)) throw std::invalid_argument("stage_solve needs a positive gamma sum");
  if (!(k > 0.0)) throw std::invalid_argument("stage_solve needs k > 0");

  auto objective = [&](const Eigen::VectorXd& x) {
    const EnergyTerms e = evaluate(x, f_.kind, false);
    if (!e.feasible) return std::numeric_limits<double>::infinity();
    double movement = 0.0;
    for (const auto& l : limiters) movement += l.gamma * (x - l.anchor.get().values()).squaredNorm();
    return e.value + h * movement / (2.0 * k);
  };
  auto project = [](Eigen::VectorXd& x) {
    if (!non_decreasing(x, 0.0) || x.minCoeff() < -1.0 || x.maxCoeff() > 1.0)
      isotonic_project_bounded(std::span<double>(x.data(), static_cast<std::size_t>(x.size())), -1.0, 1.0);
  };

  StageResult<Point> out;
  Eigen::VectorXd x = warm_start.values();
  double fx = objective(x);
  out.warm_objective = fx;
  if (!std::isfinite(fx)) throw std::domain_error("stage_solve: warm start has infinite energy");

  if (options_.method == StageSolverOptions::Method::gradient_descent) {
    auto grad = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
      const EnergyTerms e = evaluate(v, f_.kind, false);
      return e.grad / h + (total * v - pull) / k;
    };
    DescentResult r = projected_gradient_descent(objective, grad, project, x, h, options_.descent);
    x = std::move(r.x);
    fx = r.value;
    out.iterations = r.iterations;
    out.stalled = r.stalled;
  } else {
    const double movement_curvature = h * total / k;
    std::vector<double> lower(static_cast<std::size_t>(n)), diag(static_cast<std::size_t>(n)),
        upper(static_cast<std::size_t>(n)), rhs(static_cast<std::size_t>(n));
    double previous_size = std::numeric_limits<double>::infinity();
    int it = 0;
    for (; it < options_.max_newton_iterations; ++it) {
      const EnergyTerms e = evaluate(x, f_.kind, true);
      const Eigen::VectorXd g = e.grad + (h / k) * (total * x - pull);
      double shift = 0.0;
      for (;;) {
        for (Eigen::Index m = 0; m < n; ++m) {
          const auto i = static_cast<std::size_t>(m);
          diag[i] = e.diag(m) + movement_curvature + shift;
          lower[i] = m > 0 ? e.off(m - 1) : 0.0;
          upper[i] = m + 1 < n ? e.off(m) : 0.0;
          rhs[i] = -g(m);
        }
        if (solve_tridiagonal_spd(lower, diag, upper, rhs)) break;
        shift = shift == 0.0 ? 1e-8 * (movement_curvature + e.diag.cwiseAbs().maxCoeff()) : 10.0 * shift;
      }
      const Eigen::Map<const Eigen::VectorXd> p(rhs.data(), n);
      const double size = p.cwiseAbs().maxCoeff();
      if (size <= options_.step_tol) break;
      // Quadratic convergence has ended once the update stops shrinking: what
      // remains is gradient roundoff amplified by the Hessian.
      if (size < kRoundoffRegime && size > 0.25 * previous_size) break;
      previous_size = size;
      const double slope = g.dot(p);
      double t = 1.0;
      bool accepted = false;
      while (t > 1e-20) {
        Eigen::VectorXd trial = x + t * p;
        project(trial);
        const double ft = objective(trial);
        // Below kRoundoffRegime the objective cannot resolve the decrease, so
        // the full step is taken and the contraction test decides.
        const bool tiny = size < kRoundoffRegime && t == 1.0;
        if (std::isfinite(ft) && (tiny || ft <= fx + 1e-4 * t * std::min(slope, 0.0))) {
          x = std::move(trial);
          fx = ft;
          accepted = true;
          break;
        }
        t *= 0.5;
      }
      if (!accepted) {
        // Objective differences this small are roundoff; the iterate is
        // already at the minimizer to working precision.
        out.stalled = size > kRoundoffRegime;
        break;
      }
    }
    out.iterations = it + 1;
    if (it == options_.max_newton_iterations) out.stalled = true;
  }

  if (!non_decreasing(x, 1e-14))
    throw std::runtime_error("stage_solve: monotonicity violation persists after the descent stopped");
  out.point = QuantileFunction(std::move(x));
  out.objective = fx;
  return out;
}

}  // namespace mflow
