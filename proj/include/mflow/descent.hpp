#pragma once

#include <cmath>
#include <limits>

#include <Eigen/Dense>

#include "mflow/metric_flow.hpp"

namespace mflow {

struct DescentOptions {
  double armijo = 1e-4;
  double rel_decrease_tol = 1e-13;
  double grad_tol = 1e-10;
  int max_iterations = 100000;
};

struct DescentResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool stalled = false;
};

/// Projected gradient descent with halving backtracking.
///
/// `grad` returns the gradient with respect to the inner product
/// weight * <x, y>, so a step moves x to project(x - t * grad(x)). `f` may
/// return +inf for infeasible points; such trial steps are shortened.
/// Stops when the accepted decrease falls below rel_decrease_tol*(1+|f|),
/// when the gradient norm drops below grad_tol, or after max_iterations.
/// The result never has a larger objective than the start.
template <class F, class G, class Project>
DescentResult projected_gradient_descent(F&& f, G&& grad, Project&& project, Eigen::VectorXd x,
                                         double weight, const DescentOptions& opt = {}) {
  DescentResult out;
  double fx = f(x);
  double t = 1.0;
  for (int it = 0; it < opt.max_iterations; ++it) {
    out.iterations = it + 1;
    const Eigen::VectorXd g = grad(x);
    if (std::sqrt(weight) * g.norm() < opt.grad_tol) break;
    bool accepted = false;
    t *= 2.0;
    while (t > 1e-30) {
      Eigen::VectorXd trial = x - t * g;
      project(trial);
      const double ft = f(trial);
      const double predicted = weight * g.dot(trial - x);
      if (std::isfinite(ft) && ft <= fx + opt.armijo * predicted && ft <= fx) {
        const double decrease = fx - ft;
        x = std::move(trial);
        fx = ft;
        accepted = true;
        if (decrease < opt.rel_decrease_tol * (1.0 + std::abs(fx))) {
          out.x = std::move(x);
          out.value = fx;
          return out;
        }
        break;
      }
      t *= 0.5;
    }
    if (!accepted) {
      out.stalled = true;
      break;
    }
  }
  out.x = std::move(x);
  out.value = fx;
  return out;
}

// clang-format off
/// Spaces whose points are vectors with d^2(x, y) = weight * |x - y|^2 and
/// whose energy gradient is taken in that same inner product.
template <class S>
concept HilbertGradientSpace = MetricEnergySpace<S> &&
    std::same_as<typename S::Point, Eigen::VectorXd> &&
    requires(const S& s, const Eigen::VectorXd& x) {
      { s.gradient(x) } -> std::convertible_to<Eigen::VectorXd>;
      { s.inner_weight() } -> std::convertible_to<double>;
    };
// clang-format on

/// Stage solver for spaces that only expose energy and gradient: gradient
/// descent on the stage objective warm-started at `warm_start`.
template <HilbertGradientSpace S>
StageResult<Eigen::VectorXd> descent_stage_solve(const S& space,
                                                 std::span<const Limiter<Eigen::VectorXd>> limiters,
                                                 double k, const Eigen::VectorXd& warm_start,
                                                 const DescentOptions& options = {}) {
  double total = 0.0;
  Eigen::VectorXd pull = Eigen::VectorXd::Zero(warm_start.size());
  for (const auto& l : limiters) {
    total += l.gamma;
    pull += l.gamma * l.anchor.get();
  }
  auto f = [&](const Eigen::VectorXd& x) { return stage_objective(space, limiters, k, x); };
  auto grad = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return space.gradient(x) + (total * x - pull) / k;
  };
  StageResult<Eigen::VectorXd> out;
  out.warm_objective = f(warm_start);
  DescentResult r = projected_gradient_descent(f, grad, [](Eigen::VectorXd&) {}, warm_start,
                                               space.inner_weight(), options);
  out.point = std::move(r.x);
  out.objective = r.value;
  out.iterations = r.iterations;
  out.stalled = r.stalled;
  return out;
}

}  // namespace mflow
