#pragma once

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "mflow/descent.hpp"
#include "mflow/metric_flow.hpp"

namespace mflow {

/// E(x) = x.Ax/2 + b.x on R^n with the Euclidean distance. Stage problems
/// are linear and solved in closed form.
class EuclideanQuadratic {
 public:
  using Point = Eigen::VectorXd;

  EuclideanQuadratic(Eigen::MatrixXd a, Eigen::VectorXd b);

  /// Random SPD instance with spectrum in [min_eig, max_eig]; deterministic in seed.
  static EuclideanQuadratic random(int dim, std::uint64_t seed, double min_eig = 0.5,
                                   double max_eig = 4.0);

  int dimension() const { return static_cast<int>(b_.size()); }
  const Eigen::MatrixXd& a() const { return a_; }
  const Eigen::VectorXd& b() const { return b_; }

  double energy(const Point& x) const;
  Eigen::VectorXd gradient(const Point& x) const;
  double distance_squared(const Point& p, const Point& q) const;
  double inner_weight() const { return 1.0; }

  /// Solves (A + s/k I) x = -b + (1/k) sum gamma_j v_j with s = sum gamma_j.
  StageResult<Point> stage_solve(std::span<const Limiter<Point>> limiters, double k,
                                 const Point& warm_start) const;

  /// exp(-A t)(u0 - x*) + x*, x* = -A^{-1} b, via Jacobi diagonalization.
  Point exact_flow(const Point& u0, double t) const;

 private:
  Eigen::MatrixXd a_;
  Eigen::VectorXd b_;
};

static_assert(HilbertGradientSpace<EuclideanQuadratic>);

}  // namespace mflow
