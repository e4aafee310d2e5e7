#include "mflow/euclidean.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "mflow/linalg.hpp"

namespace mflow {

EuclideanQuadratic::EuclideanQuadratic(Eigen::MatrixXd a, Eigen::VectorXd b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() != a_.cols() || a_.rows() != b_.size())
    throw std::invalid_argument("EuclideanQuadratic: dimension mismatch");
  if ((a_ - a_.transpose()).norm() > 1e-12 * std::max(a_.norm(), 1.0))
    throw std::invalid_argument("EuclideanQuadratic: A must be symmetric");
}

EuclideanQuadratic EuclideanQuadratic::random(int dim, std::uint64_t seed, double min_eig,
                                              double max_eig) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> spread(min_eig, max_eig);
  Eigen::MatrixXd g(dim, dim);
  for (int r = 0; r < dim; ++r)
    for (int c = 0; c < dim; ++c) g(r, c) = normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(g).householderQ();
  Eigen::VectorXd lambda(dim);
  for (int i = 0; i < dim; ++i) lambda(i) = spread(rng);
  Eigen::MatrixXd a = q * lambda.asDiagonal() * q.transpose();
  a = 0.5 * (a + a.transpose());
  Eigen::VectorXd b(dim);
  for (int i = 0; i < dim; ++i) b(i) = normal(rng);
  return {a, b};
}

double EuclideanQuadratic::energy(const Point& x) const { return 0.5 * x.dot(a_ * x) + b_.dot(x); }

Eigen::VectorXd EuclideanQuadratic::gradient(const Point& x) const { return a_ * x + b_; }

double EuclideanQuadratic::distance_squared(const Point& p, const Point& q) const {
  return (p - q).squaredNorm();
}

StageResult<EuclideanQuadratic::Point> EuclideanQuadratic::stage_solve(
    std::span<const Limiter<Point>> limiters, double k, const Point& warm_start) const {
  double total = 0.0;
  Eigen::VectorXd rhs = -b_;
  for (const auto& l : limiters) {
    total += l.gamma;
    rhs += (l.gamma / k) * l.anchor.get();
  }
  Eigen::MatrixXd system = a_;
  system.diagonal().array() += total / k;
  Eigen::LLT<Eigen::MatrixXd> llt(system);
  if (llt.info() != Eigen::Success)
    throw std::domain_error("stage objective is not strictly convex (A + s/k I not positive definite)");
  StageResult<Point> out;
  out.point = llt.solve(rhs);
  out.objective = stage_objective(*this, limiters, k, out.point);
  out.warm_objective = stage_objective(*this, limiters, k, warm_start);
  out.iterations = 1;
  return out;
}

EuclideanQuadratic::Point EuclideanQuadratic::exact_flow(const Point& u0, double t) const {
  const SymmetricEigen eig = jacobi_eigen(a_);
  if (eig.values.minCoeff() <= 1e-14 * std::max(1.0, eig.values.cwiseAbs().maxCoeff()))
    throw std::domain_error("exact flow needs A positive definite");
  const Eigen::VectorXd minimizer = -(eig.vectors * (eig.vectors.transpose() * b_).cwiseQuotient(eig.values));
  Eigen::VectorXd coeff = eig.vectors.transpose() * (u0 - minimizer);
  for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff(i) *= std::exp(-eig.values(i) * t);
  return eig.vectors * coeff + minimizer;
}

}  // namespace mflow
