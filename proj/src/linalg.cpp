#include "mflow/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace mflow {

SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& input, double tol, int max_sweeps) {
  if (input.rows() != input.cols()) throw std::invalid_argument("jacobi_eigen: matrix not square");
  const Eigen::Index n = input.rows();
  const double norm = input.norm();
  if ((input - input.transpose()).norm() > 1e-12 * std::max(norm, 1e-300))
    throw std::invalid_argument("jacobi_eigen: matrix not symmetric");

  Eigen::MatrixXd a = 0.5 * (input + input.transpose());
  Eigen::MatrixXd v = Eigen::MatrixXd::Identity(n, n);
  const double threshold = tol * norm;

  auto max_off = [&] {
    double m = 0.0;
    for (Eigen::Index p = 0; p < n; ++p)
      for (Eigen::Index q = p + 1; q < n; ++q) m = std::max(m, std::abs(a(p, q)));
    return m;
  };

  int sweep = 0;
  while (norm > 0.0 && max_off() >= threshold) {
    if (sweep == max_sweeps)
      throw ConvergenceError("jacobi_eigen: no convergence after " + std::to_string(max_sweeps) +
                             " sweeps");
    ++sweep;
    for (Eigen::Index p = 0; p < n - 1; ++p) {
      for (Eigen::Index q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (Eigen::Index k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        a(p, q) = a(q, p) = 0.0;
        for (Eigen::Index k = 0; k < n; ++k) {
          const double vkp = v(k, p), vkq = v(k, q);
          v(k, p) = c * vkp - s * vkq;
          v(k, q) = s * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return a(x, x) < a(y, y); });
  SymmetricEigen out;
  out.values.resize(n);
  out.vectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.values(k) = a(order[static_cast<std::size_t>(k)], order[static_cast<std::size_t>(k)]);
    out.vectors.col(k) = v.col(order[static_cast<std::size_t>(k)]);
  }
  out.sweeps = sweep;
  return out;
}

double max_eigenvalue_symmetric(const Eigen::MatrixXd& a, double tol) {
  if (a.rows() == 0) throw std::invalid_argument("max_eigenvalue_symmetric: empty matrix");
  return jacobi_eigen(a, tol).values.maxCoeff();
}

bool solve_tridiagonal_spd(std::span<const double> lower, std::span<const double> diag,
                           std::span<const double> upper, std::span<double> rhs) {
  const std::size_t n = diag.size();
  if (n == 0) return true;
  std::vector<double> c(n);
  double pivot = diag[0];
  if (!(pivot > 0.0)) return false;
  c[0] = n > 1 ? upper[0] / pivot : 0.0;
  rhs[0] /= pivot;
  for (std::size_t i = 1; i < n; ++i) {
    pivot = diag[i] - lower[i] * c[i - 1];
    if (!(pivot > 0.0)) return false;
    c[i] = i + 1 < n ? upper[i] / pivot : 0.0;
    rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
  }
  for (std::size_t i = n - 1; i-- > 0;) rhs[i] -= c[i] * rhs[i + 1];
  return true;
}

}  // namespace mflow
