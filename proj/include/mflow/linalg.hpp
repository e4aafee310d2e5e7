#pragma once

#include <span>
#include <stdexcept>

#include <Eigen/Dense>

namespace mflow {

struct SymmetricEigen {
  Eigen::VectorXd values;   // ascending
  Eigen::MatrixXd vectors;  // columns paired with values
  int sweeps = 0;
};

class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Cyclic Jacobi eigendecomposition. Iterates until every off-diagonal
/// entry is below tol * ||A||_F; throws ConvergenceError after max_sweeps
/// and std::invalid_argument when A is not symmetric to 1e-12 relative.
SymmetricEigen jacobi_eigen(const Eigen::MatrixXd& a, double tol = 1e-14, int max_sweeps = 50);

/// Largest eigenvalue via jacobi_eigen; |error| <= tol * ||A||_F.
double max_eigenvalue_symmetric(const Eigen::MatrixXd& a, double tol = 1e-14);

/// Solves a tridiagonal system in place (Thomas algorithm without pivoting).
/// lower[i] couples x[i-1] into row i (lower[0] unused), upper[i] couples
/// x[i+1] (upper[n-1] unused). Returns false if a pivot is not strictly
/// positive, which for symmetric input means the matrix is not positive
/// definite.
bool solve_tridiagonal_spd(std::span<const double> lower, std::span<const double> diag,
                           std::span<const double> upper, std::span<double> rhs);

}  // namespace mflow
