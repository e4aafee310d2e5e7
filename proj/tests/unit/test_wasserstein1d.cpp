#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mflow/experiments.hpp"
#include "mflow/wasserstein1d.hpp"

using namespace mflow;

namespace {

constexpr double kPi = std::numbers::pi;

QuantileFunction uniform_quantile(int m) {
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x(i) = -1.0 + 2.0 * (i + 0.5) / m;
  return QuantileFunction(x);
}

QuantileFunction heat_quantile(double t, int m) {
  const double a = 0.25 * std::exp(-kPi * kPi * t);
  return quantile_from_cdf([a](double x) { return 0.5 * (x + 1.0) + a * std::sin(kPi * x) / kPi; },
                           [a](double x) { return 0.5 + a * std::cos(kPi * x); }, m);
}

double trapezoid(std::span<const double> grid, std::span<const double> u) {
  double s = 0;
  for (std::size_t i = 1; i < grid.size(); ++i) s += 0.5 * (u[i] + u[i - 1]) * (grid[i] - grid[i - 1]);
  return s;
}

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

QuantileFunction random_quantile(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::VectorXd x(m);
  for (int i = 0; i < m; ++i) x(i) = u(rng);
  std::sort(x.begin(), x.end());
  return QuantileFunction(x);
}

}  // namespace

TEST_CASE("quantile functions reject bad input") {
  CHECK_THROWS_AS(QuantileFunction(Eigen::Vector3d(0.1, 0.0, 0.2)), std::invalid_argument);
  CHECK_THROWS_AS(QuantileFunction(Eigen::Vector2d(-1.5, 0.0)), std::invalid_argument);
  CHECK(uniform_quantile(8).strictly_monotone());
  CHECK_FALSE(QuantileFunction(Eigen::Vector3d(0.0, 0.0, 0.2)).strictly_monotone());
  CHECK(uniform_quantile(4).mass_coordinate(1) == doctest::Approx(0.375));
}

TEST_CASE("W2 distance between quantile samples") {
  for (int m : {1, 4, 64, 1000}) {
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(m);
    const double d2 = w2_distance_squared(uniform_quantile(m), QuantileFunction(zero));
    // (1/M) sum (2 y_m - 1)^2 = (M^2 - 1) / (3 M^2)
    CHECK(d2 == doctest::Approx((double(m) * m - 1) / (3.0 * m * m)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(w2_distance_squared(uniform_quantile(3), uniform_quantile(4)), std::invalid_argument);

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 1 + trial % 17;
    const auto x = random_quantile(m, rng), y = random_quantile(m, rng), z = random_quantile(m, rng);
    const double dxy = std::sqrt(w2_distance_squared(x, y));
    const double dyz = std::sqrt(w2_distance_squared(y, z));
    const double dxz = std::sqrt(w2_distance_squared(x, z));
    CHECK(w2_distance_squared(x, x) == 0.0);
    CHECK(dxy == doctest::Approx(std::sqrt(w2_distance_squared(y, x))));
    CHECK(dxz <= dxy + dyz + 1e-14);
  }
}

TEST_CASE("density to quantile") {
  const auto grid = uniform_grid(2001);
  std::vector<double> flat(grid.size(), 0.5);
  const auto q = density_to_quantile(grid, flat, 100);
  CHECK((q.values() - uniform_quantile(100).values()).cwiseAbs().maxCoeff() < 1e-13);

  // Implicit residual of the smooth initial density. Trapezoid and linear
  // interpolation errors are bounded by 2 h^2 max|u''| / 12 + h^2 max|u'| / 8 ~ 5e-7.
  std::vector<double> u0(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) u0[i] = initial_density(grid[i]);
  const auto q0 = density_to_quantile(grid, u0, 256);
  double worst = 0;
  for (int m = 0; m < 256; ++m) {
    const double x = q0[m];
    const double cdf = 0.5 * (x + 1) + std::sin(kPi * x) / (4 * kPi);
    worst = std::max(worst, std::abs(cdf - q0.mass_coordinate(m)));
  }
  CHECK(worst < 5e-7);

  std::vector<double> negative = flat;
  negative[10] = -0.1;
  CHECK_THROWS_AS(density_to_quantile(grid, negative, 16), std::domain_error);
  std::vector<double> heavy(grid.size(), 0.6);
  CHECK_THROWS_AS(density_to_quantile(grid, heavy, 16), std::domain_error);
}

TEST_CASE("analytic quantiles invert the CDF") {
  const auto q = initial_quantile(512);
  for (int m = 0; m < 512; ++m) {
    const double x = q[m];
    CHECK(std::abs(0.5 * (x + 1) + std::sin(kPi * x) / (4 * kPi) - q.mass_coordinate(m)) < 1e-14);
  }
  CHECK(q.strictly_monotone());
}

TEST_CASE("quantile to density") {
  const auto grid = uniform_grid(401);
  const auto flat = quantile_to_density(uniform_quantile(64), grid);
  for (double u : flat) CHECK(u == doctest::Approx(0.5).epsilon(1e-12));

  // Reconstruction error is second order or better in the resolution.
  double prev = 0;
  for (int m : {256, 512, 1024}) {
    const double err = max_abs_diff(quantile_to_density(heat_quantile(1.0 / 16, m), grid),
                                    exact_heat_solution(1.0 / 16, grid));
    if (prev > 0) CHECK(prev / err > 3.5);
    prev = err;
  }
  CHECK(prev < 1e-6);

  const auto u = quantile_to_density(initial_quantile(1024), uniform_grid(2048));
  CHECK(std::abs(trapezoid(uniform_grid(2048), u) - 1.0) < 1e-6);

  CHECK_THROWS_AS(quantile_to_density(QuantileFunction(Eigen::Vector3d(0.0, 0.0, 0.5)), grid),
                  std::domain_error);
  CHECK_THROWS_AS(quantile_to_density(uniform_quantile(2), grid), std::invalid_argument);
}

TEST_CASE("discrete energies") {
  const auto flat = uniform_quantile(50);
  CHECK(energy(flat, {EnergyKind::entropy}) == doctest::Approx(-std::log(2.0)).epsilon(1e-13));
  CHECK(energy(flat, {EnergyKind::cubic}) == doctest::Approx(0.125).epsilon(1e-13));
  CHECK(energy(flat, {EnergyKind::zero}) == 0.0);

  // Midpoint rule of V against the uniform measure.
  double pot = 0;
  for (int m = 0; m < 50; ++m) pot += EnergyFunctional::potential(flat[m]) / 50;
  CHECK(energy(flat, {EnergyKind::cubic_potential}) == doctest::Approx(0.125 + pot).epsilon(1e-13));

  // Entropy of u0 against x-space quadrature.
  const auto grid = uniform_grid(20001);
  std::vector<double> integrand(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double u = initial_density(grid[i]);
    integrand[i] = u * std::log(u);
  }
  CHECK(std::abs(energy(initial_quantile(1024), {EnergyKind::entropy}) - trapezoid(grid, integrand)) < 1e-6);

  // Collapsed cells carry infinite density.
  CHECK_THROWS_AS(energy(QuantileFunction(Eigen::Vector3d(0.0, 0.0, 0.5)), {EnergyKind::entropy}), std::domain_error);

  CHECK(parse_energy_kind("cubic_potential") == EnergyKind::cubic_potential);
  CHECK(to_string(EnergyKind::entropy) == "entropy");
  CHECK_THROWS_AS(parse_energy_kind("quartic"), std::invalid_argument);
  CHECK(EnergyFunctional::potential(0) == doctest::Approx(3.0));
  CHECK(EnergyFunctional::potential_slope(0.5) == doctest::Approx(-kPi));
  CHECK(EnergyFunctional::potential_curvature(0) == doctest::Approx(-kPi * kPi));
}

TEST_CASE("energy gradients match central differences") {
  const int m = 24;
  const auto x0 = initial_quantile(m);
  for (EnergyKind kind : {EnergyKind::entropy, EnergyKind::cubic, EnergyKind::cubic_potential}) {
    const EnergyFunctional f{kind};
    const Eigen::VectorXd g = energy_gradient(x0, f);
    for (int i = 0; i < m; ++i) {
      const double eps = 1e-6;
      Eigen::VectorXd p = x0.values(), q = x0.values();
      p(i) += eps;
      q(i) -= eps;
      const double fd = (energy(QuantileFunction(p), f) - energy(QuantileFunction(q), f)) / (2 * eps);
      CHECK(g(i) / m == doctest::Approx(fd).epsilon(1e-5));
    }
  }
  // Uniform density is the entropy minimizer.
  CHECK(energy_gradient(uniform_quantile(16), {EnergyKind::entropy}).cwiseAbs().maxCoeff() < 1e-12);
  // The potential part contributes V'(X_m).
  const Eigen::VectorXd diff = energy_gradient(x0, {EnergyKind::cubic_potential}) - energy_gradient(x0, {EnergyKind::cubic});
  for (int i = 0; i < m; ++i) CHECK(diff(i) == doctest::Approx(EnergyFunctional::potential_slope(x0[i])));
}

TEST_CASE("heat closed form and grid") {
  const auto g = uniform_grid(5);
  CHECK(g == std::vector<double>{-1, -0.5, 0, 0.5, 1});
  const auto u = exact_heat_solution(0, g);
  CHECK(u[2] == doctest::Approx(0.75));
  CHECK(u[0] == doctest::Approx(0.25));
  CHECK(exact_heat_solution(10, g)[2] == doctest::Approx(0.5));
  CHECK_THROWS_AS(exact_heat_solution(-1, g), std::invalid_argument);
  CHECK_THROWS_AS(uniform_grid(1), std::invalid_argument);
  CHECK(initial_density(0) == doctest::Approx(0.75));
}

TEST_CASE("stage solve with zero energy returns the anchor") {
  const Wasserstein1D space({EnergyKind::zero});
  const auto x = initial_quantile(32);
  std::vector<Limiter<QuantileFunction>> lim{{1.0, std::cref(x)}};
  const auto r = space.stage_solve(lim, 0.1, uniform_quantile(32));
  CHECK((r.point.values() - x.values()).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(r.objective <= r.warm_objective);

  std::vector<Limiter<QuantileFunction>> none{{-1.0, std::cref(x)}};
  CHECK_THROWS_AS(space.stage_solve(none, 0.1, x), std::invalid_argument);
}

TEST_CASE("one backward Euler step of the heat flow") {
  const int m = 512;
  const double k = 1.0 / 64;
  const Wasserstein1D space({EnergyKind::entropy});
  const auto x0 = initial_quantile(m);
  std::vector<Limiter<QuantileFunction>> lim{{1.0, std::cref(x0)}};
  const auto r = space.stage_solve(lim, k, x0);
  CHECK_FALSE(r.stalled);
  CHECK(r.objective <= r.warm_objective);
  CHECK(r.point.strictly_monotone());
  CHECK(r.point[0] >= -1.0);
  CHECK(r.point[m - 1] <= 1.0);

  const auto grid = uniform_grid(513);
  const auto u = quantile_to_density(r.point, grid);
  CHECK(std::abs(trapezoid(grid, u) - 1.0) < 1e-6);
  // Implicit Euler decays the cosine mode by 1/(1 + pi^2 k) instead of exp(-pi^2 k).
  std::vector<double> euler(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) euler[i] = 0.5 + 0.25 * std::cos(kPi * grid[i]) / (1 + kPi * kPi * k);
  CHECK(max_abs_diff(u, euler) < 2e-3);
  CHECK(max_abs_diff(u, exact_heat_solution(k, grid)) < 0.25 * std::pow(kPi * kPi * k, 2));
}

TEST_CASE("gradient descent and Newton agree on a stage problem") {
  const int m = 32;
  const auto x0 = initial_quantile(m);
  std::vector<Limiter<QuantileFunction>> lim{{1.0, std::cref(x0)}};
  for (EnergyKind kind : {EnergyKind::entropy, EnergyKind::cubic, EnergyKind::cubic_potential}) {
    const Wasserstein1D newton({kind});
    StageSolverOptions opt;
    opt.method = StageSolverOptions::Method::gradient_descent;
    opt.descent.rel_decrease_tol = 0;
    opt.descent.grad_tol = 1e-11;
    opt.descent.max_iterations = 200000;
    const Wasserstein1D gd({kind}, opt);
    const auto a = newton.stage_solve(lim, 0.05, x0);
    const auto b = gd.stage_solve(lim, 0.05, x0);
    CHECK(b.objective <= b.warm_objective);
    CHECK((a.point.values() - b.point.values()).cwiseAbs().maxCoeff() < 1e-6);
    CHECK(a.objective <= b.objective + 1e-12);
  }
}

TEST_CASE("stage solve keeps monotone iterates under negative weights") {
  // A stage3-like combination with a negative coefficient on an older anchor.
  const int m = 256;
  const Wasserstein1D space({EnergyKind::cubic});
  const auto x0 = initial_quantile(m);
  const auto x1 = heat_quantile(0.02, m);
  std::vector<Limiter<QuantileFunction>> lim{{-0.5, std::cref(x0)}, {2.0, std::cref(x1)}};
  const auto r = space.stage_solve(lim, 1.0 / 32, x1);
  CHECK(r.point.values().minCoeff() >= -1.0);
  CHECK(r.point.values().maxCoeff() <= 1.0);
  for (int i = 1; i < m; ++i) CHECK(r.point[i] >= r.point[i - 1]);
  CHECK(r.objective <= r.warm_objective);
}

TEST_CASE("Wasserstein trajectories dissipate and conserve mass") {
  RunConfig c = default_config(Problem::pme);
  c.resolution = 256;
  c.trace_steps = 8;
  const auto r = run_wasserstein(c, builtin_scheme("stage3_order2"), 8);
  REQUIRE(r.trajectory.points.size() == 9);
  const auto grid = uniform_grid(1025);
  for (std::size_t n = 1; n < r.trajectory.points.size(); ++n) {
    CHECK(r.space.energy(r.trajectory.points[n]) <= r.space.energy(r.trajectory.points[n - 1]) + 1e-12);
    const auto u = quantile_to_density(r.trajectory.points[n], grid);
    CHECK(std::abs(trapezoid(grid, u) - 1.0) < 1e-6);
  }
}
