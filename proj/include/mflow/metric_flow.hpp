#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "mflow/scheme.hpp"

namespace mflow {

/// One movement-limiter term gamma/(2k) d^2(x, anchor).
template <class P>
struct Limiter {
  double gamma;
  std::reference_wrapper<const P> anchor;
};

template <class P>
struct StageResult {
  P point;
  double objective = 0.0;       // stage objective at `point`
  double warm_objective = 0.0;  // stage objective at the warm start
  int iterations = 0;
  bool stalled = false;  // inner solver stopped short of its tolerance
};

// clang-format off
template <class S>
concept MetricEnergySpace = requires(const S& s, const typename S::Point& p,
                                     std::span<const Limiter<typename S::Point>> limiters, double k) {
  { s.energy(p) } -> std::convertible_to<double>;
  { s.distance_squared(p, p) } -> std::convertible_to<double>;
  { s.stage_solve(limiters, k, p) } -> std::same_as<StageResult<typename S::Point>>;
};
// clang-format on

/// E(x) + 1/(2k) sum gamma_j d^2(x, anchor_j).
template <MetricEnergySpace S>
double stage_objective(const S& space, std::span<const Limiter<typename S::Point>> limiters, double k,
                       const typename S::Point& x) {
  double movement = 0.0;
  for (const auto& l : limiters) movement += l.gamma * space.distance_squared(x, l.anchor.get());
  return space.energy(x) + movement / (2.0 * k);
}

/// Scheme coefficients rounded to double for the stepping loop.
struct StageTable {
  int steps = 1;
  int stages = 1;
  std::vector<std::vector<std::pair<int, double>>> rows;  // rows[i-1] = {(j, gamma)}

  explicit StageTable(const SchemeCoefficients& scheme);
};

class StageFailure : public std::runtime_error {
 public:
  StageFailure(int stage, const std::string& what)
      : std::runtime_error("stage " + std::to_string(stage) + ": " + what), stage_(stage) {}
  int stage() const { return stage_; }

 private:
  int stage_;
};

template <class P>
struct FlowState {
  std::vector<P> history;  // u_0 .. u_n
  double k = 0.0;
};

struct StageDiagnostics {
  double objective = 0.0;
  double warm_objective = 0.0;
  int iterations = 0;
  bool stalled = false;
};

struct StepReport {
  std::vector<StageDiagnostics> stages;
  bool any_stalled() const {
    for (const auto& s : stages)
      if (s.stalled) return true;
    return false;
  }
};

/// Advances `state` by one step of the mixed scheme: binds v_{-M+1..0} to
/// the last M history entries, solves the N stage problems in order with
/// v_{i-1} as warm start, and appends v_N.
template <MetricEnergySpace S>
StepReport step(const StageTable& table, const S& space, FlowState<typename S::Point>& state) {
  using P = typename S::Point;
  const int m = table.steps;
  if (static_cast<int>(state.history.size()) < m)
    throw std::invalid_argument("step needs at least M history entries");
  if (!(state.k > 0.0)) throw std::invalid_argument("step size must be positive");

  std::vector<P> v;
  v.reserve(static_cast<std::size_t>(m + table.stages));
  for (int j = -m + 1; j <= 0; ++j)
    v.push_back(state.history[state.history.size() - 1 + static_cast<std::size_t>(j)]);
  auto at = [&](int j) -> const P& { return v[static_cast<std::size_t>(j + m - 1)]; };

  StepReport report;
  for (int i = 1; i <= table.stages; ++i) {
    std::vector<Limiter<P>> limiters;
    for (const auto& [j, g] : table.rows[static_cast<std::size_t>(i - 1)])
      limiters.push_back({g, std::cref(at(j))});
    StageResult<P> r;
    try {
      r = space.stage_solve(std::span<const Limiter<P>>(limiters), state.k, at(i - 1));
    } catch (const StageFailure&) {
      throw;
    } catch (const std::exception& e) {
      throw StageFailure(i, e.what());
    }
    report.stages.push_back({r.objective, r.warm_objective, r.iterations, r.stalled});
    v.push_back(std::move(r.point));
  }
  state.history.push_back(std::move(v.back()));
  return report;
}

template <MetricEnergySpace S>
StepReport step(const SchemeCoefficients& scheme, const S& space, FlowState<typename S::Point>& state) {
  return step(StageTable(scheme), space, state);
}

struct BootstrapPolicy {
  enum class Kind { substep_euler, stage3 };
  Kind kind = Kind::substep_euler;
  int substeps = 8;

  static BootstrapPolicy substep_euler(int r = 8) { return {Kind::substep_euler, r}; }
  static BootstrapPolicy stage3() { return {Kind::stage3, 1}; }
};

BootstrapPolicy parse_bootstrap(const std::string& text);
std::string to_string(const BootstrapPolicy& policy);

/// Generates u_1..u_{M-1} with a single-step method so that the first mixed
/// step has the history it needs. Empty when M = 1.
template <MetricEnergySpace S>
std::vector<typename S::Point> bootstrap_first_steps(int steps, const S& space,
                                                     const typename S::Point& u0, double k,
                                                     const BootstrapPolicy& policy) {
  using P = typename S::Point;
  std::vector<P> out;
  if (steps <= 1) return out;
  const bool euler = policy.kind == BootstrapPolicy::Kind::substep_euler;
  if (euler && policy.substeps < 1) throw std::invalid_argument("bootstrap needs at least one substep");
  const StageTable single(builtin_scheme(euler ? "backward_euler" : "stage3_order2"));
  FlowState<P> state{{u0}, euler ? k / policy.substeps : k};
  const int per_step = euler ? policy.substeps : 1;
  for (int s = 1; s < steps; ++s) {
    for (int r = 0; r < per_step; ++r) step(single, space, state);
    out.push_back(state.history.back());
  }
  return out;
}

template <class P>
struct Trajectory {
  double k = 0.0;
  std::vector<P> points;          // u_0 .. u_n
  std::vector<bool> bootstrapped;  // per point
  std::vector<StepReport> reports;  // one per mixed step
};

/// u_0 .. u_{n_steps}; the first M-1 steps after u_0 come from the bootstrap.
template <MetricEnergySpace S>
Trajectory<typename S::Point> run(const SchemeCoefficients& scheme, const S& space,
                                  const typename S::Point& u0, double k, int n_steps,
                                  const BootstrapPolicy& policy = {}) {
  using P = typename S::Point;
  if (n_steps < 1) throw std::invalid_argument("run needs n_steps >= 1");
  const StageTable table(scheme);
  Trajectory<P> traj;
  traj.k = k;
  FlowState<P> state{{u0}, k};
  traj.bootstrapped.push_back(false);
  for (auto& p : bootstrap_first_steps(scheme.steps(), space, u0, k, policy)) {
    if (static_cast<int>(state.history.size()) > n_steps) break;
    state.history.push_back(std::move(p));
    traj.bootstrapped.push_back(true);
  }
  while (static_cast<int>(state.history.size()) <= n_steps) {
    traj.reports.push_back(step(table, space, state));
    traj.bootstrapped.push_back(false);
  }
  traj.points = std::move(state.history);
  return traj;
}

/// CSV with columns step,time,energy,d2 (d2 = d^2(u_n, u_{n-1}), empty at n = 0).
template <MetricEnergySpace S>
void write_trajectory_csv(std::ostream& out, const S& space,
                          const Trajectory<typename S::Point>& traj, double t0 = 0.0) {
  const auto old = out.precision(17);
  out << "step,time,energy,d2,bootstrap\n";
  for (std::size_t n = 0; n < traj.points.size(); ++n) {
    out << n << ',' << t0 + static_cast<double>(n) * traj.k << ',' << space.energy(traj.points[n])
        << ',';
    if (n > 0) out << space.distance_squared(traj.points[n], traj.points[n - 1]);
    out << ',' << (traj.bootstrapped[n] ? 1 : 0) << '\n';
  }
  out.precision(old);
}

}  // namespace mflow
