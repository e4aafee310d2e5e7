#pragma once

#include <map>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mflow/rational.hpp"

namespace mflow {

/// Coefficient table of an M-step N-stage variational scheme.
///
/// Stage i (1..N) minimizes E(x) + 1/(2k) * sum_j gamma(i,j) d^2(x, v_j) over
/// anchors j = -M+1..i-1, where v_j for j <= 0 are the previous steps
/// (v_0 = u_n, v_{-1} = u_{n-1}, ...). Missing entries are zero.
class SchemeCoefficients {
 public:
  using Index = std::pair<int, int>;

  SchemeCoefficients(int steps, int stages);

  int steps() const { return steps_; }
  int stages() const { return stages_; }

  /// Sets gamma(i, j); throws std::out_of_range for indices outside
  /// 1 <= i <= N, -M+1 <= j <= i-1. Setting zero erases the entry.
  void set(int i, int j, Rational value);
  Rational gamma(int i, int j) const;
  const std::map<Index, Rational>& entries() const { return gamma_; }

  Rational row_sum(int i) const;
  /// Entries (j, gamma) of stage i in increasing j.
  std::vector<std::pair<int, Rational>> row(int i) const;

  bool operator==(const SchemeCoefficients&) const = default;

 private:
  int steps_;
  int stages_;
  std::map<Index, Rational> gamma_;
};

/// Squared-distance weights w(i, j), i = 0..N, j = -M+1..N, zero for i <= j.
class WeightMatrix {
 public:
  WeightMatrix(int steps, int stages);

  int steps() const { return steps_; }
  int stages() const { return stages_; }

  const Rational& at(int i, int j) const;
  void set(int i, int j, Rational value);

  /// Weight of the unordered pair {i, j}: w(max, min).
  const Rational& edge(int i, int j) const { return i > j ? at(i, j) : at(j, i); }

  bool operator==(const WeightMatrix&) const = default;

 private:
  std::size_t offset(int i, int j) const;

  int steps_;
  int stages_;
  std::vector<Rational> data_;
};

/// Auxiliary Taylor coefficients a, b, c, d for every index -M+1..N.
struct ConsistencyReport {
  int steps = 1;
  int stages = 1;
  std::vector<Rational> a, b, c, d;
  int order = 0;

  const Rational& a_at(int j) const { return a[static_cast<std::size_t>(j + steps - 1)]; }
  const Rational& b_at(int j) const { return b[static_cast<std::size_t>(j + steps - 1)]; }
  const Rational& c_at(int j) const { return c[static_cast<std::size_t>(j + steps - 1)]; }
  const Rational& d_at(int j) const { return d[static_cast<std::size_t>(j + steps - 1)]; }
};

WeightMatrix weights(const SchemeCoefficients& scheme);

/// Weights with w(0,-1) lowered by l1 and w(N,0) raised by l2.
/// Requires 0 <= l1 < l2 and at least two steps.
WeightMatrix shifted_weights(const SchemeCoefficients& scheme, const Rational& l1,
                             const Rational& l2);

/// Runs the a/b/c/d recurrences in exact arithmetic and classifies the order.
/// Throws std::domain_error when some stage has a zero row sum.
ConsistencyReport consistency_vars(const SchemeCoefficients& scheme);

int classify_order(const ConsistencyReport& report);

/// One of "backward_euler", "stage3_order2", "diag7_order3".
SchemeCoefficients builtin_scheme(std::string_view name);
std::vector<std::string> builtin_scheme_names();

// Scheme files are JSON documents:
//   {"M": 2, "N": 7, "gamma": [{"i": 1, "j": -1, "num": "1", "den": "5"}, ...]}
std::string scheme_to_json(const SchemeCoefficients& scheme);
SchemeCoefficients scheme_from_json(std::string_view text);

}  // namespace mflow
