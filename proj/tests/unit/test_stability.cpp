#include <doctest.h>

#include <random>

#include <Eigen/Eigenvalues>

#include "mflow/linalg.hpp"
#include "mflow/stability.hpp"

using namespace mflow;

namespace {

EdgeSet edges(std::initializer_list<std::pair<int, int>> list) {
  EdgeSet s;
  for (auto [i, j] : list) s.emplace(i, j);
  return s;
}

double oracle_max_eig(const Eigen::MatrixXd& q) {
  return Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(q).eigenvalues().maxCoeff();
}

std::vector<int> range(int lo, int hi) {
  std::vector<int> v;
  for (int i = lo; i <= hi; ++i) v.push_back(i);
  return v;
}

}  // namespace

TEST_CASE("scheme graphs") {
  const SchemeGraph be = build_graph(weights(builtin_scheme("backward_euler")));
  CHECK(be.edges == edges({{1, 0}}));
  CHECK(be.vertices == range(0, 1));

  const SchemeGraph k4 = build_graph(weights(builtin_scheme("stage3_order2")));
  CHECK(k4.edges == edges({{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}));

  const SchemeCoefficients d7 = builtin_scheme("diag7_order3");
  EdgeSet hubs_and_path;
  for (int v = 1; v <= 7; ++v) {
    hubs_and_path.emplace(v, -1);
    hubs_and_path.emplace(v, 0);
    if (v < 7) hubs_and_path.emplace(v + 1, v);
  }
  const SchemeGraph shifted = build_graph(shifted_weights(d7, Rational(1, 5), Rational(3, 10)));
  CHECK(shifted.vertices == range(-1, 7));
  // The L1 shift cancels w(0,-1), so the hub-hub edge drops out.
  CHECK(shifted.edges == hubs_and_path);
  const SchemeGraph plain = build_graph(weights(d7));
  EdgeSet with_hub_edge = hubs_and_path;
  with_hub_edge.emplace(0, -1);
  CHECK(plain.edges == with_hub_edge);
  CHECK(plain.edges.size() == 21);
}

TEST_CASE("isolated vertices stay in the graph") {
  SchemeCoefficients s(3, 1);
  s.set(1, 0, 1);
  const SchemeGraph g = build_graph(weights(s));
  CHECK(g.vertices == range(-2, 1));
  CHECK(g.edges.size() == 1);
}

TEST_CASE("fan decomposition") {
  CHECK_THROWS_AS(fan_decomposition(1), std::invalid_argument);
  const auto n2 = fan_decomposition(2);
  REQUIRE(n2.size() == 1);
  CHECK(n2[0] == edges({{1, 0}, {2, 0}, {2, 1}}));
  const auto n3 = fan_decomposition(3);
  REQUIRE(n3.size() == 2);
  CHECK(n3[0] == edges({{1, 0}, {2, 0}, {3, 0}, {2, 1}, {3, 1}}));
  CHECK(n3[1] == edges({{2, 1}, {3, 1}, {3, 2}}));
  for (int n = 2; n <= 8; ++n) {
    EdgeSet all;
    for (const auto& p : fan_decomposition(n)) {
      all.insert(p.begin(), p.end());
      CHECK(classify_template(p, range(0, n)) == TemplateKind::book);
    }
    CHECK(all.size() == static_cast<std::size_t>((n + 1) * n / 2));
  }
}

TEST_CASE("diagonal decomposition") {
  const auto n1 = diagonal_decomposition(1);
  CHECK(n1[0] == edges({{0, -1}, {1, -1}}));
  CHECK(n1[1] == edges({{1, 0}}));
  const auto n7 = diagonal_decomposition(7);
  EdgeSet all;
  for (const auto& p : n7) {
    all.insert(p.begin(), p.end());
    CHECK(classify_template(p, range(-1, 7)) == TemplateKind::hub_path);
  }
  CHECK(all == build_graph(weights(builtin_scheme("diag7_order3"))).edges);
  CHECK(all.size() == 21);
  CHECK_THROWS_AS(diagonal_decomposition(0), std::invalid_argument);
}

TEST_CASE("embeddable template recognizer") {
  const auto v4 = range(0, 3);
  CHECK_FALSE(is_embeddable_template(edges({{1, 0}, {2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}), v4));
  CHECK(is_embeddable_template(edges({{1, 0}}), v4));
  CHECK(is_embeddable_template(edges({{2, 0}, {2, 1}, {3, 0}, {3, 1}, {3, 2}}), v4));
  CHECK(is_embeddable_template({}, v4));
  // K_{3,3} is neither a book nor a hub plus path.
  CHECK_FALSE(is_embeddable_template(
      edges({{3, 0}, {4, 0}, {5, 0}, {3, 1}, {4, 1}, {5, 1}, {3, 2}, {4, 2}, {5, 2}}), range(0, 5)));
  // A hub joined to a cycle contains K4 minors only when the rest is not a path.
  CHECK(classify_template(edges({{1, 0}, {2, 0}, {3, 0}, {4, 0}, {2, 1}, {3, 2}, {4, 3}}), range(0, 4)) ==
        TemplateKind::hub_path);
  CHECK_FALSE(is_embeddable_template(edges({{1, 0}, {2, 0}, {3, 0}, {4, 0}, {2, 1}, {3, 2}, {4, 3}, {4, 1}}),
                                     range(0, 4)));
  // Edges outside the vertex set are never accepted.
  CHECK_FALSE(is_embeddable_template(edges({{9, 0}}), v4));
}

TEST_CASE("assembled quadratic forms") {
  std::map<Edge, Rational> t{{Edge(1, 0), -1}};
  const Eigen::MatrixXd q = assemble_q(edges({{1, 0}}), t, 1, 1);
  Eigen::MatrixXd expect(2, 2);
  expect << -1, 1, 1, -1;
  CHECK(q == expect);

  std::map<Edge, Rational> t2{{Edge(1, 0), -5}, {Edge(2, 0), parse_rational("2.2")}, {Edge(2, 1), parse_rational("-3.93")}};
  const Eigen::MatrixXd q2 = assemble_q(edges({{1, 0}, {2, 0}, {2, 1}}), t2, 1, 3);
  CHECK(q2.rows() == 4);
  CHECK(q2.row(3).norm() == 0.0);
  CHECK(q2.col(3).norm() == 0.0);
  CHECK(q2(0, 1) == 5.0);

  std::map<Edge, Rational> stray{{Edge(3, 0), 1}};
  CHECK_THROWS_AS(assemble_q(edges({{1, 0}}), stray, 1, 3), std::invalid_argument);
  CHECK_THROWS_AS(assemble_q(edges({{1, 0}}), {}, 1, 3), std::invalid_argument);
}

TEST_CASE("zero row sums and the Laplacian sign property") {
  std::mt19937 rng(17);
  std::uniform_int_distribution<int> num(-40, 0), any(-40, 40), pick(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const int m = 1 + trial % 2, n = 2 + trial % 5;
    EdgeSet part;
    std::map<Edge, Rational> nonpos, mixed;
    for (int i = -m + 1; i <= n; ++i)
      for (int j = -m + 1; j < i; ++j)
        if (pick(rng)) {
          part.emplace(i, j);
          nonpos[Edge(i, j)] = Rational(num(rng), 7);
          mixed[Edge(i, j)] = Rational(any(rng), 7);
        }
    const Eigen::MatrixXd q = assemble_q(part, nonpos, m, n);
    CHECK(q.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(oracle_max_eig(q) <= 1e-12);
    CHECK(max_eigenvalue_symmetric(q) <= 1e-12);
    const Eigen::MatrixXd qm = assemble_q(part, mixed, m, n);
    CHECK(qm.rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(std::abs(max_eigenvalue_symmetric(qm) - oracle_max_eig(qm)) <= 1e-12 * (1 + qm.norm()));
  }
}

TEST_CASE("backward Euler is dissipative with the trivial decomposition") {
  const StabilityCertificate c = certify_builtin("backward_euler");
  CHECK(c.kind == CertificateKind::dissipative);
  const SchemeCoefficients be = builtin_scheme("backward_euler");
  const StabilityCertificate d = certify_dissipative(be, template_decomposition(be, weights(be)));
  CHECK(d.kind == CertificateKind::dissipative);
}

TEST_CASE("stage3_order2 is dissipative with the published decomposition") {
  const StabilityCertificate c = certify_builtin("stage3_order2");
  CHECK(c.kind == CertificateKind::dissipative);
  REQUIRE(c.spectra.size() == 2);
  for (const auto& s : c.spectra) {
    CHECK(s.max_eigenvalue <= 1e-9);
    CHECK(s.shape == TemplateKind::book);
    CHECK(s.dimension == 4);
  }
  // The published tables satisfy the partition identity exactly.
  const auto in = builtin_certificate_input("stage3_order2");
  const WeightMatrix w = weights(builtin_scheme("stage3_order2"));
  for (const auto& e : build_graph(w).edges) CHECK(partition_residual(in.decomposition, w, e) == 0);
  // Oracle spectra of the two forms.
  for (const auto& p : in.decomposition.parts) CHECK(oracle_max_eig(assemble_q(p.edges, p.theta, 1, 3)) <= 1e-12);
  CHECK(format_certificate(c).find("verdict: dissipative") != std::string::npos);
}

TEST_CASE("a perturbed split of stage3_order2 is inconclusive") {
  // Moving weight between the parts on edge {2,1} keeps the partition
  // identity but makes the first form indefinite.
  auto in = builtin_certificate_input("stage3_order2");
  in.decomposition.parts[0].theta[Edge(2, 1)] = 2;
  in.decomposition.parts[1].theta[Edge(2, 1)] = parse_rational("-8.6");
  const auto& p = in.decomposition.parts[0];
  CHECK(oracle_max_eig(assemble_q(p.edges, p.theta, 1, 3)) > 1e-3);
  const StabilityCertificate c = certify_dissipative(builtin_scheme("stage3_order2"), in.decomposition);
  CHECK(c.kind == CertificateKind::inconclusive);
  CHECK(c.reason.find("eigenvalue") != std::string::npos);
}

TEST_CASE("decomposition failures are reported with the edge") {
  const SchemeCoefficients s = builtin_scheme("stage3_order2");
  auto in = builtin_certificate_input("stage3_order2");
  auto missing = in.decomposition;
  missing.parts.pop_back();
  CHECK_THROWS_WITH_AS(certify_dissipative(s, missing), doctest::Contains("{1,0}"), CertificationError);
  auto off = in.decomposition;
  off.parts[0].theta[Edge(3, 2)] = -9;
  CHECK_THROWS_WITH_AS(certify_dissipative(s, off), doctest::Contains("{3,2}"), CertificationError);
  CHECK(certify_dissipative(s, template_decomposition(s, weights(s))).spectra.size() == 2);
}

TEST_CASE("the K4 graph as a single part is inconclusive") {
  const SchemeCoefficients s = builtin_scheme("stage3_order2");
  const WeightMatrix w = weights(s);
  const auto d = project_partition(zero_theta({build_graph(w).edges}), w);
  const StabilityCertificate c = certify_dissipative(s, d);
  CHECK(c.kind == CertificateKind::inconclusive);
  CHECK(c.spectra[0].shape == TemplateKind::none);
}

TEST_CASE("diag7_order3 is bounded with the projected published tables") {
  const StabilityCertificate c = certify_builtin("diag7_order3");
  CHECK(c.kind == CertificateKind::bounded);
  REQUIRE(c.l1.has_value());
  CHECK(*c.l1 == Rational(1, 5));
  CHECK(*c.l2 == Rational(3, 10));
  for (const auto& s : c.spectra) {
    CHECK(s.max_eigenvalue <= 1e-6);
    CHECK(s.shape == TemplateKind::hub_path);
  }
  const SchemeCoefficients d7 = builtin_scheme("diag7_order3");
  const WeightMatrix w = shifted_weights(d7, Rational(1, 5), Rational(3, 10));
  for (const auto& e : build_graph(w).edges) CHECK(partition_residual(c.decomposition, w, e) == 0);
}

TEST_CASE("published diag7 tables carry two-decimal rounding") {
  const SchemeCoefficients d7 = builtin_scheme("diag7_order3");
  const auto in = builtin_certificate_input("diag7_order3");
  const WeightMatrix w = shifted_weights(d7, *in.l1, *in.l2);
  Rational worst = 0;
  for (const auto& e : build_graph(w).edges) worst = std::max<Rational>(worst, abs(partition_residual(in.decomposition, w, e)));
  CHECK(worst <= Rational(1, 100));
  CHECK(worst > Rational(1, 200));
  CertifyOptions strict;
  strict.partition_tol = Rational(1, 200);
  CHECK_THROWS_AS(certify_bounded(d7, *in.l1, *in.l2, in.decomposition, strict), CertificationError);
}

TEST_CASE("bounded certificates") {
  const SchemeCoefficients d7 = builtin_scheme("diag7_order3");
  const auto in = builtin_certificate_input("diag7_order3");
  CHECK_THROWS_AS(certify_bounded(d7, parse_rational("0.3"), parse_rational("0.2"), in.decomposition),
                  std::invalid_argument);

  // A dissipative two-step scheme stays certified under a tiny L2.
  SchemeCoefficients s(2, 1);
  s.set(1, 0, 1);
  const StabilityCertificate base = certify_dissipative(s, template_decomposition(s, weights(s)));
  REQUIRE(base.kind == CertificateKind::dissipative);
  const Rational l2(1, 1000);
  const StabilityCertificate b = certify_bounded(s, 0, l2, template_decomposition(s, shifted_weights(s, 0, l2)));
  CHECK(b.kind == CertificateKind::bounded);
}

TEST_CASE("projection restores the partition identity exactly") {
  const SchemeCoefficients s = builtin_scheme("stage3_order2");
  const WeightMatrix w = weights(s);
  auto d = zero_theta(fan_decomposition(3));
  const auto p = project_partition(d, w);
  for (const auto& e : build_graph(w).edges) CHECK(partition_residual(p, w, e) == 0);
  // Edge {2,1} sits in both fan parts and receives half its weight in each.
  CHECK(p.parts[0].theta.at(Edge(2, 1)) == w.at(2, 1) / 2);
  CHECK_THROWS_AS(project_partition(zero_theta({edges({{1, 0}})}), w), CertificationError);
}
