#include "mflow/stability.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "mflow/linalg.hpp"

namespace mflow {

Edge::Edge(int i, int j) : hi(std::max(i, j)), lo(std::min(i, j)) {
  if (i == j) throw std::invalid_argument("self-loop {" + std::to_string(i) + "," + std::to_string(i) + "}");
}

namespace {

std::string edge_name(const Edge& e) {
  return "{" + std::to_string(e.hi) + "," + std::to_string(e.lo) + "}";
}

std::vector<int> vertex_range(int steps, int stages) {
  std::vector<int> v(static_cast<std::size_t>(steps + stages));
  std::iota(v.begin(), v.end(), -steps + 1);
  return v;
}

bool is_linear_forest(const std::vector<Edge>& edges) {
  std::map<int, int> degree;
  std::map<int, int> parent;
  auto find = [&](int x) {
    if (!parent.contains(x)) parent[x] = x;
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  for (const auto& e : edges) {
    if (++degree[e.hi] > 2 || ++degree[e.lo] > 2) return false;
    int a = find(e.hi), b = find(e.lo);
    if (a == b) return false;
    parent[a] = b;
  }
  return true;
}

}  // namespace

SchemeGraph build_graph(const WeightMatrix& w) {
  SchemeGraph g;
  g.vertices = vertex_range(w.steps(), w.stages());
  for (int i = 0; i <= w.stages(); ++i)
    for (int j = -w.steps() + 1; j < i; ++j)
      if (w.at(i, j) != 0) g.edges.emplace(i, j);
  return g;
}

std::vector<EdgeSet> fan_decomposition(int stages) {
  if (stages < 2) throw std::invalid_argument("fan decomposition needs N >= 2");
  std::vector<EdgeSet> parts;
  for (int alpha = 0; alpha <= stages - 2; ++alpha) {
    EdgeSet part;
    part.emplace(alpha, alpha + 1);
    for (int v = alpha + 2; v <= stages; ++v) {
      part.emplace(alpha, v);
      part.emplace(alpha + 1, v);
    }
    parts.push_back(std::move(part));
  }
  return parts;
}

std::vector<EdgeSet> diagonal_decomposition(int stages) {
  if (stages < 1) throw std::invalid_argument("diagonal decomposition needs N >= 1");
  std::vector<EdgeSet> parts(2);
  for (int alpha = 0; alpha <= 1; ++alpha) {
    const int hub = alpha - 1;
    for (int v = alpha; v <= stages; ++v) parts[static_cast<std::size_t>(alpha)].emplace(hub, v);
    for (int v = 1; v < stages; ++v) parts[static_cast<std::size_t>(alpha)].emplace(v, v + 1);
  }
  return parts;
}

std::string_view to_string(TemplateKind kind) {
  switch (kind) {
    case TemplateKind::book: return "book";
    case TemplateKind::hub_path: return "hub_path";
    case TemplateKind::none: break;
  }
  return "none";
}

TemplateKind classify_template(const EdgeSet& edges, const std::vector<int>& vertices) {
  for (const auto& e : edges)
    if (std::find(vertices.begin(), vertices.end(), e.hi) == vertices.end() ||
        std::find(vertices.begin(), vertices.end(), e.lo) == vertices.end())
      return TemplateKind::none;
  if (edges.size() <= 1) return TemplateKind::book;

  // Book: every edge touches one of two spine vertices.
  for (std::size_t p = 0; p < vertices.size(); ++p)
    for (std::size_t q = p + 1; q < vertices.size(); ++q) {
      const int a = vertices[p], b = vertices[q];
      if (std::all_of(edges.begin(), edges.end(),
                      [&](const Edge& e) { return e.touches(a) || e.touches(b); }))
        return TemplateKind::book;
    }

  // Hub plus path: the edges missing the hub form disjoint simple paths.
  for (int hub : vertices) {
    std::vector<Edge> rest;
    for (const auto& e : edges)
      if (!e.touches(hub)) rest.push_back(e);
    if (is_linear_forest(rest)) return TemplateKind::hub_path;
  }
  return TemplateKind::none;
}

bool is_embeddable_template(const EdgeSet& edges, const std::vector<int>& vertices) {
  return classify_template(edges, vertices) != TemplateKind::none;
}

SubgraphDecomposition zero_theta(const std::vector<EdgeSet>& parts) {
  SubgraphDecomposition d;
  for (const auto& edges : parts) {
    SubgraphPart part{edges, {}};
    for (const auto& e : edges) part.theta[e] = 0;
    d.parts.push_back(std::move(part));
  }
  return d;
}

Rational partition_residual(const SubgraphDecomposition& d, const WeightMatrix& w, const Edge& e) {
  Rational sum = 0;
  for (const auto& part : d.parts)
    if (auto it = part.theta.find(e); it != part.theta.end()) sum += it->second;
  return sum - w.edge(e.hi, e.lo);
}

namespace {

void require_covered(const SubgraphDecomposition& d, const SchemeGraph& g) {
  for (const auto& e : g.edges) {
    const bool covered = std::any_of(d.parts.begin(), d.parts.end(),
                                     [&](const SubgraphPart& p) { return p.edges.contains(e); });
    if (!covered) throw CertificationError("coverage failure: edge " + edge_name(e) + " is in no part");
  }
}

void require_theta_on_part(const SubgraphPart& part) {
  for (const auto& [e, t] : part.theta)
    if (!part.edges.contains(e)) throw CertificationError("theta key " + edge_name(e) + " outside part");
  for (const auto& e : part.edges)
    if (!part.theta.contains(e)) throw CertificationError("theta missing on edge " + edge_name(e));
}

EdgeSet all_part_edges(const SubgraphDecomposition& d) {
  EdgeSet all;
  for (const auto& p : d.parts) all.insert(p.edges.begin(), p.edges.end());
  return all;
}

}  // namespace

SubgraphDecomposition project_partition(const SubgraphDecomposition& d, const WeightMatrix& w) {
  require_covered(d, build_graph(w));
  SubgraphDecomposition out = d;
  for (const auto& e : all_part_edges(d)) {
    const Rational r = partition_residual(d, w, e);
    if (r == 0) continue;
    std::vector<SubgraphPart*> holders;
    for (auto& p : out.parts)
      if (p.edges.contains(e)) holders.push_back(&p);
    const Rational share = r / static_cast<long>(holders.size());
    for (auto* p : holders) p->theta[e] -= share;
  }
  return out;
}

Eigen::MatrixXd assemble_q(const EdgeSet& edges, const std::map<Edge, Rational>& theta, int steps,
                           int stages) {
  const int n = steps + stages;
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  for (const auto& [e, t] : theta) {
    if (!edges.contains(e)) throw std::invalid_argument("theta key " + edge_name(e) + " outside part");
    if (e.lo < -steps + 1 || e.hi > stages)
      throw std::out_of_range("edge " + edge_name(e) + " outside the vertex range");
  }
  for (const auto& e : edges) {
    auto it = theta.find(e);
    if (it == theta.end()) throw std::invalid_argument("theta missing on edge " + edge_name(e));
    const double t = to_double(it->second);
    const int a = e.hi + steps - 1, b = e.lo + steps - 1;
    q(a, a) += t;
    q(b, b) += t;
    q(a, b) -= t;
    q(b, a) -= t;
  }
  return q;
}

std::string_view to_string(CertificateKind kind) {
  switch (kind) {
    case CertificateKind::dissipative: return "dissipative";
    case CertificateKind::bounded: return "bounded";
    case CertificateKind::inconclusive: break;
  }
  return "inconclusive";
}

namespace {

double strict_margin(const Eigen::MatrixXd& q, const EdgeSet& edges, int steps) {
  std::set<int> active;
  for (const auto& e : edges) {
    active.insert(e.hi + steps - 1);
    active.insert(e.lo + steps - 1);
  }
  const auto n = static_cast<Eigen::Index>(active.size());
  if (n < 2) return 0.0;
  std::vector<int> idx(active.begin(), active.end());
  Eigen::MatrixXd sub(n, n);
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) sub(r, c) = q(idx[static_cast<std::size_t>(r)], idx[static_cast<std::size_t>(c)]);
  // Push the constant direction (always in the kernel) far below the rest.
  const double shift = sub.norm() + 1.0;
  sub -= Eigen::MatrixXd::Constant(n, n, shift / static_cast<double>(n));
  return max_eigenvalue_symmetric(sub);
}

StabilityCertificate certify_weights(const WeightMatrix& w, const SubgraphDecomposition& d,
                                     const CertifyOptions& options, CertificateKind success) {
  const SchemeGraph g = build_graph(w);
  require_covered(d, g);
  for (const auto& part : d.parts) require_theta_on_part(part);
  EdgeSet edges = all_part_edges(d);
  edges.insert(g.edges.begin(), g.edges.end());
  for (const auto& e : edges) {
    const Rational r = partition_residual(d, w, e);
    if (abs(r) > options.partition_tol)
      throw CertificationError("partition-sum failure on edge " + edge_name(e) + ": residual " +
                               std::to_string(to_double(r)));
  }

  StabilityCertificate cert;
  cert.decomposition = d;
  cert.weights = w;
  bool ok = true;
  std::ostringstream why;
  for (std::size_t a = 0; a < d.parts.size(); ++a) {
    const auto& part = d.parts[a];
    PartSpectrum s;
    s.shape = classify_template(part.edges, g.vertices);
    const Eigen::MatrixXd q = assemble_q(part.edges, part.theta, w.steps(), w.stages());
    s.dimension = static_cast<int>(q.rows());
    s.max_eigenvalue = max_eigenvalue_symmetric(q);
    s.strict_margin = strict_margin(q, part.edges, w.steps());
    if (s.shape == TemplateKind::none) {
      ok = false;
      why << "part " << a << " matches no embeddable template; ";
    }
    if (s.max_eigenvalue > options.psd_tol) {
      ok = false;
      why << "part " << a << " has eigenvalue " << s.max_eigenvalue << " > " << options.psd_tol << "; ";
    }
    cert.spectra.push_back(s);
  }
  cert.kind = ok ? success : CertificateKind::inconclusive;
  cert.reason = why.str();
  return cert;
}

}  // namespace

StabilityCertificate certify_dissipative(const SchemeCoefficients& scheme,
                                         const SubgraphDecomposition& decomposition,
                                         const CertifyOptions& options) {
  return certify_weights(weights(scheme), decomposition, options, CertificateKind::dissipative);
}

StabilityCertificate certify_bounded(const SchemeCoefficients& scheme, const Rational& l1,
                                     const Rational& l2, const SubgraphDecomposition& decomposition,
                                     const CertifyOptions& options) {
  auto cert = certify_weights(shifted_weights(scheme, l1, l2), decomposition, options,
                              CertificateKind::bounded);
  cert.l1 = l1;
  cert.l2 = l2;
  return cert;
}

CertificateInput builtin_certificate_input(std::string_view scheme_name) {
  CertificateInput in;
  auto part = [](std::initializer_list<std::tuple<int, int, const char*>> entries) {
    SubgraphPart p;
    for (const auto& [i, j, v] : entries) {
      p.edges.emplace(i, j);
      p.theta[Edge(i, j)] = parse_rational(v);
    }
    return p;
  };
  if (scheme_name == "backward_euler") {
    in.decomposition.parts.push_back(part({{1, 0, "-1"}}));
  } else if (scheme_name == "stage3_order2") {
    in.decomposition.parts.push_back(
        part({{2, 0, "-3.2"}, {2, 1, "-2.67"}, {3, 0, "2"}, {3, 1, "1.6"}, {3, 2, "-9.6"}}));
    in.decomposition.parts.push_back(part({{1, 0, "-5"}, {2, 0, "2.2"}, {2, 1, "-3.93"}}));
  } else if (scheme_name == "diag7_order3") {
    in.decomposition.parts.push_back(part({{0, -1, "0"},     {1, -1, "-0.87"}, {2, -1, "0.66"},
                                           {3, -1, "0.27"},  {4, -1, "-0.21"}, {5, -1, "-0.04"},
                                           {6, -1, "0.17"},  {7, -1, "-0.19"}, {2, 1, "-4.82"},
                                           {3, 2, "-2.46"},  {4, 3, "-1.52"},  {5, 4, "-0.10"},
                                           {6, 5, "-0.12"},  {7, 6, "-0.94"}}));
    in.decomposition.parts.push_back(part({{1, 0, "-12.32"}, {2, 0, "-1.40"}, {3, 0, "-0.66"},
                                           {4, 0, "0.80"},   {5, 0, "-0.87"}, {6, 0, "0.90"},
                                           {7, 0, "0.89"},   {2, 1, "-7.63"}, {3, 2, "-10.81"},
                                           {4, 3, "-7.45"},  {5, 4, "-6.80"}, {6, 5, "-8.18"},
                                           {7, 6, "-10.31"}}));
    in.l1 = Rational(1, 5);
    in.l2 = Rational(3, 10);
    // Each published theta is rounded to two decimals, so a two-part sum can
    // miss the weight by up to 0.01.
    in.partition_tol = Rational(1, 100);
  } else {
    throw std::invalid_argument("no published decomposition for scheme '" + std::string(scheme_name) + "'");
  }
  return in;
}

StabilityCertificate certify_builtin(std::string_view scheme_name, const CertifyOptions& options) {
  const SchemeCoefficients scheme = builtin_scheme(scheme_name);
  const CertificateInput in = builtin_certificate_input(scheme_name);
  CertifyOptions exact = options;
  exact.partition_tol = 0;
  if (in.l1) {
    const WeightMatrix w = shifted_weights(scheme, *in.l1, *in.l2);
    // Validates the published table before repairing it.
    CertifyOptions loose = options;
    loose.partition_tol = in.partition_tol;
    (void)certify_bounded(scheme, *in.l1, *in.l2, in.decomposition, loose);
    return certify_bounded(scheme, *in.l1, *in.l2, project_partition(in.decomposition, w), exact);
  }
  return certify_dissipative(scheme, in.decomposition, exact);
}

SubgraphDecomposition template_decomposition(const SchemeCoefficients& scheme, const WeightMatrix& w) {
  const int m = scheme.steps(), n = scheme.stages();
  std::vector<EdgeSet> parts;
  if (m == 1 && n == 1) {
    parts.push_back(EdgeSet{Edge(1, 0)});
  } else if (m == 1) {
    parts = fan_decomposition(n);
  } else if (m == 2) {
    for (const auto& [ij, g] : scheme.entries())
      if (ij.second >= 1 && ij.second < ij.first - 1)
        throw std::invalid_argument("two-step scheme is not diagonal; supply a decomposition");
    parts = diagonal_decomposition(n);
  } else {
    throw std::invalid_argument("no default decomposition for M > 2; supply one");
  }
  return project_partition(zero_theta(parts), w);
}

std::string format_certificate(const StabilityCertificate& cert) {
  std::ostringstream out;
  out.precision(6);
  out << "verdict: " << to_string(cert.kind) << "\n";
  if (cert.l1) out << "shift: L1=" << to_string(*cert.l1) << " L2=" << to_string(*cert.l2) << "\n";
  for (std::size_t a = 0; a < cert.decomposition.parts.size(); ++a) {
    const auto& part = cert.decomposition.parts[a];
    const auto& s = cert.spectra.at(a);
    out << "part " << a << ": template=" << to_string(s.shape) << " lambda_max=" << std::scientific
        << s.max_eigenvalue << " strict_margin=" << s.strict_margin << std::defaultfloat
        << " dim=" << s.dimension << "\n";
    for (const auto& e : part.edges)
      out << "  edge " << edge_name(e) << " theta=" << to_double(part.theta.at(e)) << "\n";
  }
  if (!cert.reason.empty()) out << "reason: " << cert.reason << "\n";
  return out.str();
}

}  // namespace mflow
