#pragma once

#include <compare>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "mflow/rational.hpp"
#include "mflow/scheme.hpp"

namespace mflow {

/// Unordered vertex pair stored as (hi, lo) with hi > lo.
struct Edge {
  int hi;
  int lo;

  Edge(int i, int j);
  auto operator<=>(const Edge&) const = default;
  bool touches(int v) const { return hi == v || lo == v; }
};

using EdgeSet = std::set<Edge>;

struct SchemeGraph {
  std::vector<int> vertices;  // -M+1..N, always the full range
  EdgeSet edges;
};

SchemeGraph build_graph(const WeightMatrix& w);

/// Book-shaped parts for single-step N-stage schemes: part alpha joins the
/// pair {alpha, alpha+1} to each other and to every vertex alpha+2..N.
std::vector<EdgeSet> fan_decomposition(int stages);

/// Two hub-plus-path parts for two-step N-stage diagonal schemes: hub -1
/// (resp. 0) joined to every later vertex, plus the stage path 1-2-...-N.
std::vector<EdgeSet> diagonal_decomposition(int stages);

enum class TemplateKind { none, book, hub_path };
std::string_view to_string(TemplateKind kind);

/// Recognizes subgraphs of the two planar-embeddable families: books of
/// triangles sharing one spine edge, and a hub joined to a path. A return of
/// `none` does not prove the graph is non-embeddable.
TemplateKind classify_template(const EdgeSet& edges, const std::vector<int>& vertices);
bool is_embeddable_template(const EdgeSet& edges, const std::vector<int>& vertices);

struct SubgraphPart {
  EdgeSet edges;
  std::map<Edge, Rational> theta;
};

struct SubgraphDecomposition {
  std::vector<SubgraphPart> parts;
};

/// Builds parts with theta = 0 on every edge; pair with project_partition.
SubgraphDecomposition zero_theta(const std::vector<EdgeSet>& parts);

/// Sum over parts of theta on `e`, minus w(e).
Rational partition_residual(const SubgraphDecomposition& d, const WeightMatrix& w, const Edge& e);

/// Nearest decomposition (per edge, least squares) satisfying the partition
/// identity exactly: each edge's residual is split equally among the parts
/// that contain it. Throws CertificationError for uncovered graph edges.
SubgraphDecomposition project_partition(const SubgraphDecomposition& d, const WeightMatrix& w);

/// Q = sum_e theta_e (e_i - e_j)(e_i - e_j)^T over the part's edges, with
/// vertex v mapped to row v + M - 1.
Eigen::MatrixXd assemble_q(const EdgeSet& edges, const std::map<Edge, Rational>& theta, int steps,
                           int stages);

class CertificationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CertificateKind { dissipative, bounded, inconclusive };
std::string_view to_string(CertificateKind kind);

struct PartSpectrum {
  double max_eigenvalue = 0.0;
  /// Largest eigenvalue on the part's active vertices after removing the
  /// constant direction; negative means strictly negative definite there.
  double strict_margin = 0.0;
  int dimension = 0;
  TemplateKind shape = TemplateKind::none;
};

struct StabilityCertificate {
  CertificateKind kind = CertificateKind::inconclusive;
  std::optional<Rational> l1, l2;
  std::vector<PartSpectrum> spectra;
  SubgraphDecomposition decomposition;
  WeightMatrix weights{1, 1};
  std::string reason;
};

struct CertifyOptions {
  Rational partition_tol = 0;  // exact by default
  double psd_tol = 1e-9;
};

StabilityCertificate certify_dissipative(const SchemeCoefficients& scheme,
                                         const SubgraphDecomposition& decomposition,
                                         const CertifyOptions& options = {});

StabilityCertificate certify_bounded(const SchemeCoefficients& scheme, const Rational& l1,
                                     const Rational& l2, const SubgraphDecomposition& decomposition,
                                     const CertifyOptions& options = {});

/// Published decomposition and theta for a built-in scheme, with the shift
/// pair when the scheme is certified through the boundedness criterion.
/// The theta values are the published decimals; see certify_builtin.
struct CertificateInput {
  SubgraphDecomposition decomposition;
  std::optional<Rational> l1, l2;
  Rational partition_tol = 0;
};
CertificateInput builtin_certificate_input(std::string_view scheme_name);

/// Certifies a built-in scheme with its published decomposition. Decimal
/// theta tables are checked against the partition tolerance and then
/// projected onto the exact partition identity.
StabilityCertificate certify_builtin(std::string_view scheme_name, const CertifyOptions& options = {});

/// Default decomposition for schemes without a published one: fan parts for
/// single-step schemes, hub-plus-path parts for two-step diagonal schemes,
/// theta projected from zero.
SubgraphDecomposition template_decomposition(const SchemeCoefficients& scheme, const WeightMatrix& w);

std::string format_certificate(const StabilityCertificate& cert);

}  // namespace mflow
