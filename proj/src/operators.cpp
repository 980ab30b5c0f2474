#include "perclap/operators.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>

#include "perclap/format.hpp"

namespace perclap {

std::string_view to_string(BoundaryCondition bc) {
  switch (bc) {
    case BoundaryCondition::neumann: return "N";
    case BoundaryCondition::pseudo_dirichlet: return "Dtilde";
    case BoundaryCondition::dirichlet: return "D";
  }
  return "?";
}

std::string_view to_string(RestrictionScheme scheme) {
  return scheme == RestrictionScheme::graph_restriction ? "graph_restriction" : "neumann_boundary";
}

BoundaryCondition parse_boundary_condition(std::string_view text) {
  if (text == "N" || text == "neumann") return BoundaryCondition::neumann;
  if (text == "Dtilde" || text == "pseudo_dirichlet") return BoundaryCondition::pseudo_dirichlet;
  if (text == "D" || text == "dirichlet") return BoundaryCondition::dirichlet;
  throw std::invalid_argument("unknown boundary condition '" + std::string(text) +
                              "' (expected N, Dtilde or D)");
}

RestrictionScheme parse_restriction_scheme(std::string_view text) {
  if (text == "graph_restriction") return RestrictionScheme::graph_restriction;
  if (text == "neumann_boundary") return RestrictionScheme::neumann_boundary;
  throw std::invalid_argument("unknown restriction scheme '" + std::string(text) +
                              "' (expected graph_restriction or neumann_boundary)");
}

SparseSymmetricOperator::SparseSymmetricOperator(std::vector<double> diagonal,
                                                 std::vector<OffDiagonal> off_diagonal,
                                                 int lattice_dim)
    : diagonal_(std::move(diagonal)), off_diagonal_(std::move(off_diagonal)), lattice_dim_(lattice_dim) {
  for (double v : diagonal_)
    if (!std::isfinite(v)) throw std::invalid_argument("SparseSymmetricOperator: non-finite diagonal entry");
  for (const auto& e : off_diagonal_) {
    if (e.row >= e.col || e.col >= diagonal_.size())
      throw std::invalid_argument("SparseSymmetricOperator: off-diagonal entry must satisfy row < col < n");
    if (!std::isfinite(e.value))
      throw std::invalid_argument("SparseSymmetricOperator: non-finite off-diagonal entry");
  }
}

std::vector<double> SparseSymmetricOperator::apply(std::span<const double> phi) const {
  if (phi.size() != size())
    throw std::invalid_argument("apply: vector of length " + std::to_string(phi.size()) +
                                " for operator of dimension " + std::to_string(size()));
  std::vector<double> out(size());
  for (std::size_t i = 0; i < size(); ++i) out[i] = diagonal_[i] * phi[i];
  for (const auto& e : off_diagonal_) {
    out[e.row] += e.value * phi[e.col];
    out[e.col] += e.value * phi[e.row];
  }
  return out;
}

double SparseSymmetricOperator::quadratic_form(std::span<const double> phi) const {
  if (phi.size() != size()) throw std::invalid_argument("quadratic_form: dimension mismatch");
  double q = 0.0;
  for (std::size_t i = 0; i < size(); ++i) q += diagonal_[i] * phi[i] * phi[i];
  for (const auto& e : off_diagonal_) q += 2.0 * e.value * phi[e.row] * phi[e.col];
  return q;
}

SparseMatrix SparseSymmetricOperator::to_sparse() const {
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(size() + 2 * off_diagonal_.size());
  for (std::size_t i = 0; i < size(); ++i)
    triplets.emplace_back(static_cast<int>(i), static_cast<int>(i), diagonal_[i]);
  for (const auto& e : off_diagonal_) {
    triplets.emplace_back(static_cast<int>(e.row), static_cast<int>(e.col), e.value);
    triplets.emplace_back(static_cast<int>(e.col), static_cast<int>(e.row), e.value);
  }
  const auto n = static_cast<Eigen::Index>(size());
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

Eigen::MatrixXd SparseSymmetricOperator::to_dense() const {
  const auto n = static_cast<Eigen::Index>(size());
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < size(); ++i) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = diagonal_[i];
  for (const auto& e : off_diagonal_) {
    m(e.row, e.col) += e.value;
    m(e.col, e.row) += e.value;
  }
  return m;
}

SparseSymmetricOperator SparseSymmetricOperator::principal_submatrix(
    std::span<const std::uint32_t> vertices) const {
  constexpr std::uint32_t kAbsent = 0xffffffffu;
  std::vector<std::uint32_t> position(size(), kAbsent);
  std::vector<double> diag;
  diag.reserve(vertices.size());
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    if (vertices[k] >= size()) throw std::out_of_range("principal_submatrix: vertex outside operator");
    if (position[vertices[k]] != kAbsent) throw std::invalid_argument("principal_submatrix: repeated vertex");
    position[vertices[k]] = static_cast<std::uint32_t>(k);
    diag.push_back(diagonal_[vertices[k]]);
  }
  std::vector<OffDiagonal> off;
  for (const auto& e : off_diagonal_) {
    const std::uint32_t a = position[e.row], b = position[e.col];
    if (a == kAbsent || b == kAbsent) continue;
    off.push_back({std::min(a, b), std::max(a, b), e.value});
  }
  return SparseSymmetricOperator(std::move(diag), std::move(off), lattice_dim_);
}

double SparseSymmetricOperator::max_abs_entry() const {
  double m = 0.0;
  for (double v : diagonal_) m = std::max(m, std::abs(v));
  for (const auto& e : off_diagonal_) m = std::max(m, std::abs(e.value));
  return m;
}

double SparseSymmetricOperator::gershgorin_lower() const {
  std::vector<double> radius(size(), 0.0);
  for (const auto& e : off_diagonal_) {
    radius[e.row] += std::abs(e.value);
    radius[e.col] += std::abs(e.value);
  }
  double lo = 0.0;
  for (std::size_t i = 0; i < size(); ++i) lo = std::min(lo, diagonal_[i] - radius[i]);
  return size() == 0 ? 0.0 : lo;
}

namespace {

std::vector<int> open_degrees(const Configuration& config, const std::vector<Edge>& edges) {
  std::vector<int> degree(config.geometry.volume(), 0);
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!config.is_open(e)) continue;
    ++degree[edges[e].a];
    ++degree[edges[e].b];
  }
  return degree;
}

OffDiagonal ordered(const Edge& edge, double value) {
  return {std::min(edge.a, edge.b), std::max(edge.a, edge.b), value};
}

void check_occupation(const Configuration& config) {
  if (config.occupation.size() != config.geometry.edge_count())
    throw std::invalid_argument("configuration occupation length does not match the edge count");
}

}  // namespace

SparseSymmetricOperator assemble_laplacian(const Configuration& config, BoundaryCondition bc,
                                           RestrictionScheme scheme) {
  check_occupation(config);
  if (scheme == RestrictionScheme::neumann_boundary && bc != BoundaryCondition::pseudo_dirichlet)
    throw std::invalid_argument(
        "neumann_boundary restriction is defined for the pseudo-Dirichlet Laplacian only (got " +
        std::string(to_string(bc)) + ")");

  const BoxGeometry& g = config.geometry;
  const auto edges = enumerate_edges(g);
  const double two_d = 2.0 * g.dim();

  std::vector<double> diag(g.volume());
  if (scheme == RestrictionScheme::neumann_boundary) {
    for (std::size_t v = 0; v < g.volume(); ++v) diag[v] = two_d - g.boundary_degree(v);
  } else {
    const auto degree = open_degrees(config, edges);
    for (std::size_t v = 0; v < g.volume(); ++v) {
      switch (bc) {
        case BoundaryCondition::neumann: diag[v] = degree[v]; break;
        case BoundaryCondition::pseudo_dirichlet: diag[v] = two_d; break;
        case BoundaryCondition::dirichlet: diag[v] = 2.0 * two_d - degree[v]; break;
      }
    }
  }

  std::vector<OffDiagonal> off;
  off.reserve(config.open_count());
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (config.is_open(e)) off.push_back(ordered(edges[e], -1.0));
  return SparseSymmetricOperator(std::move(diag), std::move(off), g.dim());
}

SparseSymmetricOperator full_cube_operator(const BoxGeometry& geometry) {
  if (geometry.topology() != Topology::free)
    throw std::invalid_argument("full_cube_operator: free topology required");
  return assemble_laplacian(uniform_configuration(geometry, true), BoundaryCondition::pseudo_dirichlet,
                            RestrictionScheme::neumann_boundary);
}

SparseSymmetricOperator perturbation_family(const Configuration& config, double t) {
  check_occupation(config);
  if (config.geometry.topology() != Topology::free)
    throw std::invalid_argument("perturbation_family: free topology required");
  if (!(t >= 0.0 && t <= 1.0))
    throw std::invalid_argument("perturbation_family: t must lie in [0, 1]");
  const BoxGeometry& g = config.geometry;
  const auto edges = enumerate_edges(g);
  std::vector<double> diag(g.volume());
  for (std::size_t v = 0; v < g.volume(); ++v) diag[v] = 2.0 * g.dim() - g.boundary_degree(v);
  // H_0 carries -1 on every box edge; W adds +1 on the closed ones.
  std::vector<OffDiagonal> off;
  off.reserve(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double value = -1.0 + t * (config.is_open(e) ? 0.0 : 1.0);
    if (value != 0.0) off.push_back(ordered(edges[e], value));
  }
  return SparseSymmetricOperator(std::move(diag), std::move(off), g.dim());
}

std::size_t closed_edge_count(const Configuration& config) {
  check_occupation(config);
  return config.occupation.size() - config.open_count();
}

double slope_at_zero(const Configuration& config) {
  if (config.geometry.topology() != Topology::free)
    throw std::invalid_argument("slope_at_zero: free topology required");
  return 2.0 * static_cast<double>(closed_edge_count(config)) /
         static_cast<double>(config.geometry.volume());
}

std::vector<double> apply(const SparseSymmetricOperator& op, std::span<const double> phi) {
  return op.apply(phi);
}

std::vector<double> parity_signs(const BoxGeometry& geometry) {
  std::vector<double> signs(geometry.volume());
  for (std::size_t v = 0; v < geometry.volume(); ++v) {
    int s = 0;
    for (int axis = 0; axis < geometry.dim(); ++axis) s += geometry.coordinate(v, axis);
    signs[v] = (s % 2 == 0) ? 1.0 : -1.0;
  }
  return signs;
}

SparseSymmetricOperator conjugate_by_parity(const SparseSymmetricOperator& op,
                                            const BoxGeometry& geometry) {
  if (op.size() != geometry.volume())
    throw std::invalid_argument("conjugate_by_parity: operator and geometry disagree in size");
  const auto signs = parity_signs(geometry);
  std::vector<double> diag(op.diagonal().begin(), op.diagonal().end());
  std::vector<OffDiagonal> off(op.off_diagonal().begin(), op.off_diagonal().end());
  for (auto& e : off) e.value *= signs[e.row] * signs[e.col];
  return SparseSymmetricOperator(std::move(diag), std::move(off), op.lattice_dim());
}

void write_triplets(std::ostream& os, const SparseSymmetricOperator& op) {
  os << "# symmetric upper triangle, n=" << op.size()
     << " entries=" << op.size() + op.off_diagonal().size() << '\n';
  for (std::size_t i = 0; i < op.size(); ++i)
    os << i << ' ' << i << ' ' << format_double(op.diagonal()[i]) << '\n';
  for (const auto& e : op.off_diagonal())
    os << e.row << ' ' << e.col << ' ' << format_double(e.value) << '\n';
}

}  // namespace perclap
