#pragma once

// Finite-volume Laplacians on bond-percolation configurations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "perclap/lattice.hpp"

namespace perclap {

enum class BoundaryCondition { neumann, pseudo_dirichlet, dirichlet };

enum class RestrictionScheme {
  /// Keep vertices and open edges inside the box; degrees are in-box degrees.
  graph_restriction,
  /// Diagonal 2d - b(x) with b the boundary degree; pseudo-Dirichlet only.
  neumann_boundary,
};

std::string_view to_string(BoundaryCondition bc);
std::string_view to_string(RestrictionScheme scheme);
BoundaryCondition parse_boundary_condition(std::string_view text);
RestrictionScheme parse_restriction_scheme(std::string_view text);

struct OffDiagonal {
  std::uint32_t row = 0;  // row < col
  std::uint32_t col = 0;
  double value = 0.0;
};

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

/// Real symmetric matrix stored as its diagonal plus strictly upper
/// off-diagonal entries. Immutable once built.
class SparseSymmetricOperator {
 public:
  SparseSymmetricOperator() = default;
  /// `lattice_dim` is the spatial dimension d of the lattice the operator
  /// lives on (0 if not a lattice operator); the heat semigroup exp(-t M/2d)
  /// needs it.
  SparseSymmetricOperator(std::vector<double> diagonal, std::vector<OffDiagonal> off_diagonal,
                          int lattice_dim = 0);

  std::size_t size() const { return diagonal_.size(); }
  int lattice_dim() const { return lattice_dim_; }
  std::span<const double> diagonal() const { return diagonal_; }
  std::span<const OffDiagonal> off_diagonal() const { return off_diagonal_; }

  std::vector<double> apply(std::span<const double> phi) const;
  double quadratic_form(std::span<const double> phi) const;

  /// Both triangles, explicit diagonal (zeros included) for every row.
  SparseMatrix to_sparse() const;
  Eigen::MatrixXd to_dense() const;

  /// Operator restricted to the listed vertices (in the given order).
  SparseSymmetricOperator principal_submatrix(std::span<const std::uint32_t> vertices) const;

  double max_abs_entry() const;
  /// Lower end of the Gershgorin interval.
  double gershgorin_lower() const;

 private:
  std::vector<double> diagonal_;
  std::vector<OffDiagonal> off_diagonal_;
  int lattice_dim_ = 0;
};

/// Delta_N = D - A, Delta_D~ = 2d - A, Delta_D = D - A + 2(2d - D) under
/// graph_restriction; H_Lambda (diagonal 2d - b, open edges -1) under
/// neumann_boundary. Throws std::invalid_argument for neumann_boundary with a
/// boundary condition other than pseudo-Dirichlet.
SparseSymmetricOperator assemble_laplacian(const Configuration& config, BoundaryCondition bc,
                                           RestrictionScheme scheme);

using Assembler = std::function<SparseSymmetricOperator(const Configuration&, BoundaryCondition,
                                                        RestrictionScheme)>;

/// H_{0,Lambda}: Neumann Laplacian of the fully connected free cube.
SparseSymmetricOperator full_cube_operator(const BoxGeometry& geometry);

/// H_Lambda(t) = H_{0,Lambda} + t W_Lambda with W_Lambda = H_Lambda - H_{0,Lambda}.
/// Free topology, t in [0, 1].
SparseSymmetricOperator perturbation_family(const Configuration& config, double t);

std::size_t closed_edge_count(const Configuration& config);

/// E'_Lambda(0) = (2/|Lambda|) * #closed edges of the box (free topology).
double slope_at_zero(const Configuration& config);

/// Exact sparse symmetric mat-vec; throws on dimension mismatch.
std::vector<double> apply(const SparseSymmetricOperator& op, std::span<const double> phi);

/// (-1)^{x_1 + ... + x_d} per vertex.
std::vector<double> parity_signs(const BoxGeometry& geometry);

/// U M U with (U phi)(x) = (-1)^{|x|} phi(x).
SparseSymmetricOperator conjugate_by_parity(const SparseSymmetricOperator& op,
                                            const BoxGeometry& geometry);

/// Coordinate text: header comment, then "i j value" per stored entry
/// (diagonal and upper triangle, 0-based).
void write_triplets(std::ostream& os, const SparseSymmetricOperator& op);

}  // namespace perclap
