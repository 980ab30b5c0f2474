#pragma once

// Eigenvalue machinery: dense spectra for small volumes, Sylvester-inertia
// counting for large sparse ones, extremal eigenpairs and heat-kernel
// matrix elements.

#include <algorithm>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>

#include "perclap/operators.hpp"

namespace perclap {

enum class SpectrumMethod { dense, counted };

struct SpectrumResult {
  std::vector<double> eigenvalues;  // non-decreasing
  SpectrumMethod method = SpectrumMethod::dense;
  double tolerance = 0.0;
};

inline constexpr std::size_t kDefaultDenseCap = 4096;

/// Eigenvalues within this relative distance above E are counted as <= E.
/// Makes the right-continuous step Theta(E - lambda) reproducible at
/// eigenvalues that sit exactly on a grid point. The LDL^T used for counting
/// does not pivot, so a leading minor that is singular at E produces element
/// growth of order 1/shift and a backward error of order eps/shift; the shift
/// must stay well above sqrt(eps) for the inertia to survive.
inline constexpr double kCountingShift = 1e-6;

inline double counting_threshold(double energy) {
  return energy + kCountingShift * std::max(1.0, energy < 0 ? -energy : energy);
}

/// Thrown when a shifted factorization keeps meeting (near-)zero pivots.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, std::vector<double> shifts)
      : std::runtime_error(what), shifts_(std::move(shifts)) {}
  const std::vector<double>& attempted_shifts() const { return shifts_; }

 private:
  std::vector<double> shifts_;
};

/// Thrown by iterative solvers that exhaust their iteration budget.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double last_residual)
      : std::runtime_error(what), last_residual_(last_residual) {}
  double last_residual() const { return last_residual_; }

 private:
  double last_residual_;
};

/// All eigenvalues via a dense symmetric eigensolver. Rejects operators
/// larger than `dense_cap`; use count_below for those.
SpectrumResult full_spectrum(const SparseSymmetricOperator& op,
                             std::size_t dense_cap = kDefaultDenseCap);

/// Number of entries of a sorted spectrum that are <= E (same threshold rule
/// as count_below).
std::size_t count_at_most(std::span<const double> sorted_eigenvalues, double energy);

/// Counts eigenvalues <= E from the inertia of an LDL^T factorization of
/// (M - sigma) with sigma = counting_threshold(E). The fill-reducing ordering
/// is computed once, so repeated queries only refactorize.
///
/// A pivot that is zero or below 1e-3 * shift triggers a retry at
/// sigma_k = E + 2^k * shift; after `max_retries` a FactorizationError lists
/// every shift tried.
class InertiaCounter {
 public:
  explicit InertiaCounter(const SparseSymmetricOperator& op, int max_retries = 8);

  std::size_t count_below(double energy);
  std::size_t dimension() const { return n_; }

 private:
  std::size_t n_ = 0;
  SparseMatrix matrix_;
  std::vector<double> base_diagonal_;
  std::vector<Eigen::Index> diagonal_slot_;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver_;
  double lower_bound_ = 0.0;
  double upper_bound_ = 0.0;
  int max_retries_ = 8;
};

std::size_t count_below(const SparseSymmetricOperator& op, double energy);

struct ExtremalPair {
  double value = 0.0;
  std::vector<double> vector;  // unit norm, component sum >= 0
  double residual = 0.0;       // ||M v - value v||_2
};

struct LanczosOptions {
  double tolerance = 1e-10;  // on residual / (1 + |value|)
  std::size_t krylov_dim = 60;
  int max_restarts = 200;
};

/// The k (1 or 2) lowest eigenpairs by shift-invert Lanczos with full
/// reorthogonalization. The first search starts from the constant vector; the
/// second runs on the orthogonal complement of the first eigenvector, so
/// degenerate bottom eigenvalues are reported with their multiplicity.
std::vector<ExtremalPair> smallest_eigenpairs(const SparseSymmetricOperator& op, int k,
                                              const LanczosOptions& options = {});

/// Second-lowest eigenvalue of the full-cube Neumann Laplacian H_{0,Lambda},
/// i.e. the isolation distance of its ground state. Free topology.
double spectral_gap(const BoxGeometry& geometry);

/// Lowest eigenvalue; dense for small operators, Lanczos otherwise.
double bottom_eigenvalue(const SparseSymmetricOperator& op);

enum class HeatMethod { automatic, dense, krylov };

inline constexpr std::size_t kDenseHeatCap = 512;

/// exp(-s M) delta_x.
std::vector<double> exp_action(const SparseSymmetricOperator& op, std::size_t x, double s,
                               HeatMethod method = HeatMethod::automatic);

/// <delta_y, exp(-t M / 2d) delta_x> for all y; d is the operator's lattice dimension.
std::vector<double> heat_kernel_column(const SparseSymmetricOperator& op, std::size_t x, double t,
                                       HeatMethod method = HeatMethod::automatic);

/// <delta_x, exp(-t M / 2d) delta_x>.
double heat_kernel_diag(const SparseSymmetricOperator& op, std::size_t x, double t,
                        HeatMethod method = HeatMethod::automatic);

}  // namespace perclap
