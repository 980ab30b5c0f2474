#include "perclap/spectral.hpp"

#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "perclap/format.hpp"
#include "perclap/rng.hpp"

namespace perclap {

namespace {

using Vec = Eigen::VectorXd;

Vec to_eigen(std::span<const double> v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

std::vector<double> to_std(const Vec& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

Vec apply_eigen(const SparseSymmetricOperator& op, const Vec& v) {
  return to_eigen(op.apply(std::span<const double>(v.data(), static_cast<std::size_t>(v.size()))));
}

double gershgorin_upper(const SparseSymmetricOperator& op) {
  std::vector<double> radius(op.size(), 0.0);
  for (const auto& e : op.off_diagonal()) {
    radius[e.row] += std::abs(e.value);
    radius[e.col] += std::abs(e.value);
  }
  double hi = 0.0;
  for (std::size_t i = 0; i < op.size(); ++i) hi = std::max(hi, op.diagonal()[i] + radius[i]);
  return hi;
}

// Orthogonalize v against the columns of `basis` twice (classical Gram-Schmidt
// repeated), which is enough to keep Lanczos vectors orthogonal to working
// precision.
void orthogonalize(Vec& v, const std::vector<Vec>& basis) {
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& q : basis) v -= q.dot(v) * q;
}

void fix_sign(Vec& v) {
  double s = v.sum();
  if (std::abs(s) < 1e-12 * std::sqrt(static_cast<double>(v.size()))) {
    for (Eigen::Index i = 0; i < v.size(); ++i)
      if (std::abs(v[i]) > 1e-12) {
        s = v[i];
        break;
      }
  }
  if (s < 0) v = -v;
}

}  // namespace

SpectrumResult full_spectrum(const SparseSymmetricOperator& op, std::size_t dense_cap) {
  if (op.size() > dense_cap)
    throw std::invalid_argument("full_spectrum: dimension " + std::to_string(op.size()) +
                                " exceeds the dense cap " + std::to_string(dense_cap) +
                                "; use count_below");
  SpectrumResult result;
  result.method = SpectrumMethod::dense;
  if (op.size() == 0) return result;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.to_dense(), Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw std::runtime_error("full_spectrum: dense eigensolver failed");
  result.eigenvalues = to_std(solver.eigenvalues());
  std::sort(result.eigenvalues.begin(), result.eigenvalues.end());
  result.tolerance = 1e-12 * std::max(1.0, gershgorin_upper(op)) * static_cast<double>(op.size());
  return result;
}

std::size_t count_at_most(std::span<const double> sorted_eigenvalues, double energy) {
  const double threshold = counting_threshold(energy);
  return static_cast<std::size_t>(
      std::upper_bound(sorted_eigenvalues.begin(), sorted_eigenvalues.end(), threshold) -
      sorted_eigenvalues.begin());
}

InertiaCounter::InertiaCounter(const SparseSymmetricOperator& op, int max_retries)
    : n_(op.size()), max_retries_(max_retries) {
  lower_bound_ = op.gershgorin_lower();
  upper_bound_ = gershgorin_upper(op);
  if (n_ == 0) return;
  matrix_ = op.to_sparse();
  matrix_.makeCompressed();
  base_diagonal_.assign(op.diagonal().begin(), op.diagonal().end());
  diagonal_slot_.resize(n_);
  const double* values = matrix_.valuePtr();
  for (std::size_t j = 0; j < n_; ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    diagonal_slot_[j] = &matrix_.coeffRef(jj, jj) - values;
  }
  solver_.analyzePattern(matrix_);
  if (solver_.info() != Eigen::Success) throw std::runtime_error("InertiaCounter: symbolic analysis failed");
}

std::size_t InertiaCounter::count_below(double energy) {
  if (!std::isfinite(energy)) throw std::invalid_argument("count_below: energy must be finite");
  if (n_ == 0) return 0;
  // Gershgorin short cuts; for every Laplacian here these are E < 0 and E >= 4d.
  if (counting_threshold(energy) < lower_bound_) return 0;
  if (energy >= upper_bound_) return n_;

  const double base_shift = counting_threshold(energy) - energy;
  std::vector<double> attempted;
  double* values = matrix_.valuePtr();
  for (int k = 0; k <= max_retries_; ++k) {
    const double shift = std::ldexp(base_shift, k);
    const double sigma = energy + shift;
    const double pivot_floor = 1e-3 * shift;
    attempted.push_back(sigma);
    for (std::size_t j = 0; j < n_; ++j) values[diagonal_slot_[j]] = base_diagonal_[j] - sigma;
    solver_.factorize(matrix_);
    if (solver_.info() != Eigen::Success) continue;
    const Vec& d = solver_.vectorD();
    bool degenerate = false;
    std::size_t negative = 0;
    for (Eigen::Index i = 0; i < d.size(); ++i) {
      if (!std::isfinite(d[i]) || std::abs(d[i]) < pivot_floor) {
        degenerate = true;
        break;
      }
      if (d[i] < 0) ++negative;
    }
    if (!degenerate) return negative;
  }
  throw FactorizationError("count_below: LDL^T met a near-zero pivot at E = " + format_double(energy) +
                               " for every attempted shift",
                           attempted);
}

std::size_t count_below(const SparseSymmetricOperator& op, double energy) {
  InertiaCounter counter(op);
  return counter.count_below(energy);
}

std::vector<ExtremalPair> smallest_eigenpairs(const SparseSymmetricOperator& op, int k,
                                              const LanczosOptions& options) {
  const std::size_t n = op.size();
  if (k < 1 || k > 2) throw std::invalid_argument("smallest_eigenpairs: k must be 1 or 2");
  if (n < static_cast<std::size_t>(k))
    throw std::invalid_argument("smallest_eigenpairs: k exceeds the operator dimension");

  // Every eigenvalue lies above sigma, so M - sigma is positive definite and
  // the wanted eigenvalues become the dominant ones of its inverse.
  const double scale = std::max(1.0, op.max_abs_entry());
  const double sigma = op.gershgorin_lower() - 1e-3 * scale;
  SparseMatrix shifted = op.to_sparse();
  for (Eigen::Index j = 0; j < shifted.outerSize(); ++j) shifted.coeffRef(j, j) -= sigma;
  Eigen::SimplicialLDLT<SparseMatrix, Eigen::Lower, Eigen::AMDOrdering<int>> solver(shifted);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("smallest_eigenpairs: factorization of the shifted operator failed");

  std::vector<Vec> found;
  std::vector<ExtremalPair> pairs;
  for (int target = 0; target < k; ++target) {
    Vec start(static_cast<Eigen::Index>(n));
    if (target == 0) {
      start.setOnes();
    } else {
      SplitMix64 gen(0x5eed0000u + static_cast<std::uint64_t>(target));
      for (Eigen::Index i = 0; i < start.size(); ++i) start[i] = gen.uniform() - 0.5;
    }
    orthogonalize(start, found);
    if (start.norm() == 0.0) throw std::invalid_argument("smallest_eigenpairs: degenerate start vector");

    const std::size_t room = n - found.size();
    const std::size_t m_max = std::max<std::size_t>(1, std::min(options.krylov_dim, room));
    double last_residual = std::numeric_limits<double>::infinity();
    bool converged = false;
    ExtremalPair pair;
    for (int restart = 0; restart <= options.max_restarts && !converged; ++restart) {
      std::vector<Vec> basis = found;  // deflation directions first
      const std::size_t offset = basis.size();
      std::vector<double> alpha, beta;
      Vec v = start / start.norm();
      basis.push_back(v);
      for (std::size_t j = 0; j < m_max; ++j) {
        Vec w = solver.solve(basis.back());
        const double a = basis.back().dot(w);
        alpha.push_back(a);
        orthogonalize(w, basis);
        const double b = w.norm();
        if (j + 1 == m_max || b < 1e-13 * std::max(1.0, std::abs(a))) break;
        beta.push_back(b);
        basis.push_back(w / b);
      }
      const auto m = static_cast<Eigen::Index>(alpha.size());
      Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index i = 0; i < m; ++i) tri(i, i) = alpha[static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i + 1 < m; ++i)
        tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
      const Vec s = small.eigenvectors().col(m - 1);  // largest Ritz value of the inverse
      Vec y = Vec::Zero(static_cast<Eigen::Index>(n));
      for (Eigen::Index i = 0; i < m; ++i) y += s[i] * basis[offset + static_cast<std::size_t>(i)];
      orthogonalize(y, found);
      y /= y.norm();
      const Vec my = apply_eigen(op, y);
      const double lambda = y.dot(my);
      last_residual = (my - lambda * y).norm();
      start = y;
      if (last_residual <= options.tolerance * (1.0 + std::abs(lambda))) {
        converged = true;
        fix_sign(y);
        pair.value = lambda;
        pair.vector = to_std(y);
        pair.residual = last_residual;
      }
    }
    if (!converged)
      throw ConvergenceError("smallest_eigenpairs: no convergence within the restart budget", last_residual);
    found.push_back(to_eigen(pair.vector));
    pairs.push_back(std::move(pair));
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) { return a.value < b.value; });
  return pairs;
}

double spectral_gap(const BoxGeometry& geometry) {
  if (geometry.volume() < 2) throw std::invalid_argument("spectral_gap: box needs at least two vertices");
  const auto op = full_cube_operator(geometry);
  if (op.size() <= kDenseHeatCap) return full_spectrum(op).eigenvalues[1];
  return smallest_eigenpairs(op, 2)[1].value;
}

double bottom_eigenvalue(const SparseSymmetricOperator& op) {
  if (op.size() == 0) throw std::invalid_argument("bottom_eigenvalue: empty operator");
  if (op.size() <= kDenseHeatCap) return full_spectrum(op).eigenvalues.front();
  return smallest_eigenpairs(op, 1).front().value;
}

std::vector<double> exp_action(const SparseSymmetricOperator& op, std::size_t x, double s, HeatMethod method) {
  const std::size_t n = op.size();
  if (x >= n) throw std::out_of_range("exp_action: vertex index out of range");
  if (!(s >= 0.0) || !std::isfinite(s)) throw std::invalid_argument("exp_action: time must be finite and >= 0");
  if (method == HeatMethod::automatic) method = n <= kDenseHeatCap ? HeatMethod::dense : HeatMethod::krylov;

  if (method == HeatMethod::dense) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.to_dense());
    const auto& vals = solver.eigenvalues();
    const auto& vecs = solver.eigenvectors();
    Vec coeff = vecs.row(static_cast<Eigen::Index>(x)).transpose();
    for (Eigen::Index i = 0; i < coeff.size(); ++i) coeff[i] *= std::exp(-s * vals[i]);
    return to_std(vecs * coeff);
  }

  // Lanczos from delta_x: exp(-sM) delta_x ~ V exp(-s T) e_1. Stop once the
  // standard a-posteriori estimate beta_m |e_m^T exp(-sT) e_1| is negligible.
  const std::size_t m_cap = std::min<std::size_t>(n, 400);
  std::vector<Vec> basis;
  std::vector<double> alpha, beta;
  Vec v = Vec::Zero(static_cast<Eigen::Index>(n));
  v[static_cast<Eigen::Index>(x)] = 1.0;
  basis.push_back(v);
  double estimate = std::numeric_limits<double>::infinity();
  Vec coeff;
  for (std::size_t j = 0; j < m_cap; ++j) {
    Vec w = apply_eigen(op, basis.back());
    alpha.push_back(basis.back().dot(w));
    orthogonalize(w, basis);
    const double b = w.norm();
    const bool breakdown = b < 1e-14 * std::max(1.0, std::abs(alpha.back()));
    const bool check = breakdown || j + 1 == m_cap || (j + 1) % 4 == 0;
    if (check) {
      const auto m = static_cast<Eigen::Index>(alpha.size());
      Eigen::MatrixXd tri = Eigen::MatrixXd::Zero(m, m);
      for (Eigen::Index i = 0; i < m; ++i) tri(i, i) = alpha[static_cast<std::size_t>(i)];
      for (Eigen::Index i = 0; i + 1 < m; ++i)
        tri(i, i + 1) = tri(i + 1, i) = beta[static_cast<std::size_t>(i)];
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> small(tri);
      Vec e1 = small.eigenvectors().row(0).transpose();
      for (Eigen::Index i = 0; i < m; ++i) e1[i] *= std::exp(-s * small.eigenvalues()[i]);
      coeff = small.eigenvectors() * e1;
      estimate = breakdown ? 0.0 : b * std::abs(coeff[m - 1]);
      if (estimate < 1e-14) break;
    }
    if (breakdown) break;
    beta.push_back(b);
    basis.push_back(w / b);
  }
  if (estimate >= 1e-14 && basis.size() < n)
    throw ConvergenceError("exp_action: Krylov approximation did not converge", estimate);
  Vec out = Vec::Zero(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < coeff.size(); ++i) out += coeff[i] * basis[static_cast<std::size_t>(i)];
  return to_std(out);
}

std::vector<double> heat_kernel_column(const SparseSymmetricOperator& op, std::size_t x, double t,
                                       HeatMethod method) {
  if (op.lattice_dim() <= 0) throw std::invalid_argument("heat_kernel: operator carries no lattice dimension");
  return exp_action(op, x, t / (2.0 * op.lattice_dim()), method);
}

double heat_kernel_diag(const SparseSymmetricOperator& op, std::size_t x, double t, HeatMethod method) {
  return heat_kernel_column(op, x, t, method)[x];
}

}  // namespace perclap
