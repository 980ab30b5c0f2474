#pragma once

// Monte Carlo estimation of the integrated density of states, its zero-energy
// value, the percolating-cluster part and Laplace transforms.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "perclap/lattice.hpp"
#include "perclap/operators.hpp"

namespace perclap {

/// Which eigenvalues a curve counts. `infinite` restricts to the block of the
/// percolating-cluster proxy, `finite` to its complement.
enum class IdsPart { total, infinite, finite };

/// inertia: sparse LDL^T counting per grid point. dense: full eigensolve per
/// sample, which also keeps the eigenvalues for exact Laplace transforms.
enum class CountingMethod { inertia, dense };

std::string_view to_string(IdsPart part);
std::string_view to_string(CountingMethod method);
CountingMethod parse_counting_method(std::string_view text);

/// Configuration of sample `index` in the ensemble seeded by `master_seed`.
/// Shared by every estimator so that IDS and walk runs see the same disorder.
Configuration ensemble_configuration(const BoxGeometry& geometry, double p, std::uint64_t master_seed,
                                     std::size_t index);

struct IdsRequest {
  BoundaryCondition bc = BoundaryCondition::neumann;
  RestrictionScheme scheme = RestrictionScheme::graph_restriction;
  BoxGeometry geometry;
  double p = 0.0;
  std::vector<double> energy_grid;
  std::size_t samples = 1;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;
  CountingMethod method = CountingMethod::inertia;
};

struct IdsCurve {
  BoundaryCondition bc = BoundaryCondition::neumann;
  RestrictionScheme scheme = RestrictionScheme::graph_restriction;
  BoxGeometry geometry;
  double p = 0.0;
  IdsPart part = IdsPart::total;
  CountingMethod method = CountingMethod::inertia;
  std::vector<double> energy_grid;
  std::vector<double> values;
  std::vector<double> half_widths;  // 95%; NaN with fewer than two samples
  std::size_t samples = 0;
  std::uint64_t master_seed = 0;
  /// Samples without a spanning/wrapping cluster (infinite/finite parts only).
  std::size_t excluded_samples = 0;

  /// counts[s][i]: eigenvalues <= energy_grid[i] in sample s (empty for
  /// synthetic curves).
  std::vector<std::vector<std::size_t>> counts;
  /// Per-sample eigenvalues of the counted block (dense method only).
  std::vector<std::vector<double>> atoms;
};

/// A curve built from given values with no ensemble behind it (tests,
/// synthetic measures). Half-widths are zero.
IdsCurve synthetic_curve(std::vector<double> energy_grid, std::vector<double> values);

/// Validates a grid: non-empty, finite, strictly increasing.
void validate_energy_grid(std::span<const double> grid);

IdsCurve estimate_ids(const IdsRequest& request);

/// Neumann counting restricted to the proxy block (`infinite`) or to its
/// complement (`finite`). Samples without a genuine spanning/wrapping cluster
/// are counted in excluded_samples and contribute zero to the infinite part
/// (their whole box is finite). bc and scheme of the request are ignored.
IdsCurve estimate_ids_part(const IdsRequest& request, IdsPart part);

inline IdsCurve ids_infinite_part(const IdsRequest& request) {
  return estimate_ids_part(request, IdsPart::infinite);
}

struct ZeroModeReport {
  double nn_at_zero = 0.0;  // mean dim ker(Delta_N) / |Lambda|
  double component_density = 0.0;
  double isolated_density = 0.0;
  /// kappa + (1-p)^{2d} with kappa read as the density of all clusters.
  double formula_all_clusters = 0.0;
  /// Same with kappa read as the density of clusters with at least one edge.
  double formula_nontrivial_clusters = 0.0;
  std::size_t samples = 0;
  /// Samples where the kernel dimension differs from the component count.
  std::size_t mismatched_samples = 0;
};

ZeroModeReport zero_mode_density(const BoxGeometry& geometry, double p, std::size_t samples,
                                 std::uint64_t master_seed, unsigned jobs = 1);

enum class LaplaceProvenance { from_ids, from_walk };
std::string_view to_string(LaplaceProvenance provenance);

struct LaplaceCurve {
  std::vector<double> t_grid;
  std::vector<double> values;
  std::vector<double> half_widths;
  LaplaceProvenance provenance = LaplaceProvenance::from_ids;
  /// "atoms" (exact sum over sampled eigenvalues), "grid_midpoint" or
  /// "walk".
  std::string method;
  std::size_t samples = 0;
  std::size_t excluded_samples = 0;
};

/// Stieltjes integral of e^{-Et} against the curve's step measure.
LaplaceCurve laplace_transform(const IdsCurve& curve, std::span<const double> t_grid);

/// Grid reflected about 2d and shifted by the left-limit offset:
/// {4d - E - kLeftLimitOffset}, increasing. The offset has to exceed the
/// counting shift at every E <= 4d, otherwise the mirrored point would still
/// count an eigenvalue sitting exactly at 4d - E.
inline constexpr double kLeftLimitOffset = 1e-4;
std::vector<double> mirror_grid(std::span<const double> grid, int dim);

/// max_i |a(E_i) + b(4d - E_i - kLeftLimitOffset) - 1|; b must be sampled on
/// mirror_grid(a.energy_grid). graph_restriction curves only.
double symmetry_residual(const IdsCurve& a, const IdsCurve& b);

void write_csv(std::ostream& os, const IdsCurve& curve);
void write_csv(std::ostream& os, const LaplaceCurve& curve);
nlohmann::json to_json(const IdsCurve& curve);
nlohmann::json to_json(const LaplaceCurve& curve);

/// Eigenvalue counts of `op` at each grid energy; with the dense method the
/// eigenvalues are appended to `atoms` when it is non-null.
std::vector<std::size_t> block_counts(const SparseSymmetricOperator& op, std::span<const double> grid,
                                      CountingMethod method, std::vector<double>* atoms = nullptr);

/// Vertices of the proxy cluster and of the rest of the box, each increasing.
struct ProxySplit {
  bool genuine = false;
  std::vector<std::uint32_t> proxy;
  std::vector<std::uint32_t> rest;
};

ProxySplit split_by_proxy(const ClusterDecomposition& decomp);

}  // namespace perclap
