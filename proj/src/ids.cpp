#include "perclap/ids.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "perclap/format.hpp"
#include "perclap/parallel.hpp"
#include "perclap/rng.hpp"
#include "perclap/spectral.hpp"
#include "perclap/stats.hpp"

namespace perclap {

std::string_view to_string(IdsPart part) {
  switch (part) {
    case IdsPart::total: return "total";
    case IdsPart::infinite: return "infinite";
    case IdsPart::finite: return "finite";
  }
  return "?";
}

std::string_view to_string(CountingMethod method) {
  return method == CountingMethod::dense ? "dense" : "inertia";
}

CountingMethod parse_counting_method(std::string_view text) {
  if (text == "inertia") return CountingMethod::inertia;
  if (text == "dense") return CountingMethod::dense;
  throw std::invalid_argument("unknown counting method '" + std::string(text) + "' (expected inertia or dense)");
}

std::string_view to_string(LaplaceProvenance provenance) {
  return provenance == LaplaceProvenance::from_walk ? "from_walk" : "from_ids";
}

Configuration ensemble_configuration(const BoxGeometry& geometry, double p, std::uint64_t master_seed,
                                     std::size_t index) {
  return sample_configuration(geometry, p, split_seed(master_seed, index));
}

void validate_energy_grid(std::span<const double> grid) {
  if (grid.empty()) throw std::invalid_argument("energy grid is empty");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (!std::isfinite(grid[i])) throw std::invalid_argument("energy grid contains a non-finite value");
    if (i > 0 && !(grid[i] > grid[i - 1])) throw std::invalid_argument("energy grid must be strictly increasing");
  }
}

IdsCurve synthetic_curve(std::vector<double> energy_grid, std::vector<double> values) {
  validate_energy_grid(energy_grid);
  if (values.size() != energy_grid.size())
    throw std::invalid_argument("synthetic_curve: grid and values differ in length");
  IdsCurve curve;
  curve.energy_grid = std::move(energy_grid);
  curve.values = std::move(values);
  curve.half_widths.assign(curve.values.size(), 0.0);
  return curve;
}

std::vector<std::size_t> block_counts(const SparseSymmetricOperator& op, std::span<const double> grid,
                                      CountingMethod method, std::vector<double>* atoms) {
  std::vector<std::size_t> counts(grid.size(), 0);
  if (op.size() == 0) return counts;
  if (method == CountingMethod::dense) {
    auto spectrum = full_spectrum(op);
    for (std::size_t i = 0; i < grid.size(); ++i) counts[i] = count_at_most(spectrum.eigenvalues, grid[i]);
    if (atoms) atoms->insert(atoms->end(), spectrum.eigenvalues.begin(), spectrum.eigenvalues.end());
    return counts;
  }
  InertiaCounter counter(op);
  for (std::size_t i = 0; i < grid.size(); ++i) counts[i] = counter.count_below(grid[i]);
  return counts;
}

ProxySplit split_by_proxy(const ClusterDecomposition& decomp) {
  ProxySplit split;
  const auto proxy = percolating_proxy(decomp);
  split.genuine = proxy && proxy->genuine;
  for (std::size_t v = 0; v < decomp.volume(); ++v) {
    if (split.genuine && decomp.labels[v] == proxy->cluster)
      split.proxy.push_back(static_cast<std::uint32_t>(v));
    else
      split.rest.push_back(static_cast<std::uint32_t>(v));
  }
  return split;
}

namespace {

void validate_request(const IdsRequest& request) {
  if (request.samples < 1) throw std::invalid_argument("samples must be at least 1");
  if (!(request.p >= 0.0 && request.p <= 1.0)) throw std::invalid_argument("p must lie in [0, 1]");
  validate_energy_grid(request.energy_grid);
}

struct SampleResult {
  std::vector<std::size_t> counts;
  std::vector<double> atoms;
  bool excluded = false;
};

// Averages integer counts exactly (integer sums) and attaches half-widths.
void summarize(IdsCurve& curve, const std::vector<SampleResult>& results) {
  const std::size_t n = curve.geometry.volume();
  const std::size_t samples = results.size();
  const std::size_t points = curve.energy_grid.size();
  curve.values.assign(points, 0.0);
  curve.half_widths.assign(points, 0.0);
  std::vector<double> per_sample(samples);
  for (std::size_t i = 0; i < points; ++i) {
    std::uint64_t total = 0;
    bool identical = true;
    for (std::size_t s = 0; s < samples; ++s) {
      total += results[s].counts[i];
      per_sample[s] = static_cast<double>(results[s].counts[i]) / static_cast<double>(n);
      identical = identical && results[s].counts[i] == results[0].counts[i];
    }
    const double value = static_cast<double>(total) / (static_cast<double>(n) * static_cast<double>(samples));
    curve.values[i] = value;
    if (samples < 2) {
      curve.half_widths[i] = std::numeric_limits<double>::quiet_NaN();
    } else if (identical) {
      curve.half_widths[i] = 0.0;
    } else {
      const double edge = 5.0 / static_cast<double>(samples);
      if (value < edge || value > 1.0 - edge)
        curve.half_widths[i] = stats::wilson_half_width(value, samples);
      else
        curve.half_widths[i] = stats::normal_half_width(stats::mean_sd(per_sample));
    }
  }
  curve.counts.clear();
  curve.atoms.clear();
  curve.excluded_samples = 0;
  for (const auto& r : results) {
    curve.counts.push_back(r.counts);
    if (curve.method == CountingMethod::dense) curve.atoms.push_back(r.atoms);
    if (r.excluded) ++curve.excluded_samples;
  }
}

IdsCurve curve_header(const IdsRequest& request, IdsPart part) {
  IdsCurve curve;
  curve.bc = request.bc;
  curve.scheme = request.scheme;
  curve.geometry = request.geometry;
  curve.p = request.p;
  curve.part = part;
  curve.method = request.method;
  curve.energy_grid = request.energy_grid;
  curve.samples = request.samples;
  curve.master_seed = request.master_seed;
  return curve;
}

}  // namespace

IdsCurve estimate_ids(const IdsRequest& request) {
  validate_request(request);
  std::vector<SampleResult> results(request.samples);
  parallel_for(request.samples, request.jobs, [&](std::size_t s) {
    const auto config = ensemble_configuration(request.geometry, request.p, request.master_seed, s);
    const auto op = assemble_laplacian(config, request.bc, request.scheme);
    results[s].counts = block_counts(op, request.energy_grid, request.method, &results[s].atoms);
  });
  IdsCurve curve = curve_header(request, IdsPart::total);
  summarize(curve, results);
  return curve;
}

IdsCurve estimate_ids_part(const IdsRequest& request, IdsPart part) {
  if (part == IdsPart::total) return estimate_ids(request);
  validate_request(request);
  std::vector<SampleResult> results(request.samples);
  parallel_for(request.samples, request.jobs, [&](std::size_t s) {
    const auto config = ensemble_configuration(request.geometry, request.p, request.master_seed, s);
    const auto op = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto split = split_by_proxy(cluster_decomposition(config));
    results[s].excluded = !split.genuine;
    const auto& block = part == IdsPart::infinite ? split.proxy : split.rest;
    results[s].counts =
        block_counts(op.principal_submatrix(block), request.energy_grid, request.method, &results[s].atoms);
  });
  IdsRequest neumann = request;
  neumann.bc = BoundaryCondition::neumann;
  neumann.scheme = RestrictionScheme::graph_restriction;
  IdsCurve curve = curve_header(neumann, part);
  summarize(curve, results);
  return curve;
}

ZeroModeReport zero_mode_density(const BoxGeometry& geometry, double p, std::size_t samples,
                                 std::uint64_t master_seed, unsigned jobs) {
  if (samples < 1) throw std::invalid_argument("samples must be at least 1");
  struct Slot {
    std::size_t kernel = 0;
    std::size_t components = 0;
    std::size_t isolated = 0;
  };
  std::vector<Slot> slots(samples);
  parallel_for(samples, jobs, [&](std::size_t s) {
    const auto config = ensemble_configuration(geometry, p, master_seed, s);
    const auto op = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto decomp = cluster_decomposition(config);
    slots[s].kernel = count_below(op, 0.0);
    slots[s].components = decomp.component_count;
    slots[s].isolated = decomp.isolated_count;
  });
  ZeroModeReport report;
  report.samples = samples;
  std::uint64_t kernel = 0, components = 0, isolated = 0;
  for (const auto& slot : slots) {
    kernel += slot.kernel;
    components += slot.components;
    isolated += slot.isolated;
    if (slot.kernel != slot.components) ++report.mismatched_samples;
  }
  const double denom = static_cast<double>(geometry.volume()) * static_cast<double>(samples);
  report.nn_at_zero = static_cast<double>(kernel) / denom;
  report.component_density = static_cast<double>(components) / denom;
  report.isolated_density = static_cast<double>(isolated) / denom;
  const double isolated_probability = std::pow(1.0 - p, 2 * geometry.dim());
  report.formula_all_clusters = report.component_density + isolated_probability;
  report.formula_nontrivial_clusters = report.component_density - report.isolated_density + isolated_probability;
  return report;
}

LaplaceCurve laplace_transform(const IdsCurve& curve, std::span<const double> t_grid) {
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (!std::isfinite(t_grid[i]) || t_grid[i] < 0.0)
      throw std::invalid_argument("laplace_transform: times must be finite and >= 0");
    if (i > 0 && !(t_grid[i] > t_grid[i - 1]))
      throw std::invalid_argument("laplace_transform: time grid must be strictly increasing");
  }
  for (std::size_t i = 1; i < curve.values.size(); ++i)
    if (curve.values[i] < curve.values[i - 1])
      throw std::invalid_argument("laplace_transform: curve is not non-decreasing");

  LaplaceCurve out;
  out.t_grid.assign(t_grid.begin(), t_grid.end());
  out.provenance = LaplaceProvenance::from_ids;
  out.samples = curve.samples;
  out.excluded_samples = curve.excluded_samples;
  const double volume = static_cast<double>(curve.geometry.volume());
  const auto& grid = curve.energy_grid;

  // Per-sample transforms when the ensemble is available, so that the
  // half-width reflects sample-to-sample fluctuation.
  std::vector<std::vector<double>> per_sample;
  if (!curve.atoms.empty() && curve.atoms.size() == curve.counts.size()) {
    out.method = "atoms";
    for (const auto& atoms : curve.atoms) {
      std::vector<double> row(t_grid.size(), 0.0);
      for (std::size_t j = 0; j < t_grid.size(); ++j) {
        double sum = 0.0;
        for (double lambda : atoms) sum += std::exp(-lambda * t_grid[j]);
        row[j] = sum / volume;
      }
      per_sample.push_back(std::move(row));
    }
  } else {
    out.method = "grid_midpoint";
    auto midpoint = [&](auto value_at, double t) {
      double sum = value_at(0) * std::exp(-grid[0] * t);
      for (std::size_t i = 1; i < grid.size(); ++i)
        sum += (value_at(i) - value_at(i - 1)) * std::exp(-0.5 * (grid[i - 1] + grid[i]) * t);
      return sum;
    };
    if (!curve.counts.empty()) {
      for (const auto& counts : curve.counts) {
        std::vector<double> row(t_grid.size());
        for (std::size_t j = 0; j < t_grid.size(); ++j)
          row[j] = midpoint([&](std::size_t i) { return static_cast<double>(counts[i]) / volume; }, t_grid[j]);
        per_sample.push_back(std::move(row));
      }
    } else {
      for (double t : t_grid) out.values.push_back(midpoint([&](std::size_t i) { return curve.values[i]; }, t));
      out.half_widths.assign(t_grid.size(), 0.0);
      return out;
    }
  }
  std::vector<double> column(per_sample.size());
  for (std::size_t j = 0; j < t_grid.size(); ++j) {
    for (std::size_t s = 0; s < per_sample.size(); ++s) column[s] = per_sample[s][j];
    const auto ms = stats::mean_sd(column);
    out.values.push_back(ms.mean);
    out.half_widths.push_back(ms.n < 2 ? std::numeric_limits<double>::quiet_NaN() : stats::normal_half_width(ms));
  }
  return out;
}

std::vector<double> mirror_grid(std::span<const double> grid, int dim) {
  std::vector<double> out;
  out.reserve(grid.size());
  for (auto it = grid.rbegin(); it != grid.rend(); ++it) out.push_back(4.0 * dim - *it - kLeftLimitOffset);
  return out;
}

double symmetry_residual(const IdsCurve& a, const IdsCurve& b) {
  if (a.scheme != RestrictionScheme::graph_restriction || b.scheme != RestrictionScheme::graph_restriction)
    throw std::invalid_argument("symmetry_residual: both curves must use graph_restriction");
  const auto expected = mirror_grid(a.energy_grid, a.geometry.dim());
  if (b.energy_grid.size() != expected.size())
    throw std::invalid_argument("symmetry_residual: grid mismatch (different lengths)");
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (std::abs(b.energy_grid[i] - expected[i]) > 1e-12 * std::max(1.0, std::abs(expected[i])))
      throw std::invalid_argument("symmetry_residual: grid mismatch (b is not the mirror of a)");
  const std::size_t n = a.values.size();
  double worst = 0.0;
  for (std::size_t i = 0; i < n; ++i) worst = std::max(worst, std::abs(a.values[i] + b.values[n - 1 - i] - 1.0));
  return worst;
}

void write_csv(std::ostream& os, const IdsCurve& curve) {
  os << "# perclap ids_curve v1\n";
  os << "E,value,half_width\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    os << format_double(curve.energy_grid[i]) << ',' << format_double(curve.values[i]) << ','
       << format_double(curve.half_widths[i]) << '\n';
}

void write_csv(std::ostream& os, const LaplaceCurve& curve) {
  os << "# perclap laplace_curve v1\n";
  os << "t,value,half_width\n";
  for (std::size_t i = 0; i < curve.values.size(); ++i)
    os << format_double(curve.t_grid[i]) << ',' << format_double(curve.values[i]) << ','
       << format_double(curve.half_widths[i]) << '\n';
}

namespace {

// JSON has no NaN; missing half-widths become null.
nlohmann::json numbers(const std::vector<double>& values) {
  auto arr = nlohmann::json::array();
  for (double v : values) arr.push_back(std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr));
  return arr;
}

}  // namespace

nlohmann::json to_json(const IdsCurve& curve) {
  return {
      {"schema", "perclap.ids_curve/1"},
      {"bc", to_string(curve.bc)},
      {"scheme", to_string(curve.scheme)},
      {"d", curve.geometry.dim()},
      {"L", curve.geometry.side()},
      {"topology", to_string(curve.geometry.topology())},
      {"p", curve.p},
      {"part", to_string(curve.part)},
      {"method", to_string(curve.method)},
      {"samples", curve.samples},
      {"master_seed", curve.master_seed},
      {"excluded_samples", curve.excluded_samples},
      {"energy_grid", numbers(curve.energy_grid)},
      {"values", numbers(curve.values)},
      {"half_widths", numbers(curve.half_widths)},
  };
}

nlohmann::json to_json(const LaplaceCurve& curve) {
  return {
      {"schema", "perclap.laplace_curve/1"},
      {"provenance", to_string(curve.provenance)},
      {"method", curve.method},
      {"samples", curve.samples},
      {"excluded_samples", curve.excluded_samples},
      {"t_grid", numbers(curve.t_grid)},
      {"values", numbers(curve.values)},
      {"half_widths", numbers(curve.half_widths)},
  };
}

}  // namespace perclap
