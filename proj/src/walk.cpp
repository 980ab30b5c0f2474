#include "perclap/walk.hpp"

#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

#include "perclap/format.hpp"
#include "perclap/parallel.hpp"
#include "perclap/stats.hpp"

namespace perclap {

WalkTable::WalkTable(const Configuration& config)
    : volume_(config.geometry.volume()), directions_(2 * config.geometry.dim()) {
  const BoxGeometry& g = config.geometry;
  if (config.occupation.size() != g.edge_count())
    throw std::invalid_argument("WalkTable: occupation length does not match the edge count");
  const auto dirs = static_cast<std::size_t>(directions_);
  table_.resize(volume_ * dirs);
  isolated_.assign(volume_, 1);
  for (std::size_t v = 0; v < volume_; ++v)
    for (std::size_t k = 0; k < dirs; ++k) table_[v * dirs + k] = static_cast<std::uint32_t>(v);
  // Direction 2a is +e_a, 2a+1 is -e_a.
  for (std::size_t v = 0; v < volume_; ++v)
    for (int axis = 0; axis < g.dim(); ++axis) {
      const auto edge = g.forward_edge(v, axis);
      if (!edge || !config.is_open(*edge)) continue;
      const auto w = *g.forward_neighbor(v, axis);
      const auto a = static_cast<std::size_t>(axis);
      table_[v * dirs + 2 * a] = static_cast<std::uint32_t>(w);
      table_[w * dirs + 2 * a + 1] = static_cast<std::uint32_t>(v);
      isolated_[v] = 0;
      isolated_[w] = 0;
    }
}

std::vector<std::uint32_t> observe_walk(const WalkTable& table, std::size_t start, std::span<const double> times,
                                        SplitMix64& gen, std::vector<WalkStep>* trace) {
  if (start >= table.volume()) throw std::out_of_range("walk start vertex outside the box");
  std::vector<std::uint32_t> positions;
  positions.reserve(times.size());
  auto pos = static_cast<std::uint32_t>(start);
  if (trace) trace->push_back({0.0, pos});
  if (table.isolated(start)) {
    positions.assign(times.size(), pos);
    return positions;
  }
  const auto dirs = static_cast<std::uint64_t>(table.directions());
  double next = gen.exponential();
  for (double t : times) {
    while (next <= t) {
      const auto target = table.target(pos, static_cast<int>(gen.below(dirs)));
      if (target != pos) {
        pos = target;
        if (trace) trace->push_back({next, pos});
      }
      next += gen.exponential();
    }
    positions.push_back(pos);
  }
  return positions;
}

namespace {

void validate_times(std::span<const double> times) {
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i]) || times[i] < 0.0) throw std::invalid_argument("walk times must be finite and >= 0");
    if (i > 0 && times[i] < times[i - 1]) throw std::invalid_argument("walk times must be non-decreasing");
  }
}

}  // namespace

std::uint32_t simulate_walk(const Configuration& config, const WalkParams& params, std::vector<WalkStep>* trace) {
  const double horizon[] = {params.t_max};
  validate_times(horizon);
  const WalkTable table(config);
  SplitMix64 gen(params.seed);
  return observe_walk(table, params.start, horizon, gen, trace).front();
}

std::vector<ReturnEstimate> return_series(const Configuration& config, std::size_t x, std::span<const double> times,
                                          std::size_t n_walks, std::uint64_t seed, unsigned jobs) {
  validate_times(times);
  if (n_walks < 1) throw std::invalid_argument("n_walks must be at least 1");
  if (x >= config.geometry.volume()) throw std::out_of_range("walk start vertex outside the box");
  const WalkTable table(config);
  // One byte per (walk, time): did the walk sit at x?
  std::vector<std::uint8_t> hits(n_walks * times.size(), 0);
  parallel_for(n_walks, jobs, [&](std::size_t w) {
    SplitMix64 gen(walk_seed(seed, w));
    const auto pos = observe_walk(table, x, times, gen);
    for (std::size_t j = 0; j < times.size(); ++j) hits[w * times.size() + j] = pos[j] == x;
  });
  std::vector<ReturnEstimate> out;
  for (std::size_t j = 0; j < times.size(); ++j) {
    std::size_t returns = 0;
    for (std::size_t w = 0; w < n_walks; ++w) returns += hits[w * times.size() + j];
    ReturnEstimate e;
    e.t = times[j];
    e.n_walks = n_walks;
    e.probability = static_cast<double>(returns) / static_cast<double>(n_walks);
    e.std_error = std::sqrt(e.probability * (1.0 - e.probability) / static_cast<double>(n_walks));
    e.half_width = stats::binomial_half_width(e.probability, n_walks);
    out.push_back(e);
  }
  return out;
}

ReturnEstimate return_probability(const Configuration& config, std::size_t x, double t, std::size_t n_walks,
                                  std::uint64_t seed, unsigned jobs) {
  const double times[] = {t};
  return return_series(config, x, times, n_walks, seed, jobs).front();
}

std::vector<std::size_t> landing_counts(const Configuration& config, std::size_t x, double t, std::size_t n_walks,
                                        std::uint64_t seed, unsigned jobs) {
  const double times[] = {t};
  validate_times(times);
  const WalkTable table(config);
  std::vector<std::uint32_t> finals(n_walks);
  parallel_for(n_walks, jobs, [&](std::size_t w) {
    SplitMix64 gen(walk_seed(seed, w));
    finals[w] = observe_walk(table, x, times, gen).front();
  });
  std::vector<std::size_t> counts(config.geometry.volume(), 0);
  for (auto v : finals) ++counts[v];
  return counts;
}

LaplaceCurve annealed_return(const AnnealedRequest& request) {
  if (request.configs < 1 || request.walks_per_config < 1)
    throw std::invalid_argument("annealed_return: configs and walks_per_config must be at least 1");
  for (std::size_t j = 0; j < request.t_grid.size(); ++j)
    if (!(request.t_grid[j] > 0.0) || !std::isfinite(request.t_grid[j]) ||
        (j > 0 && !(request.t_grid[j] > request.t_grid[j - 1])))
      throw std::invalid_argument("annealed_return: t grid must be positive and strictly increasing");
  const double two_d = 2.0 * request.geometry.dim();
  std::vector<double> walk_times;
  for (double t : request.t_grid) walk_times.push_back(two_d * t);
  const std::size_t points = walk_times.size();
  const std::size_t n = request.geometry.volume();

  struct Slot {
    std::vector<std::size_t> returns;
    bool excluded = false;
  };
  std::vector<Slot> slots(request.configs);
  parallel_for(request.configs, request.jobs, [&](std::size_t c) {
    auto& slot = slots[c];
    slot.returns.assign(points, 0);
    const auto config = ensemble_configuration(request.geometry, request.p, request.master_seed, c);
    const auto decomp = cluster_decomposition(config);
    const auto proxy = percolating_proxy(decomp);
    if (!proxy || !proxy->genuine) {
      slot.excluded = true;
      return;
    }
    const WalkTable table(config);
    const std::uint64_t family = split_seed(request.master_seed, c);
    for (std::size_t w = 0; w < request.walks_per_config; ++w) {
      SplitMix64 gen(walk_seed(family, w));
      const auto start = static_cast<std::size_t>(gen.below(n));
      if (decomp.labels[start] != proxy->cluster) continue;
      const auto pos = observe_walk(table, start, walk_times, gen);
      for (std::size_t j = 0; j < points; ++j) slot.returns[j] += pos[j] == start;
    }
  });

  LaplaceCurve curve;
  curve.t_grid = request.t_grid;
  curve.provenance = LaplaceProvenance::from_walk;
  curve.method = "walk";
  curve.samples = request.configs;
  for (const auto& slot : slots) curve.excluded_samples += slot.excluded;
  const double walks = static_cast<double>(request.walks_per_config);
  std::vector<double> per_config(request.configs);
  for (std::size_t j = 0; j < points; ++j) {
    std::size_t total = 0;
    for (std::size_t c = 0; c < request.configs; ++c) {
      total += slots[c].returns[j];
      per_config[c] = static_cast<double>(slots[c].returns[j]) / walks;
    }
    const double value = static_cast<double>(total) / (walks * static_cast<double>(request.configs));
    curve.values.push_back(value);
    if (request.configs >= 2)
      curve.half_widths.push_back(stats::normal_half_width(stats::mean_sd(per_config)));
    else
      curve.half_widths.push_back(stats::binomial_half_width(value, request.walks_per_config));
  }
  return curve;
}

void write_csv(std::ostream& os, std::span<const ReturnEstimate> series) {
  os << "# perclap return_series v1\n";
  os << "t,probability,half_width,n\n";
  for (const auto& e : series)
    os << format_double(e.t) << ',' << format_double(e.probability) << ',' << format_double(e.half_width) << ','
       << e.n_walks << '\n';
}

}  // namespace perclap
