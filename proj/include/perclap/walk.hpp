#pragma once

// Continuous-time simple random walk generated by the Neumann Laplacian:
// rate-one exponential clock, uniform proposal among the 2d lattice
// directions, jump only across open edges.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "perclap/ids.hpp"
#include "perclap/lattice.hpp"
#include "perclap/rng.hpp"

namespace perclap {

/// Target of each of the 2d proposals per vertex; a closed edge, or a step
/// off a free box, maps a vertex to itself.
class WalkTable {
 public:
  explicit WalkTable(const Configuration& config);

  std::size_t volume() const { return volume_; }
  int directions() const { return directions_; }
  std::uint32_t target(std::size_t vertex, int direction) const {
    return table_[vertex * static_cast<std::size_t>(directions_) + static_cast<std::size_t>(direction)];
  }
  bool isolated(std::size_t vertex) const { return isolated_[vertex] != 0; }

 private:
  std::size_t volume_ = 0;
  int directions_ = 2;
  std::vector<std::uint32_t> table_;
  std::vector<std::uint8_t> isolated_;
};

struct WalkParams {
  double t_max = 1.0;
  std::size_t n_walks = 1;
  std::size_t start = 0;
  std::uint64_t seed = 0;
};

struct WalkStep {
  double time = 0.0;
  std::uint32_t vertex = 0;
};

/// Position at each of the (non-decreasing) observation times. Random draws
/// are consumed as: waiting time, direction, waiting time, direction, ...
std::vector<std::uint32_t> observe_walk(const WalkTable& table, std::size_t start,
                                        std::span<const double> times, SplitMix64& gen,
                                        std::vector<WalkStep>* trace = nullptr);

/// Final vertex of one walk run to params.t_max from params.start, seeded
/// with params.seed. The optional trace records every jump (start at t = 0).
std::uint32_t simulate_walk(const Configuration& config, const WalkParams& params,
                            std::vector<WalkStep>* trace = nullptr);

/// Seed of walk `index` in a family seeded by `seed`.
inline std::uint64_t walk_seed(std::uint64_t seed, std::size_t index) {
  return split_seed(seed ^ kWalkStream, index);
}

struct ReturnEstimate {
  double t = 0.0;
  double probability = 0.0;
  double half_width = 0.0;  // 95% binomial
  double std_error = 0.0;
  std::size_t n_walks = 0;
  std::size_t excluded_samples = 0;
};

/// Frequency of Z_t = x over n_walks walks started at x.
ReturnEstimate return_probability(const Configuration& config, std::size_t x, double t, std::size_t n_walks,
                                  std::uint64_t seed, unsigned jobs = 1);

/// Same walks observed at every time of a non-decreasing list.
std::vector<ReturnEstimate> return_series(const Configuration& config, std::size_t x, std::span<const double> times,
                                          std::size_t n_walks, std::uint64_t seed, unsigned jobs = 1);

/// Number of walks from x that sit at each vertex at time t.
std::vector<std::size_t> landing_counts(const Configuration& config, std::size_t x, double t, std::size_t n_walks,
                                        std::uint64_t seed, unsigned jobs = 1);

struct AnnealedRequest {
  BoxGeometry geometry;
  double p = 0.0;
  std::vector<double> t_grid;  // increasing, > 0
  std::size_t configs = 1;
  std::size_t walks_per_config = 1;
  std::uint64_t master_seed = 0;
  unsigned jobs = 1;
};

/// Annealed return probability at walk time 2d*t. Configurations are the
/// IDS ensemble (same master seed, same index). Each walk starts at a
/// uniformly drawn vertex and counts only when that vertex lies in the
/// percolating-cluster proxy; configurations without a genuine proxy count
/// zero and are reported as excluded.
LaplaceCurve annealed_return(const AnnealedRequest& request);

void write_csv(std::ostream& os, std::span<const ReturnEstimate> series);

}  // namespace perclap
