#pragma once

// Boxes in Z^d, canonical edge indexing, Bernoulli bond sampling and exact
// cluster decomposition.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace perclap {

enum class Topology { free, periodic };

std::string_view to_string(Topology topology);
Topology parse_topology(std::string_view text);

/// A box {0..L-1}^d with vertices indexed row-major (last axis fastest).
///
/// Periodic boxes with L <= 2 carry no wraparound edges: for L = 2 the wrap
/// edge would duplicate the interior one, for L = 1 it would be a loop. Such
/// boxes therefore have the same edge set as the free box.
class BoxGeometry {
 public:
  BoxGeometry() = default;
  BoxGeometry(int dim, int side, Topology topology);

  int dim() const { return dim_; }
  int side() const { return side_; }
  Topology topology() const { return topology_; }

  std::size_t volume() const { return volume_; }
  std::size_t edge_count() const { return edges_per_axis() * static_cast<std::size_t>(dim_); }
  std::size_t edges_per_axis() const;

  /// True when the box has wraparound edges (periodic and L >= 3).
  bool wraps() const { return topology_ == Topology::periodic && side_ >= 3; }

  /// Index increment for a unit step along `axis`.
  std::size_t stride(int axis) const { return strides_[static_cast<std::size_t>(axis)]; }
  int coordinate(std::size_t vertex, int axis) const {
    return static_cast<int>((vertex / stride(axis)) % static_cast<std::size_t>(side_));
  }
  std::vector<int> coordinates(std::size_t vertex) const;
  std::size_t index(std::span<const int> coords) const;

  /// Number of lattice edges joining `vertex` to the outside of the box.
  int boundary_degree(std::size_t vertex) const;

  /// Canonical index of the edge {v, v + e_axis}, or nullopt if the box has
  /// no such edge.
  std::optional<std::size_t> forward_edge(std::size_t vertex, int axis) const;
  /// Vertex v + e_axis (with wraparound where the box wraps), or nullopt.
  std::optional<std::size_t> forward_neighbor(std::size_t vertex, int axis) const;

  friend bool operator==(const BoxGeometry&, const BoxGeometry&) = default;

 private:
  int dim_ = 1;
  int side_ = 1;
  Topology topology_ = Topology::free;
  std::size_t volume_ = 1;
  std::vector<std::size_t> strides_{1};
};

struct Edge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  friend bool operator==(const Edge&, const Edge&) = default;
};

/// Axis-major, then row-major base vertex. Edge i of the result has index i.
std::vector<Edge> enumerate_edges(const BoxGeometry& geometry);

/// One bond-percolation realisation restricted to a box.
struct Configuration {
  BoxGeometry geometry;
  std::vector<std::uint8_t> occupation;  // 1 = open, by canonical edge index
  double p = 0.0;
  std::uint64_t seed = 0;

  std::size_t open_count() const;
  bool is_open(std::size_t edge) const { return occupation[edge] != 0; }
};

/// Each edge open independently with probability p, edge by edge in
/// canonical order from one SplitMix64 stream seeded with `seed`.
Configuration sample_configuration(const BoxGeometry& geometry, double p,
                                   std::uint64_t seed);

/// Deterministic all-open or all-closed configuration.
Configuration uniform_configuration(const BoxGeometry& geometry, bool open);

/// Occupation as lowercase hex: byte k holds edges 8k..8k+7 (edge 8k+j at
/// bit j), bytes in increasing order, high nibble first.
std::string occupation_to_hex(std::span<const std::uint8_t> occupation);
std::vector<std::uint8_t> occupation_from_hex(std::string_view hex, std::size_t edge_count);

nlohmann::json to_json(const Configuration& config);
Configuration configuration_from_json(const nlohmann::json& j);

struct ClusterDecomposition {
  std::vector<std::uint32_t> labels;  // vertex -> cluster id
  std::vector<std::size_t> sizes;     // cluster id -> vertex count
  std::size_t component_count = 0;
  std::size_t isolated_count = 0;
  std::uint32_t largest_id = 0;  // smallest id among the largest clusters
  /// Clusters touching two opposite faces (free) or wrapping around the
  /// torus (periodic boxes that wrap). Sorted.
  std::vector<std::uint32_t> spanning_ids;
  std::size_t volume() const { return labels.size(); }
  /// Vertex lists per cluster, each increasing.
  std::vector<std::vector<std::uint32_t>> members() const;
};

/// Exact components over open edges. Cluster ids are assigned in order of
/// each cluster's smallest vertex, so they depend only on the configuration.
ClusterDecomposition cluster_decomposition(const Configuration& config);

struct ClusterStatistics {
  double component_density = 0.0;
  double isolated_density = 0.0;
  std::map<std::size_t, std::size_t> size_histogram;  // size -> cluster count
  double giant_fraction = 0.0;
};

ClusterStatistics cluster_statistics(const ClusterDecomposition& decomp);

/// Finite-box surrogate for the infinite cluster: the largest spanning or
/// wrapping cluster when one exists (`genuine`), else the largest cluster.
struct PercolatingProxy {
  std::uint32_t cluster = 0;
  bool genuine = false;
};

std::optional<PercolatingProxy> percolating_proxy(const ClusterDecomposition& decomp);

}  // namespace perclap
