#include "perclap/lattice.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

#include "perclap/rng.hpp"

namespace perclap {

std::string_view to_string(Topology topology) {
  return topology == Topology::free ? "free" : "periodic";
}

Topology parse_topology(std::string_view text) {
  if (text == "free") return Topology::free;
  if (text == "periodic") return Topology::periodic;
  throw std::invalid_argument("unknown topology '" + std::string(text) +
                              "' (expected free or periodic)");
}

BoxGeometry::BoxGeometry(int dim, int side, Topology topology)
    : dim_(dim), side_(side), topology_(topology) {
  if (dim < 1) throw std::invalid_argument("BoxGeometry: dimension must be >= 1");
  if (side < 1) throw std::invalid_argument("BoxGeometry: side must be >= 1");
  strides_.assign(static_cast<std::size_t>(dim), 1);
  volume_ = 1;
  for (int axis = dim - 1; axis >= 0; --axis) {
    strides_[static_cast<std::size_t>(axis)] = volume_;
    if (volume_ > std::numeric_limits<std::uint32_t>::max() / static_cast<std::size_t>(side))
      throw std::invalid_argument("BoxGeometry: volume exceeds 32-bit vertex indices");
    volume_ *= static_cast<std::size_t>(side);
  }
}

std::size_t BoxGeometry::edges_per_axis() const {
  if (wraps()) return volume_;
  return volume_ / static_cast<std::size_t>(side_) * static_cast<std::size_t>(side_ - 1);
}

std::vector<int> BoxGeometry::coordinates(std::size_t vertex) const {
  std::vector<int> coords(static_cast<std::size_t>(dim_));
  for (int axis = 0; axis < dim_; ++axis) coords[static_cast<std::size_t>(axis)] = coordinate(vertex, axis);
  return coords;
}

std::size_t BoxGeometry::index(std::span<const int> coords) const {
  if (coords.size() != static_cast<std::size_t>(dim_))
    throw std::invalid_argument("BoxGeometry::index: wrong number of coordinates");
  std::size_t v = 0;
  for (int axis = 0; axis < dim_; ++axis) {
    const int c = coords[static_cast<std::size_t>(axis)];
    if (c < 0 || c >= side_) throw std::out_of_range("BoxGeometry::index: coordinate outside box");
    v += static_cast<std::size_t>(c) * stride(axis);
  }
  return v;
}

int BoxGeometry::boundary_degree(std::size_t vertex) const {
  if (topology_ == Topology::periodic) return 0;
  int b = 0;
  for (int axis = 0; axis < dim_; ++axis) {
    const int c = coordinate(vertex, axis);
    if (c == 0) ++b;
    if (c == side_ - 1) ++b;
  }
  return b;
}

std::optional<std::size_t> BoxGeometry::forward_edge(std::size_t vertex, int axis) const {
  const auto a = static_cast<std::size_t>(axis);
  if (wraps()) return a * volume_ + vertex;
  if (coordinate(vertex, axis) == side_ - 1) return std::nullopt;
  // Row-major rank of the vertex inside the box whose extent along `axis`
  // is shortened to L - 1.
  std::size_t rank = 0;
  std::size_t reduced_stride = 1;
  for (int ax = dim_ - 1; ax >= 0; --ax) {
    rank += static_cast<std::size_t>(coordinate(vertex, ax)) * reduced_stride;
    reduced_stride *= static_cast<std::size_t>(ax == axis ? side_ - 1 : side_);
  }
  return a * edges_per_axis() + rank;
}

std::optional<std::size_t> BoxGeometry::forward_neighbor(std::size_t vertex, int axis) const {
  const int c = coordinate(vertex, axis);
  if (c < side_ - 1) return vertex + stride(axis);
  if (wraps()) return vertex - static_cast<std::size_t>(side_ - 1) * stride(axis);
  return std::nullopt;
}

std::vector<Edge> enumerate_edges(const BoxGeometry& geometry) {
  std::vector<Edge> edges;
  edges.reserve(geometry.edge_count());
  for (int axis = 0; axis < geometry.dim(); ++axis) {
    for (std::size_t v = 0; v < geometry.volume(); ++v) {
      if (auto w = geometry.forward_neighbor(v, axis)) {
        edges.push_back({static_cast<std::uint32_t>(v), static_cast<std::uint32_t>(*w)});
      }
    }
  }
  return edges;
}

std::size_t Configuration::open_count() const {
  return static_cast<std::size_t>(std::count(occupation.begin(), occupation.end(), std::uint8_t{1}));
}

Configuration sample_configuration(const BoxGeometry& geometry, double p, std::uint64_t seed) {
  if (!(p >= 0.0 && p <= 1.0))
    throw std::invalid_argument("sample_configuration: p must lie in [0, 1]");
  Configuration config{geometry, std::vector<std::uint8_t>(geometry.edge_count()), p, seed};
  SplitMix64 rng(seed);
  for (auto& bit : config.occupation) bit = rng.uniform() < p ? 1 : 0;
  return config;
}

Configuration uniform_configuration(const BoxGeometry& geometry, bool open) {
  return Configuration{geometry,
                       std::vector<std::uint8_t>(geometry.edge_count(), open ? 1 : 0),
                       open ? 1.0 : 0.0, 0};
}

std::string occupation_to_hex(std::span<const std::uint8_t> occupation) {
  static constexpr char kDigits[] = "0123456789abcdef";
  const std::size_t bytes = (occupation.size() + 7) / 8;
  std::string hex(2 * bytes, '0');
  for (std::size_t k = 0; k < bytes; ++k) {
    unsigned byte = 0;
    for (std::size_t j = 0; j < 8 && 8 * k + j < occupation.size(); ++j)
      if (occupation[8 * k + j]) byte |= 1u << j;
    hex[2 * k] = kDigits[byte >> 4];
    hex[2 * k + 1] = kDigits[byte & 0xf];
  }
  return hex;
}

std::vector<std::uint8_t> occupation_from_hex(std::string_view hex, std::size_t edge_count) {
  if (hex.size() != 2 * ((edge_count + 7) / 8))
    throw std::invalid_argument("occupation hex string has the wrong length");
  auto nibble = [](char c) -> unsigned {
    if (c >= '0' && c <= '9') return static_cast<unsigned>(c - '0');
    if (c >= 'a' && c <= 'f') return static_cast<unsigned>(c - 'a' + 10);
    if (c >= 'A' && c <= 'F') return static_cast<unsigned>(c - 'A' + 10);
    throw std::invalid_argument("occupation hex string contains a non-hex digit");
  };
  std::vector<std::uint8_t> occupation(edge_count);
  for (std::size_t k = 0; 2 * k < hex.size(); ++k) {
    const unsigned byte = nibble(hex[2 * k]) << 4 | nibble(hex[2 * k + 1]);
    for (std::size_t j = 0; j < 8; ++j) {
      const bool bit = (byte >> j) & 1u;
      if (8 * k + j < edge_count)
        occupation[8 * k + j] = bit ? 1 : 0;
      else if (bit)
        throw std::invalid_argument("occupation hex string sets padding bits");
    }
  }
  return occupation;
}

nlohmann::json to_json(const Configuration& config) {
  return {{"d", config.geometry.dim()},
          {"L", config.geometry.side()},
          {"topology", std::string(to_string(config.geometry.topology()))},
          {"p", config.p},
          {"seed", config.seed},
          {"occupation", occupation_to_hex(config.occupation)}};
}

Configuration configuration_from_json(const nlohmann::json& j) {
  BoxGeometry geometry(j.at("d").get<int>(), j.at("L").get<int>(),
                       parse_topology(j.at("topology").get<std::string>()));
  Configuration config;
  config.geometry = geometry;
  config.p = j.at("p").get<double>();
  config.seed = j.at("seed").get<std::uint64_t>();
  config.occupation = occupation_from_hex(j.at("occupation").get<std::string>(),
                                          geometry.edge_count());
  return config;
}

std::vector<std::vector<std::uint32_t>> ClusterDecomposition::members() const {
  std::vector<std::vector<std::uint32_t>> out(component_count);
  for (std::size_t c = 0; c < component_count; ++c) out[c].reserve(sizes[c]);
  for (std::size_t v = 0; v < labels.size(); ++v)
    out[labels[v]].push_back(static_cast<std::uint32_t>(v));
  return out;
}

ClusterDecomposition cluster_decomposition(const Configuration& config) {
  const BoxGeometry& g = config.geometry;
  const std::size_t n = g.volume();
  const int d = g.dim();
  constexpr std::uint32_t kUnset = std::numeric_limits<std::uint32_t>::max();

  ClusterDecomposition out;
  out.labels.assign(n, kUnset);

  const bool track_wrap = g.wraps();
  // Unwrapped coordinates, used to detect a cluster reaching a vertex by two
  // routes that differ by a full turn around the torus.
  std::vector<int> unwrapped(track_wrap ? n * static_cast<std::size_t>(d) : 0);
  std::vector<std::uint8_t> spans;
  std::vector<std::uint32_t> queue;
  queue.reserve(n);

  for (std::size_t root = 0; root < n; ++root) {
    if (out.labels[root] != kUnset) continue;
    const auto id = static_cast<std::uint32_t>(out.sizes.size());
    out.labels[root] = id;
    if (track_wrap)
      for (int a = 0; a < d; ++a) unwrapped[root * d + a] = g.coordinate(root, a);
    std::vector<std::uint8_t> low(static_cast<std::size_t>(d), 0), high(static_cast<std::size_t>(d), 0);
    bool wrapped = false;
    std::size_t size = 0;
    queue.clear();
    queue.push_back(static_cast<std::uint32_t>(root));
    for (std::size_t head = 0; head < queue.size(); ++head) {
      const std::size_t u = queue[head];
      ++size;
      for (int axis = 0; axis < d; ++axis) {
        const int c = g.coordinate(u, axis);
        if (c == 0) low[static_cast<std::size_t>(axis)] = 1;
        if (c == g.side() - 1) high[static_cast<std::size_t>(axis)] = 1;
        for (int dir : {+1, -1}) {
          std::optional<std::size_t> w, e;
          if (dir > 0) {
            w = g.forward_neighbor(u, axis);
            if (w) e = g.forward_edge(u, axis);
          } else {
            if (c > 0)
              w = u - g.stride(axis);
            else if (g.wraps())
              w = u + static_cast<std::size_t>(g.side() - 1) * g.stride(axis);
            if (w) e = g.forward_edge(*w, axis);
          }
          if (!w || !config.is_open(*e)) continue;
          if (out.labels[*w] == kUnset) {
            out.labels[*w] = id;
            if (track_wrap) {
              for (int a = 0; a < d; ++a) unwrapped[*w * d + a] = unwrapped[u * d + a];
              unwrapped[*w * d + axis] += dir;
            }
            queue.push_back(static_cast<std::uint32_t>(*w));
          } else if (track_wrap && !wrapped) {
            for (int a = 0; a < d; ++a) {
              const int expected = unwrapped[u * d + a] + (a == axis ? dir : 0);
              if (unwrapped[*w * d + a] != expected) wrapped = true;
            }
          }
        }
      }
    }
    out.sizes.push_back(size);
    bool spanning = false;
    if (track_wrap) {
      spanning = wrapped;
    } else if (g.side() >= 2) {
      for (int a = 0; a < d; ++a) spanning = spanning || (low[static_cast<std::size_t>(a)] && high[static_cast<std::size_t>(a)]);
    }
    spans.push_back(spanning ? 1 : 0);
  }

  out.component_count = out.sizes.size();
  out.isolated_count = static_cast<std::size_t>(std::count(out.sizes.begin(), out.sizes.end(), std::size_t{1}));
  out.largest_id = static_cast<std::uint32_t>(
      std::max_element(out.sizes.begin(), out.sizes.end()) - out.sizes.begin());
  for (std::size_t c = 0; c < spans.size(); ++c)
    if (spans[c]) out.spanning_ids.push_back(static_cast<std::uint32_t>(c));
  return out;
}

ClusterStatistics cluster_statistics(const ClusterDecomposition& decomp) {
  ClusterStatistics s;
  const double n = static_cast<double>(decomp.volume());
  s.component_density = static_cast<double>(decomp.component_count) / n;
  s.isolated_density = static_cast<double>(decomp.isolated_count) / n;
  for (std::size_t size : decomp.sizes) ++s.size_histogram[size];
  s.giant_fraction = decomp.sizes.empty() ? 0.0 : static_cast<double>(decomp.sizes[decomp.largest_id]) / n;
  return s;
}

std::optional<PercolatingProxy> percolating_proxy(const ClusterDecomposition& decomp) {
  if (decomp.component_count == 0) return std::nullopt;
  if (!decomp.spanning_ids.empty()) {
    std::uint32_t best = decomp.spanning_ids.front();
    for (std::uint32_t id : decomp.spanning_ids)
      if (decomp.sizes[id] > decomp.sizes[best]) best = id;
    return PercolatingProxy{best, true};
  }
  return PercolatingProxy{decomp.largest_id, false};
}

}  // namespace perclap
