#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

#include "oracles.hpp"
#include "perclap/lattice.hpp"
#include "perclap/rng.hpp"

using namespace perclap;

namespace {

std::size_t ipow(std::size_t b, int e) {
  std::size_t r = 1;
  for (int i = 0; i < e; ++i) r *= b;
  return r;
}

}  // namespace

TEST_CASE("edge counts follow the closed forms") {
  for (int d = 1; d <= 3; ++d)
    for (int L = 1; L <= 6; ++L) {
      const auto Ls = static_cast<std::size_t>(L);
      const std::size_t free_count = static_cast<std::size_t>(d) * ipow(Ls, d - 1) * (Ls - 1);
      CHECK(BoxGeometry(d, L, Topology::free).edge_count() == free_count);
      const std::size_t torus = L >= 3 ? static_cast<std::size_t>(d) * ipow(Ls, d) : free_count;
      CHECK(BoxGeometry(d, L, Topology::periodic).edge_count() == torus);
      CHECK(enumerate_edges(BoxGeometry(d, L, Topology::periodic)).size() == torus);
    }
}

TEST_CASE("invalid geometries are rejected") {
  CHECK_THROWS_AS(BoxGeometry(0, 4, Topology::free), std::invalid_argument);
  CHECK_THROWS_AS(BoxGeometry(2, 0, Topology::free), std::invalid_argument);
  CHECK_THROWS_AS(parse_topology("torus-ish"), std::invalid_argument);
  CHECK(parse_topology("periodic") == Topology::periodic);
}

TEST_CASE("edges join lattice neighbours exactly once") {
  for (auto topo : {Topology::free, Topology::periodic})
    for (int d = 1; d <= 3; ++d) {
      const BoxGeometry g(d, 4, topo);
      const auto edges = enumerate_edges(g);
      std::set<std::pair<std::uint32_t, std::uint32_t>> seen;
      for (std::size_t i = 0; i < edges.size(); ++i) {
        const auto ca = g.coordinates(edges[i].a), cb = g.coordinates(edges[i].b);
        int differing = 0, axis = -1;
        for (int a = 0; a < d; ++a)
          if (ca[static_cast<std::size_t>(a)] != cb[static_cast<std::size_t>(a)]) {
            ++differing;
            axis = a;
          }
        REQUIRE(differing == 1);
        const int delta = (cb[static_cast<std::size_t>(axis)] - ca[static_cast<std::size_t>(axis)] + 4) % 4;
        CHECK(delta == 1);
        CHECK(g.forward_edge(edges[i].a, axis) == i);
        const auto key = std::minmax(edges[i].a, edges[i].b);
        CHECK(seen.insert({key.first, key.second}).second);
      }
    }
}

TEST_CASE("boundary degree counts lattice edges leaving the box") {
  const BoxGeometry g(2, 5, Topology::free);
  CHECK(g.boundary_degree(g.index(std::vector<int>{0, 0})) == 2);
  CHECK(g.boundary_degree(g.index(std::vector<int>{0, 2})) == 1);
  CHECK(g.boundary_degree(g.index(std::vector<int>{2, 2})) == 0);
  CHECK(g.boundary_degree(g.index(std::vector<int>{4, 4})) == 2);
  const BoxGeometry t(2, 5, Topology::periodic);
  for (std::size_t v = 0; v < t.volume(); ++v) CHECK(t.boundary_degree(v) == 0);
  // Every vertex has 2d lattice edges: in-box degree plus boundary degree.
  const BoxGeometry c(3, 3, Topology::free);
  const auto full = uniform_configuration(c, true);
  const auto edges = enumerate_edges(c);
  std::vector<int> deg(c.volume(), 0);
  for (const auto& e : edges) ++deg[e.a], ++deg[e.b];
  for (std::size_t v = 0; v < c.volume(); ++v) CHECK(deg[v] + c.boundary_degree(v) == 6);
}

TEST_CASE("sampling is deterministic and Bernoulli") {
  const BoxGeometry g(2, 40, Topology::periodic);
  const auto a = sample_configuration(g, 0.37, 99);
  const auto b = sample_configuration(g, 0.37, 99);
  CHECK(a.occupation == b.occupation);
  CHECK(sample_configuration(g, 0.37, 100).occupation != a.occupation);
  CHECK(sample_configuration(g, 0.0, 5).open_count() == 0);
  CHECK(sample_configuration(g, 1.0, 5).open_count() == g.edge_count());
  // Open fraction within 5 binomial standard deviations.
  const double n = static_cast<double>(g.edge_count());
  const double sd = std::sqrt(n * 0.37 * 0.63);
  CHECK(std::abs(static_cast<double>(a.open_count()) - 0.37 * n) < 5 * sd);
  CHECK_THROWS_AS(sample_configuration(g, 1.5, 1), std::invalid_argument);
}

TEST_CASE("occupation hex and json round trip") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 20; ++trial) {
    const int L = 2 + static_cast<int>(gen() % 6);
    const auto topo = gen() % 2 ? Topology::free : Topology::periodic;
    const BoxGeometry g(1 + static_cast<int>(gen() % 3), L, topo);
    const auto config = sample_configuration(g, 0.5, gen());
    const auto hex = occupation_to_hex(config.occupation);
    CHECK(occupation_from_hex(hex, g.edge_count()) == config.occupation);
    const auto back = configuration_from_json(to_json(config));
    CHECK(back.geometry == g);
    CHECK(back.occupation == config.occupation);
    CHECK(back.seed == config.seed);
  }
  // Edge 8k+j lives at bit j of byte k, high nibble first.
  std::vector<std::uint8_t> occ(12, 0);
  occ[0] = 1;
  occ[9] = 1;
  CHECK(occupation_to_hex(occ) == "0102");
}

TEST_CASE("cluster decomposition matches union-find") {
  std::mt19937_64 gen(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const auto topo = trial % 2 ? Topology::free : Topology::periodic;
    const int d = 1 + trial % 3;
    const int L = d == 3 ? 4 : 7;
    const BoxGeometry g(d, L, topo);
    const double p = std::uniform_real_distribution<double>(0.0, 1.0)(gen);
    const auto config = sample_configuration(g, p, gen());
    const auto decomp = cluster_decomposition(config);
    CHECK(decomp.component_count == oracle::union_find_components(config));
    const auto roots = oracle::union_find_roots(config);
    // Same partition: labels agree exactly when roots agree.
    std::map<std::size_t, std::uint32_t> root_to_label;
    for (std::size_t v = 0; v < g.volume(); ++v) {
      auto [it, inserted] = root_to_label.emplace(roots[v], decomp.labels[v]);
      CHECK(it->second == decomp.labels[v]);
    }
    std::size_t total = 0;
    for (auto s : decomp.sizes) total += s;
    CHECK(total == g.volume());
    // Cluster ids ordered by smallest member.
    const auto members = decomp.members();
    for (std::size_t c = 1; c < members.size(); ++c) CHECK(members[c - 1].front() < members[c].front());
  }
}

TEST_CASE("isolated vertices are the vertices without open edges") {
  const BoxGeometry g(2, 9, Topology::periodic);
  const auto config = sample_configuration(g, 0.4, 11);
  const auto edges = enumerate_edges(g);
  std::vector<int> deg(g.volume(), 0);
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (config.is_open(e)) ++deg[edges[e].a], ++deg[edges[e].b];
  const auto isolated = static_cast<std::size_t>(std::count(deg.begin(), deg.end(), 0));
  CHECK(cluster_decomposition(config).isolated_count == isolated);
  const auto stats = cluster_statistics(cluster_decomposition(config));
  CHECK(stats.isolated_density == doctest::Approx(static_cast<double>(isolated) / 81.0));
}

TEST_CASE("spanning and wrapping clusters") {
  SUBCASE("full boxes span") {
    for (auto topo : {Topology::free, Topology::periodic}) {
      const auto decomp = cluster_decomposition(uniform_configuration(BoxGeometry(2, 6, topo), true));
      CHECK(decomp.component_count == 1);
      CHECK(decomp.spanning_ids.size() == 1);
      const auto proxy = percolating_proxy(decomp);
      REQUIRE(proxy);
      CHECK(proxy->genuine);
    }
  }
  SUBCASE("empty boxes have no genuine proxy") {
    const auto decomp = cluster_decomposition(uniform_configuration(BoxGeometry(2, 6, Topology::periodic), false));
    CHECK(decomp.spanning_ids.empty());
    CHECK_FALSE(percolating_proxy(decomp)->genuine);
  }
  SUBCASE("a closed ring wraps, an open path does not") {
    const BoxGeometry g(2, 5, Topology::periodic);
    std::vector<std::size_t> ring;
    for (int x = 0; x < 5; ++x) ring.push_back(*g.forward_edge(g.index(std::vector<int>{x, 2}), 0));
    auto decomp = cluster_decomposition(oracle::with_open_edges(g, ring));
    CHECK(decomp.spanning_ids.size() == 1);
    ring.pop_back();
    decomp = cluster_decomposition(oracle::with_open_edges(g, ring));
    CHECK(decomp.spanning_ids.empty());
  }
  SUBCASE("free boxes: a straight crossing spans") {
    const BoxGeometry g(2, 5, Topology::free);
    std::vector<std::size_t> path;
    for (int x = 0; x < 4; ++x) path.push_back(*g.forward_edge(g.index(std::vector<int>{x, 1}), 0));
    CHECK(cluster_decomposition(oracle::with_open_edges(g, path)).spanning_ids.size() == 1);
    path.pop_back();
    CHECK(cluster_decomposition(oracle::with_open_edges(g, path)).spanning_ids.empty());
  }
}

TEST_CASE("split seeds give distinct reproducible streams") {
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(split_seed(42, i));
  CHECK(seen.size() == 1000);
  CHECK(split_seed(42, 3) == split_seed(42, 3));
  CHECK(split_seed(42, 3) != split_seed(43, 3));
  SplitMix64 a(5), b(5);
  for (int i = 0; i < 100; ++i) CHECK(a() == b());
  SplitMix64 u(1);
  double mean = 0.0;
  for (int i = 0; i < 100000; ++i) mean += u.exponential();
  CHECK(mean / 100000 == doctest::Approx(1.0).epsilon(0.02));
}
