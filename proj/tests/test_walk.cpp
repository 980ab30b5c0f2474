#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "oracles.hpp"
#include "perclap/spectral.hpp"
#include "perclap/walk.hpp"

using namespace perclap;

namespace {

SparseSymmetricOperator neumann(const Configuration& c) {
  return assemble_laplacian(c, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
}

bool within(double estimate, double exact, double std_error, double sigmas) {
  return std::abs(estimate - exact) <= sigmas * std_error + 1e-12;
}

}  // namespace

TEST_CASE("trivial walks stay put") {
  const auto empty = uniform_configuration(BoxGeometry(2, 5, Topology::periodic), false);
  for (std::uint64_t seed = 0; seed < 20; ++seed) CHECK(simulate_walk(empty, {10.0, 1, 7, seed}) == 7);
  const auto full = uniform_configuration(BoxGeometry(2, 5, Topology::periodic), true);
  CHECK(simulate_walk(full, {0.0, 1, 12, 3}) == 12);
  const auto r = return_probability(empty, 3, 5.0, 100, 1);
  CHECK(r.probability == 1.0);
  CHECK(r.half_width == 0.0);
  CHECK_THROWS_AS(simulate_walk(full, {1.0, 1, 25, 3}), std::out_of_range);
  CHECK_THROWS_AS(simulate_walk(full, {-1.0, 1, 0, 3}), std::invalid_argument);
}

TEST_CASE("trace follows open edges with increasing times") {
  const auto config = sample_configuration(BoxGeometry(2, 8, Topology::periodic), 0.6, 4);
  const auto edges = enumerate_edges(config.geometry);
  std::set<std::pair<std::uint32_t, std::uint32_t>> open;
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (config.is_open(e)) open.insert(std::minmax(edges[e].a, edges[e].b));
  std::vector<WalkStep> trace;
  const auto final_vertex = simulate_walk(config, {50.0, 1, 9, 17}, &trace);
  REQUIRE(!trace.empty());
  CHECK(trace.front().vertex == 9);
  CHECK(trace.back().vertex == final_vertex);
  for (std::size_t i = 1; i < trace.size(); ++i) {
    CHECK(trace[i].time > trace[i - 1].time);
    CHECK(trace[i].time <= 50.0);
    CHECK(open.count(std::minmax(trace[i - 1].vertex, trace[i].vertex)) == 1);
  }
}

TEST_CASE("dimer return probability matches the two-level closed form") {
  const BoxGeometry g(2, 3, Topology::free);
  const auto dimer = oracle::with_open_edges(g, {0});
  const auto x = enumerate_edges(g)[0].a;
  const auto r = return_probability(dimer, x, 5.0, 1000000, 2024);
  const double exact = 0.5 * (1.0 + std::exp(-2.5));
  CHECK(exact == doctest::Approx(0.5410).epsilon(1e-4));
  CHECK(within(r.probability, exact, r.std_error, 3.0));
}

TEST_CASE("return frequency on a 20-vertex cluster matches the heat kernel") {
  const auto config = oracle::rectangle_cluster(6, 4, 5);
  const auto op = neumann(config);
  const std::size_t x = config.geometry.index(std::vector<int>{1, 2});
  const auto r = return_probability(config, x, 3.0, 100000, 8);
  CHECK(within(r.probability, heat_kernel_diag(op, x, 3.0), r.std_error, 3.0));
}

TEST_CASE("long walks on a finite cluster become uniform") {
  const auto config = oracle::rectangle_cluster(6, 2, 3);  // m = 6
  const auto r = return_probability(config, 0, 500.0, 200000, 9);
  CHECK(within(r.probability, 1.0 / 6.0, r.std_error, 3.0));
}

TEST_CASE("landing frequencies follow the semigroup, conserve mass and stay in the cluster") {
  std::mt19937_64 gen(30);
  const auto config = sample_configuration(BoxGeometry(2, 10, Topology::periodic), 0.55, 12345);
  const auto op = neumann(config);
  const auto decomp = cluster_decomposition(config);
  int checked = 0;
  while (checked < 5) {
    const std::size_t x = gen() % op.size();
    if (decomp.sizes[decomp.labels[x]] < 3 || decomp.sizes[decomp.labels[x]] > 512) continue;
    const double t = std::uniform_real_distribution<double>(0.5, 8.0)(gen);
    const std::size_t walks = 100000;
    const auto counts = landing_counts(config, x, t, walks, gen());
    const auto exact = heat_kernel_column(op, x, t);
    std::size_t total = 0;
    for (std::size_t y = 0; y < counts.size(); ++y) {
      total += counts[y];
      if (counts[y] > 0) CHECK(decomp.labels[y] == decomp.labels[x]);
    }
    CHECK(total == walks);
    // A random target vertex in the same cluster.
    std::vector<std::size_t> same;
    for (std::size_t y = 0; y < counts.size(); ++y)
      if (decomp.labels[y] == decomp.labels[x]) same.push_back(y);
    const std::size_t y = same[gen() % same.size()];
    const double freq = static_cast<double>(counts[y]) / walks;
    const double se = std::sqrt(exact[y] * (1.0 - exact[y]) / walks);
    CHECK(within(freq, exact[y], se, 4.0));
    ++checked;
  }
}

TEST_CASE("annealed return on the full torus matches the Fourier product") {
  AnnealedRequest req;
  req.geometry = BoxGeometry(2, 32, Topology::periodic);
  req.p = 1.0;
  req.t_grid = {1.0, 4.0};
  req.configs = 1;
  req.walks_per_config = 200000;
  req.master_seed = 77;
  const auto curve = annealed_return(req);
  for (std::size_t j = 0; j < 2; ++j) {
    const double t = req.t_grid[j];
    double one = 0.0;
    for (int k = 0; k < 32; ++k) one += std::exp(-t * (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / 32))) / 32;
    const double exact = one * one;
    const double se = std::sqrt(exact * (1 - exact) / req.walks_per_config);
    CHECK(within(curve.values[j], exact, se, 3.0));
  }
  CHECK(curve.provenance == LaplaceProvenance::from_walk);
  CHECK(curve.excluded_samples == 0);
}

TEST_CASE("annealed return without a percolating cluster is zero") {
  AnnealedRequest req;
  req.geometry = BoxGeometry(2, 16, Topology::periodic);
  req.p = 0.0;
  req.t_grid = {1.0, 2.0};
  req.configs = 4;
  req.walks_per_config = 100;
  const auto curve = annealed_return(req);
  for (double v : curve.values) CHECK(v == 0.0);
  CHECK(curve.excluded_samples == 4);
}

TEST_CASE("annealed return runs the walk to time 2d t") {
  // Single configuration: expectation is (1/|Lambda|) sum over proxy x of <x|exp(-t Delta_N)|x>.
  AnnealedRequest req;
  req.geometry = BoxGeometry(2, 6, Topology::periodic);
  req.p = 0.75;
  req.t_grid = {0.5, 2.0};
  req.configs = 1;
  req.walks_per_config = 400000;
  req.master_seed = 5;
  const auto config = ensemble_configuration(req.geometry, req.p, req.master_seed, 0);
  const auto split = split_by_proxy(cluster_decomposition(config));
  REQUIRE(split.genuine);
  const auto op = neumann(config);
  const auto curve = annealed_return(req);
  for (std::size_t j = 0; j < 2; ++j) {
    double exact = 0.0;
    for (auto x : split.proxy) exact += exp_action(op, x, req.t_grid[j])[x] / 36.0;
    const double se = std::sqrt(exact * (1 - exact) / req.walks_per_config);
    CHECK(within(curve.values[j], exact, se, 4.0));
    // The unscaled exponent -t Delta/(2d) would give a clearly different number.
    double wrong = 0.0;
    for (auto x : split.proxy) wrong += heat_kernel_diag(op, x, req.t_grid[j]) / 36.0;
    CHECK_FALSE(within(curve.values[j], wrong, se, 4.0));
  }
}

TEST_CASE("walk estimates do not depend on the worker count") {
  const auto config = sample_configuration(BoxGeometry(2, 12, Topology::periodic), 0.7, 3);
  const std::vector<double> times{1.0, 2.0, 4.0};
  const auto a = return_series(config, 5, times, 5000, 99, 1);
  const auto b = return_series(config, 5, times, 5000, 99, 4);
  for (std::size_t j = 0; j < times.size(); ++j) CHECK(a[j].probability == b[j].probability);
  AnnealedRequest req;
  req.geometry = BoxGeometry(2, 16, Topology::periodic);
  req.p = 0.7;
  req.t_grid = {1.0, 3.0};
  req.configs = 6;
  req.walks_per_config = 300;
  req.jobs = 1;
  const auto one = annealed_return(req);
  req.jobs = 3;
  const auto three = annealed_return(req);
  CHECK(one.values == three.values);
  CHECK(one.half_widths == three.half_widths);
  std::ostringstream os;
  write_csv(os, a);
  CHECK(os.str().rfind("# perclap return_series v1\nt,probability,half_width,n\n1,", 0) == 0);
}
