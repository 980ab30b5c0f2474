#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "perclap/operators.hpp"

using namespace perclap;

namespace {

Configuration random_config(std::mt19937_64& gen, int d, int L, Topology topo) {
  const double p = std::uniform_real_distribution<double>(0.05, 0.95)(gen);
  return sample_configuration(BoxGeometry(d, L, topo), p, gen());
}

double max_abs_difference(const oracle::Matrix& a, const oracle::Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a.size(); ++j) worst = std::max(worst, std::abs(a[i][j] - b[i][j]));
  return worst;
}

}  // namespace

TEST_CASE("Laplacian entries follow the definitions") {
  std::mt19937_64 gen(1);
  for (int trial = 0; trial < 30; ++trial) {
    const int d = 1 + trial % 3;
    const auto config = random_config(gen, d, 4, trial % 2 ? Topology::free : Topology::periodic);
    const auto edges = enumerate_edges(config.geometry);
    std::vector<double> deg(config.geometry.volume(), 0.0);
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (config.is_open(e)) deg[edges[e].a] += 1, deg[edges[e].b] += 1;
    const auto n = oracle::dense(assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction));
    const auto t = oracle::dense(assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction));
    const auto dd = oracle::dense(assemble_laplacian(config, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction));
    for (std::size_t x = 0; x < deg.size(); ++x) {
      CHECK(n[x][x] == deg[x]);
      CHECK(t[x][x] == 2.0 * d);
      CHECK(dd[x][x] == 4.0 * d - deg[x]);
      double row = 0.0;
      for (std::size_t y = 0; y < deg.size(); ++y) row += n[x][y];
      CHECK(row == 0.0);
    }
    for (std::size_t e = 0; e < edges.size(); ++e) {
      const double expected = config.is_open(e) ? -1.0 : 0.0;
      CHECK(n[edges[e].a][edges[e].b] == expected);
      CHECK(t[edges[e].a][edges[e].b] == expected);
      CHECK(dd[edges[e].b][edges[e].a] == expected);
    }
  }
}

TEST_CASE("neumann_boundary restriction") {
  const BoxGeometry g(2, 4, Topology::free);
  const auto config = sample_configuration(g, 0.5, 3);
  const auto h = assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::neumann_boundary);
  for (std::size_t v = 0; v < g.volume(); ++v) CHECK(h.diagonal()[v] == 4.0 - g.boundary_degree(v));
  CHECK(h.off_diagonal().size() == config.open_count());
  CHECK_THROWS_AS(assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::neumann_boundary),
                  std::invalid_argument);
  CHECK_THROWS_AS(assemble_laplacian(config, BoundaryCondition::dirichlet, RestrictionScheme::neumann_boundary),
                  std::invalid_argument);
}

TEST_CASE("quadratic forms match the edge sums") {
  std::mt19937_64 gen(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto config = random_config(gen, 2, 5, Topology::periodic);
    const auto edges = enumerate_edges(config.geometry);
    const auto phi = oracle::random_vector(gen, config.geometry.volume());
    double dirichlet_form = 0.0, cross = 0.0, mass = 0.0;
    for (std::size_t e = 0; e < edges.size(); ++e)
      if (config.is_open(e)) {
        const double a = phi[edges[e].a], b = phi[edges[e].b];
        dirichlet_form += (a - b) * (a - b);
        cross += a * b;
      }
    for (double x : phi) mass += x * x;
    const auto n = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto t = assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction);
    CHECK(n.quadratic_form(phi) == doctest::Approx(dirichlet_form).epsilon(1e-12));
    CHECK(t.quadratic_form(phi) == doctest::Approx(4.0 * mass - 2.0 * cross).epsilon(1e-12));
  }
}

TEST_CASE("operator ordering N <= Dtilde <= D on random vectors") {
  std::mt19937_64 gen(3);
  double worst = 0.0;
  for (int trial = 0; trial < 20; ++trial) {
    const auto config = random_config(gen, 2, 6, trial % 2 ? Topology::free : Topology::periodic);
    const auto n = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto t = assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction);
    const auto dd = assemble_laplacian(config, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction);
    for (int k = 0; k < 100; ++k) {
      const auto phi = oracle::random_vector(gen, config.geometry.volume());
      const double qn = n.quadratic_form(phi), qt = t.quadratic_form(phi), qd = dd.quadratic_form(phi);
      worst = std::max({worst, qn - qt, qt - qd});
    }
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("apply agrees with the dense product") {
  std::mt19937_64 gen(4);
  const auto config = random_config(gen, 3, 3, Topology::periodic);
  const auto op = assemble_laplacian(config, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction);
  const auto a = oracle::dense(op);
  const auto phi = oracle::random_vector(gen, op.size());
  const auto y = perclap::apply(op, phi);
  for (std::size_t i = 0; i < op.size(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < op.size(); ++j) s += a[i][j] * phi[j];
    CHECK(y[i] == doctest::Approx(s).epsilon(1e-13));
  }
  CHECK_THROWS_AS(perclap::apply(op, std::vector<double>(op.size() + 1)), std::invalid_argument);
}

TEST_CASE("parity conjugation is the unitary involution between the Laplacians") {
  std::mt19937_64 gen(5);
  for (int trial = 0; trial < 20; ++trial) {
    const int d = 1 + trial % 3;
    const auto config = random_config(gen, d, 4, trial % 2 ? Topology::free : Topology::periodic);
    const auto& g = config.geometry;
    const auto n = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto t = assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction);
    const auto dd = assemble_laplacian(config, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction);
    auto reflect = [&](const SparseSymmetricOperator& op) {
      auto a = oracle::dense(op);
      for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < a.size(); ++j) a[i][j] = (i == j ? 4.0 * d : 0.0) - a[i][j];
      return a;
    };
    CHECK(max_abs_difference(oracle::dense(conjugate_by_parity(n, g)), reflect(dd)) == 0.0);
    CHECK(max_abs_difference(oracle::dense(conjugate_by_parity(t, g)), reflect(t)) == 0.0);
  }
}

TEST_CASE("perturbation family interpolates between the full cube and H_Lambda") {
  std::mt19937_64 gen(6);
  const BoxGeometry g(2, 5, Topology::free);
  const auto config = sample_configuration(g, 0.6, gen());
  const auto h0 = oracle::dense(full_cube_operator(g));
  const auto h1 = oracle::dense(assemble_laplacian(config, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::neumann_boundary));
  CHECK(max_abs_difference(oracle::dense(perturbation_family(config, 0.0)), h0) == 0.0);
  CHECK(max_abs_difference(oracle::dense(perturbation_family(config, 1.0)), h1) == 0.0);
  const auto half = oracle::dense(perturbation_family(config, 0.5));
  for (std::size_t i = 0; i < half.size(); ++i)
    for (std::size_t j = 0; j < half.size(); ++j) CHECK(half[i][j] == doctest::Approx(0.5 * (h0[i][j] + h1[i][j])));
  // Full cube: zero row sums (Neumann conditions at the box boundary).
  for (const auto& row : h0) {
    double s = 0.0;
    for (double x : row) s += x;
    CHECK(s == 0.0);
  }
  CHECK_THROWS_AS(perturbation_family(config, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(perturbation_family(sample_configuration(BoxGeometry(2, 5, Topology::periodic), 0.5, 1), 0.5),
                  std::invalid_argument);
}

TEST_CASE("slope at zero is twice the closed-edge density") {
  std::mt19937_64 gen(7);
  for (int trial = 0; trial < 50; ++trial) {
    const BoxGeometry g(2, 2 + trial % 6, Topology::free);
    const auto config = sample_configuration(g, 0.5, gen());
    std::size_t closed = 0;
    for (auto o : config.occupation) closed += o == 0;
    CHECK(closed_edge_count(config) == closed);
    CHECK(slope_at_zero(config) == 2.0 * static_cast<double>(closed) / static_cast<double>(g.volume()));
  }
}

TEST_CASE("principal submatrix keeps the selected block") {
  const BoxGeometry g(2, 4, Topology::periodic);
  const auto config = sample_configuration(g, 0.5, 8);
  const auto op = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
  const std::vector<std::uint32_t> keep{1, 4, 5, 9, 15};
  const auto sub = oracle::dense(op.principal_submatrix(keep));
  const auto full = oracle::dense(op);
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t j = 0; j < keep.size(); ++j) CHECK(sub[i][j] == full[keep[i]][keep[j]]);
}

TEST_CASE("triplet export lists diagonal and upper entries") {
  const BoxGeometry g(1, 3, Topology::free);
  const auto op = assemble_laplacian(uniform_configuration(g, true), BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
  std::ostringstream os;
  write_triplets(os, op);
  const std::string text = os.str();
  CHECK(text.find("0 0 1\n") != std::string::npos);
  CHECK(text.find("1 1 2\n") != std::string::npos);
  CHECK(text.find("0 1 -1\n") != std::string::npos);
  CHECK(text.find("1 2 -1\n") != std::string::npos);
}
