#pragma once

// Reference computations that share no code with the library: cyclic Jacobi
// eigenvalues, union-find components, Fourier and chain closed forms.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <numeric>
#include <random>
#include <vector>

#include "perclap/lattice.hpp"
#include "perclap/operators.hpp"

namespace oracle {

using Matrix = std::vector<std::vector<double>>;

inline Matrix dense(const perclap::SparseSymmetricOperator& op) {
  const std::size_t n = op.size();
  Matrix a(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) a[i][i] = op.diagonal()[i];
  for (const auto& e : op.off_diagonal()) {
    a[e.row][e.col] += e.value;
    a[e.col][e.row] += e.value;
  }
  return a;
}

/// Cyclic Jacobi rotations until the off-diagonal mass vanishes.
inline std::vector<double> jacobi_eigenvalues(Matrix a) {
  const std::size_t n = a.size();
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a[i][j] * a[i][j];
    if (off < 1e-30) break;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) {
        if (std::abs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
      }
  }
  std::vector<double> ev(n);
  for (std::size_t i = 0; i < n; ++i) ev[i] = a[i][i];
  std::sort(ev.begin(), ev.end());
  return ev;
}

/// Sorted spectrum of the adjacency Laplacian of the full periodic box (L >= 3).
inline std::vector<double> fourier_torus_spectrum(int d, int L) {
  std::vector<double> one(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) one[static_cast<std::size_t>(k)] = 2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * k / L);
  std::vector<double> out{0.0};
  for (int a = 0; a < d; ++a) {
    std::vector<double> next;
    for (double x : out)
      for (double y : one) next.push_back(x + y);
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Sorted spectrum of the Neumann Laplacian of the full free box.
inline std::vector<double> free_cube_spectrum(int d, int L) {
  std::vector<double> one(static_cast<std::size_t>(L));
  for (int k = 0; k < L; ++k) one[static_cast<std::size_t>(k)] = 2.0 - 2.0 * std::cos(std::numbers::pi * k / L);
  std::vector<double> out{0.0};
  for (int a = 0; a < d; ++a) {
    std::vector<double> next;
    for (double x : out)
      for (double y : one) next.push_back(x + y);
    out = std::move(next);
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct UnionFind {
  std::vector<std::size_t> parent;
  explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) { parent[find(a)] = find(b); }
};

/// Root per vertex from union-find over open edges.
inline std::vector<std::size_t> union_find_roots(const perclap::Configuration& config) {
  const auto edges = perclap::enumerate_edges(config.geometry);
  UnionFind uf(config.geometry.volume());
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (config.is_open(e)) uf.unite(edges[e].a, edges[e].b);
  std::vector<std::size_t> roots(config.geometry.volume());
  for (std::size_t v = 0; v < roots.size(); ++v) roots[v] = uf.find(v);
  return roots;
}

inline std::size_t union_find_components(const perclap::Configuration& config) {
  auto roots = union_find_roots(config);
  std::sort(roots.begin(), roots.end());
  return static_cast<std::size_t>(std::unique(roots.begin(), roots.end()) - roots.begin());
}

inline std::vector<double> random_vector(std::mt19937_64& gen, std::size_t n) {
  std::normal_distribution<double> normal;
  std::vector<double> v(n);
  for (auto& x : v) x = normal(gen);
  return v;
}

/// Configuration from an explicit list of open edge indices.
inline perclap::Configuration with_open_edges(const perclap::BoxGeometry& g, const std::vector<std::size_t>& open) {
  auto config = perclap::uniform_configuration(g, false);
  for (std::size_t e : open) config.occupation[e] = 1;
  return config;
}

/// d = 2 free box of side L with every edge inside [0,rows) x [0,cols) open:
/// one cluster of rows * cols vertices, everything else isolated.
inline perclap::Configuration rectangle_cluster(int L, int rows, int cols) {
  const perclap::BoxGeometry g(2, L, perclap::Topology::free);
  auto config = perclap::uniform_configuration(g, false);
  const auto edges = perclap::enumerate_edges(g);
  auto inside = [&](std::size_t v) { return g.coordinate(v, 0) < rows && g.coordinate(v, 1) < cols; };
  for (std::size_t e = 0; e < edges.size(); ++e)
    if (inside(edges[e].a) && inside(edges[e].b)) config.occupation[e] = 1;
  return config;
}

}  // namespace oracle
