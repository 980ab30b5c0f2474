#include "perclap/verify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <stdexcept>

#include "perclap/ids.hpp"
#include "perclap/rng.hpp"
#include "perclap/spectral.hpp"
#include "perclap/walk.hpp"

namespace perclap {

namespace {

MechanismReport make_report(std::string name, double violation, double tolerance) {
  MechanismReport r;
  r.name = std::move(name);
  r.worst_violation = violation;
  r.tolerance = tolerance;
  r.pass = violation <= tolerance;
  return r;
}

std::vector<double> sorted_spectrum(const SparseSymmetricOperator& op) { return full_spectrum(op).eigenvalues; }

double reflection_error(const std::vector<double>& a, const std::vector<double>& b, double top) {
  double worst = 0.0;
  const std::size_t n = a.size();
  for (std::size_t k = 0; k < n; ++k) worst = std::max(worst, std::abs(a[k] - (top - b[n - 1 - k])));
  return worst;
}

std::vector<Configuration> ensemble(const BoxGeometry& g, double p, std::uint64_t seed, std::size_t count) {
  std::vector<Configuration> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(ensemble_configuration(g, p, seed, i));
  return out;
}

/// Half the configurations on the free box, half on the torus.
std::vector<Configuration> mixed_ensemble(int dim, int side, double p, std::uint64_t seed, std::size_t count) {
  auto out = ensemble(BoxGeometry(dim, side, Topology::free), p, split_seed(seed, 0), count / 2);
  for (auto& c : ensemble(BoxGeometry(dim, side, Topology::periodic), p, split_seed(seed, 1), count - count / 2))
    out.push_back(std::move(c));
  return out;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i) g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

MechanismReport fit_in_range(std::string name, const FitReport& fit, double lo, double hi) {
  auto r = make_report(std::move(name), std::max({0.0, lo - fit.slope, fit.slope - hi}), 0.0);
  r.parameters = {{"range", {lo, hi}}};
  r.details = {{"fit", to_json(fit)}};
  return r;
}

/// Aggregate of per-configuration reports: pass iff at least `required`
/// of them pass.
MechanismReport aggregate(std::string name, const std::vector<MechanismReport>& reports, std::size_t required) {
  std::size_t passing = 0;
  double worst = 0.0;
  for (const auto& r : reports) {
    passing += r.pass;
    worst = std::max(worst, r.worst_violation);
  }
  const double shortfall = passing >= required ? 0.0 : static_cast<double>(required - passing);
  auto out = make_report(std::move(name), shortfall, 0.0);
  out.parameters = {{"configurations", reports.size()}, {"required_passing", required}};
  out.details = {{"passing", passing}, {"worst_single_violation", worst}};
  return out;
}

Configuration rectangle_cluster(int side, int rows, int cols) {
  const BoxGeometry g(2, side, Topology::free);
  auto c = uniform_configuration(g, false);
  const auto edges = enumerate_edges(g);
  auto inside = [&](std::size_t v) { return g.coordinate(v, 0) < rows && g.coordinate(v, 1) < cols; };
  for (std::size_t e = 0; e < edges.size(); ++e) c.occupation[e] = inside(edges[e].a) && inside(edges[e].b);
  return c;
}

struct Check {
  std::string name;
  std::function<MechanismReport()> run;
};

std::vector<Check> build_suite(const VerifyOptions& o) {
  const bool full = o.suite == "full";
  const std::uint64_t seed = o.master_seed;
  const unsigned jobs = o.jobs;
  const std::size_t seeds = full ? 100 : 20;
  std::vector<Check> checks;

  checks.push_back({"involution_duality", [=] {
                      auto r = involution_check(mixed_ensemble(2, 8, 0.5, split_seed(seed, 1), seeds), o.assemble);
                      r.parameters["d"] = 2;
                      r.parameters["L"] = 8;
                      return r;
                    }});
  checks.push_back({"spectrum_range", [=] {
                      return spectrum_range_check(mixed_ensemble(2, 8, 0.5, split_seed(seed, 1), seeds), o.assemble);
                    }});
  checks.push_back({"kernel_components", [=] {
                      return kernel_components_check(
                          ensemble(BoxGeometry(2, 10, Topology::periodic), 0.5, split_seed(seed, 2), seeds));
                    }});
  checks.push_back({"operator_ordering", [=] {
                      return ordering_check(mixed_ensemble(2, 8, 0.5, split_seed(seed, 3), full ? 20 : 6),
                                            full ? 1000 : 100, split_seed(seed, 4));
                    }});
  checks.push_back({"fourier_ids", [=] {
                      // Full torus: eigenvalues sum_i (2 - 2cos(2 pi k_i / L)).
                      const int L = 16;
                      IdsRequest req;
                      req.geometry = BoxGeometry(2, L, Topology::periodic);
                      req.p = 1.0;
                      for (int i = 0; i < 80; ++i) req.energy_grid.push_back(0.05 + 0.1 * i);
                      const auto curve = estimate_ids(req);
                      std::vector<double> ev;
                      for (int a = 0; a < L; ++a)
                        for (int b = 0; b < L; ++b)
                          ev.push_back(4.0 - 2.0 * std::cos(2.0 * std::numbers::pi * a / L) -
                                       2.0 * std::cos(2.0 * std::numbers::pi * b / L));
                      double worst = 0.0;
                      for (std::size_t i = 0; i < req.energy_grid.size(); ++i) {
                        const double e = req.energy_grid[i];
                        const auto count = std::count_if(ev.begin(), ev.end(), [&](double l) { return l <= e; });
                        worst = std::max(worst, std::abs(curve.values[i] - static_cast<double>(count) / (L * L)));
                      }
                      auto r = make_report("fourier_ids", worst, 1e-12);
                      r.parameters = {{"d", 2}, {"L", L}};
                      return r;
                    }});
  checks.push_back({"reflection_symmetry", [=] {
                      IdsRequest req;
                      req.bc = BoundaryCondition::pseudo_dirichlet;
                      req.geometry = BoxGeometry(2, 16, Topology::periodic);
                      req.p = 0.6;
                      req.samples = 4;
                      req.master_seed = split_seed(seed, 5);
                      req.jobs = jobs;
                      req.energy_grid = linear_grid(0.1, 7.9, 40);
                      const auto a = estimate_ids(req);
                      req.energy_grid = mirror_grid(a.energy_grid, 2);
                      const auto b = estimate_ids(req);
                      auto r = make_report("reflection_symmetry", symmetry_residual(a, b), 1e-12);
                      r.parameters = {{"bc", "pseudo_dirichlet"}, {"d", 2}, {"L", 16}, {"p", 0.6}, {"samples", 4}};
                      return r;
                    }});
  checks.push_back({"zero_modes", [=] {
                      const auto z = zero_mode_density(BoxGeometry(2, 32, Topology::periodic), 0.5, 10,
                                                       split_seed(seed, 6), jobs);
                      auto r = make_report("zero_modes", static_cast<double>(z.mismatched_samples), 0.0);
                      r.details = {{"nn_at_zero", z.nn_at_zero},
                                   {"component_density", z.component_density},
                                   {"formula_all_clusters", z.formula_all_clusters},
                                   {"formula_nontrivial_clusters", z.formula_nontrivial_clusters}};
                      return r;
                    }});
  checks.push_back({"walk_semigroup", [=] {
                      const auto cluster = rectangle_cluster(6, 4, 5);
                      const auto op =
                          assemble_laplacian(cluster, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
                      const std::size_t x = cluster.geometry.index(std::vector<int>{1, 2});
                      const std::vector<double> times{1.0, 3.0, 10.0};
                      const std::size_t walks = full ? 100000 : 20000;
                      const auto series = return_series(cluster, x, times, walks, split_seed(seed, 7), jobs);
                      double worst = 0.0;
                      nlohmann::json rows = nlohmann::json::array();
                      for (std::size_t j = 0; j < times.size(); ++j) {
                        const double exact = heat_kernel_diag(op, x, times[j]);
                        const double se = std::sqrt(exact * (1.0 - exact) / static_cast<double>(walks));
                        const double z = std::abs(series[j].probability - exact) / se;
                        worst = std::max(worst, z - 4.0);
                        rows.push_back({{"t", times[j]}, {"frequency", series[j].probability}, {"exact", exact}, {"z", z}});
                      }
                      auto r = make_report("walk_semigroup", std::max(worst, 0.0), 0.0);
                      r.parameters = {{"walks", walks}, {"sigmas", 4}};
                      r.details = {{"rows", rows}};
                      return r;
                    }});
  checks.push_back({"van_hove_d2", [=] {
                      IdsRequest req;
                      req.geometry = BoxGeometry(2, full ? 128 : 64, Topology::periodic);
                      req.p = 0.7;
                      req.samples = full ? 20 : 4;
                      req.master_seed = split_seed(seed, 8);
                      req.jobs = jobs;
                      req.energy_grid = {0.0};
                      for (double e : log_space(0.02, 0.2, 10)) req.energy_grid.push_back(e);
                      const auto curve = estimate_ids(req);
                      const double n0 = zero_mode_density(req.geometry, req.p, req.samples, req.master_seed, jobs).nn_at_zero;
                      return fit_in_range("van_hove_d2", fit_van_hove(curve, n0, {0.02, 0.2}), 0.7, 1.3);
                    }});
  checks.push_back({"heat_decay_d2", [=] {
                      AnnealedRequest req;
                      req.geometry = BoxGeometry(2, 128, Topology::periodic);
                      req.p = 0.7;
                      req.t_grid = log_space(8.0, 64.0, 7);
                      req.configs = full ? 20 : 4;
                      req.walks_per_config = 10000;
                      req.master_seed = split_seed(seed, 9);
                      req.jobs = jobs;
                      return fit_in_range("heat_decay_d2", fit_heat_decay(annealed_return(req), {8.0, 64.0}), -1.25,
                                          -0.75);
                    }});
  checks.push_back({"monotonicity", [=] {
                      std::vector<MechanismReport> rs;
                      const auto grid = linear_grid(0.0, 1.0, 21);
                      for (const auto& c : ensemble(BoxGeometry(2, 6, Topology::free), 0.5, split_seed(seed, 10), seeds))
                        rs.push_back(monotonicity_check(c, grid));
                      return aggregate("monotonicity", rs, rs.size());
                    }});
  checks.push_back({"linearization", [=] {
                      std::vector<MechanismReport> rs;
                      for (const auto& c : ensemble(BoxGeometry(2, 6, Topology::free), 0.5, split_seed(seed, 11), seeds))
                        rs.push_back(linearization_check(c));
                      return aggregate("linearization", rs, (rs.size() * 95 + 99) / 100);
                    }});
  checks.push_back({"slope_at_zero", [=] {
                      std::vector<MechanismReport> rs;
                      for (const auto& c : ensemble(BoxGeometry(2, 6, Topology::free), 0.5, split_seed(seed, 12), seeds))
                        rs.push_back(slope_check(c));
                      return aggregate("slope_at_zero", rs, rs.size());
                    }});
  checks.push_back({"slope_large_deviation", [=] {
                      const std::vector<int> sides = full ? std::vector<int>{4, 6, 8, 10} : std::vector<int>{2, 3, 4};
                      return slope_large_deviation(2, 0.5, 0.3, full ? 100000 : 20000, split_seed(seed, 13), sides, jobs);
                    }});
  checks.push_back({"gap_scaling", [=] {
                      const int sides[] = {4, 8, 16, 32};
                      return gap_scaling_check(2, sides);
                    }});
  checks.push_back({"dirichlet_cube_scaling", [=] {
                      const int sides[] = {4, 8, 16, 32};
                      auto r = fit_in_range("dirichlet_cube_scaling", dirichlet_cube_scaling(2, sides), -2.1, -1.9);
                      r.parameters["d"] = 2;
                      return r;
                    }});
  checks.push_back({"tauberian", [=] {
                      std::vector<MechanismReport> rs;
                      for (double delta : {0.5, 1.0, 1.5}) rs.push_back(tauberian_check(delta, 1.0));
                      auto r = aggregate("tauberian", rs, rs.size());
                      for (const auto& x : rs) r.details["reports"].push_back(to_json(x));
                      return r;
                    }});
  checks.push_back({"heaviside", [=] { return heaviside_check(10000, split_seed(seed, 14)); }});
  checks.push_back({"finite_cluster_tail", [=] {
                      const std::vector<double> energies{0.01, 0.05, 0.1};
                      return finite_cluster_tail_check(BoxGeometry(2, full ? 128 : 64, Topology::periodic), 0.7,
                                                       energies, full ? 50 : 10, split_seed(seed, 15), jobs);
                    }});
  checks.push_back({"implication_chain", [=] {
                      double beta = 0.0;
                      for (const auto& c : ensemble(BoxGeometry(2, 6, Topology::free), 0.9, split_seed(seed, 16), seeds))
                        beta = std::max(beta, linearization_check(c).details["beta_hat"].get<double>());
                      const std::vector<double> energies{0.003, 0.01, 0.02};
                      return implication_chain_check(2, 0.9, 0.09, beta, energies, full ? 500 : 200,
                                                     split_seed(seed, 17), jobs);
                    }});

  if (full) {
    checks.push_back({"involution_duality_d3", [=] {
                        return involution_check(mixed_ensemble(3, 4, 0.5, split_seed(seed, 20), 20), o.assemble);
                      }});
    checks.push_back({"kernel_components_d3", [=] {
                        return kernel_components_check(
                            ensemble(BoxGeometry(3, 6, Topology::periodic), 0.35, split_seed(seed, 21), 20));
                      }});
    checks.push_back({"dirichlet_cube_scaling_d3", [=] {
                        const int sides[] = {4, 6, 8, 12};
                        return fit_in_range("dirichlet_cube_scaling_d3", dirichlet_cube_scaling(3, sides), -2.1, -1.9);
                      }});
    checks.push_back({"gap_scaling_d3", [=] {
                        const int sides[] = {4, 6, 8, 10};
                        return gap_scaling_check(3, sides);
                      }});
    checks.push_back({"van_hove_d3", [=] {
                        IdsRequest req;
                        req.geometry = BoxGeometry(3, 32, Topology::periodic);
                        req.p = 0.35;
                        req.samples = 4;
                        req.master_seed = split_seed(seed, 22);
                        req.jobs = jobs;
                        req.energy_grid = {0.0};
                        for (double e : log_space(0.005, 0.05, 8)) req.energy_grid.push_back(e);
                        const auto curve = estimate_ids(req);
                        const double n0 =
                            zero_mode_density(req.geometry, req.p, req.samples, req.master_seed, jobs).nn_at_zero;
                        return fit_in_range("van_hove_d3", fit_van_hove(curve, n0, {0.005, 0.05}), 0.9, 2.1);
                      }});
    checks.push_back({"finite_cluster_tail_d3", [=] {
                        const std::vector<double> energies{0.01, 0.05, 0.1};
                        return finite_cluster_tail_check(BoxGeometry(3, 24, Topology::periodic), 0.35, energies, 5,
                                                         split_seed(seed, 23), jobs);
                      }});
  }
  return checks;
}

}  // namespace

MechanismReport involution_check(const std::vector<Configuration>& configs, const Assembler& assemble) {
  double worst_dn = 0.0, worst_tilde = 0.0;
  for (const auto& c : configs) {
    const double top = 4.0 * c.geometry.dim();
    const auto n = sorted_spectrum(assemble(c, BoundaryCondition::neumann, RestrictionScheme::graph_restriction));
    const auto d = sorted_spectrum(assemble(c, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction));
    const auto t =
        sorted_spectrum(assemble(c, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction));
    if (n.size() != d.size() || n.size() != t.size())
      throw std::runtime_error("involution_check: operator sizes differ");
    worst_dn = std::max(worst_dn, reflection_error(d, n, top));
    worst_tilde = std::max(worst_tilde, reflection_error(t, t, top));
  }
  auto r = make_report("involution_duality", std::max(worst_dn, worst_tilde), 1e-9);
  r.parameters = {{"configurations", configs.size()}};
  r.details = {{"dirichlet_vs_neumann", worst_dn}, {"pseudo_dirichlet_self", worst_tilde}};
  return r;
}

MechanismReport spectrum_range_check(const std::vector<Configuration>& configs, const Assembler& assemble) {
  double worst = 0.0;
  for (const auto& c : configs) {
    const double top = 4.0 * c.geometry.dim();
    for (auto bc : {BoundaryCondition::neumann, BoundaryCondition::pseudo_dirichlet, BoundaryCondition::dirichlet}) {
      const auto ev = sorted_spectrum(assemble(c, bc, RestrictionScheme::graph_restriction));
      worst = std::max({worst, -ev.front(), ev.back() - top});
    }
  }
  auto r = make_report("spectrum_range", std::max(worst, 0.0), 1e-9);
  r.parameters = {{"configurations", configs.size()}};
  return r;
}

MechanismReport kernel_components_check(const std::vector<Configuration>& configs) {
  std::size_t mismatched = 0;
  double worst = 0.0;
  for (const auto& c : configs) {
    const auto op = assemble_laplacian(c, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto kernel = count_below(op, 0.0);
    const auto components = cluster_decomposition(c).component_count;
    if (kernel != components) {
      ++mismatched;
      worst = std::max(worst, std::abs(static_cast<double>(kernel) - static_cast<double>(components)));
    }
  }
  auto r = make_report("kernel_components", worst, 0.0);
  r.parameters = {{"configurations", configs.size()}};
  r.details = {{"mismatched", mismatched}};
  return r;
}

MechanismReport ordering_check(const std::vector<Configuration>& configs, std::size_t vectors, std::uint64_t seed) {
  double worst = 0.0;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& c = configs[i];
    const auto n = assemble_laplacian(c, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
    const auto t = assemble_laplacian(c, BoundaryCondition::pseudo_dirichlet, RestrictionScheme::graph_restriction);
    const auto d = assemble_laplacian(c, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction);
    SplitMix64 gen(split_seed(seed, i));
    std::vector<double> phi(n.size());
    for (std::size_t v = 0; v < vectors; ++v) {
      double norm2 = 0.0;
      for (auto& x : phi) {
        x = 2.0 * gen.uniform() - 1.0;
        norm2 += x * x;
      }
      const double qn = n.quadratic_form(phi), qt = t.quadratic_form(phi), qd = d.quadratic_form(phi);
      worst = std::max({worst, (qn - qt) / norm2, (qt - qd) / norm2});
    }
  }
  auto r = make_report("operator_ordering", std::max(worst, 0.0), 1e-12);
  r.parameters = {{"configurations", configs.size()}, {"vectors", vectors}};
  return r;
}

std::vector<std::string> verify_check_names(const std::string& suite) {
  VerifyOptions o;
  o.suite = suite;
  std::vector<std::string> names;
  for (const auto& c : build_suite(o)) names.push_back(c.name);
  return names;
}

std::vector<MechanismReport> run_verify_suite(const VerifyOptions& options) {
  if (options.suite != "quick" && options.suite != "full")
    throw std::invalid_argument("verify suite must be quick or full");
  std::vector<MechanismReport> reports;
  for (const auto& check : build_suite(options)) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), check.name) == options.only.end())
      continue;
    auto r = check.run();
    r.name = check.name;
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace perclap
