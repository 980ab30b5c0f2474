#include "perclap/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/exp_sinh.hpp>

#include "perclap/operators.hpp"
#include "perclap/parallel.hpp"
#include "perclap/rng.hpp"
#include "perclap/spectral.hpp"
#include "perclap/stats.hpp"

namespace perclap {

namespace {

double json_safe(double v) { return std::isfinite(v) ? v : 0.0; }

void require_free(const Configuration& config, const char* what) {
  if (config.geometry.topology() != Topology::free)
    throw std::invalid_argument(std::string(what) + ": free topology required");
}

MechanismReport make_report(std::string name, double violation, double tolerance) {
  MechanismReport r;
  r.name = std::move(name);
  r.worst_violation = violation;
  r.tolerance = tolerance;
  r.pass = violation <= tolerance;
  return r;
}

double volume_scale(const BoxGeometry& g) {
  return std::pow(static_cast<double>(g.volume()), 2.0 / g.dim());
}

}  // namespace

std::vector<double> log_space(double lo, double hi, std::size_t n) {
  if (!(lo > 0.0) || !(hi >= lo) || n < 1) throw std::invalid_argument("log_space: need 0 < lo <= hi and n >= 1");
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  const double a = std::log(lo), b = std::log(hi);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
  out.front() = lo;
  out.back() = hi;
  return out;
}

nlohmann::json to_json(const FitReport& fit) {
  return {{"slope", fit.slope},
          {"intercept", fit.intercept},
          {"window", {fit.window.lo, fit.window.hi}},
          {"r_squared", fit.r_squared},
          {"n_points", fit.n_points},
          {"slope_stderr", fit.slope_stderr},
          {"dropped", fit.dropped}};
}

nlohmann::json to_json(const MechanismReport& report) {
  return {{"name", report.name},
          {"pass", report.pass},
          {"worst_violation", report.worst_violation},
          {"tolerance", report.tolerance},
          {"parameters", report.parameters},
          {"details", report.details}};
}

FitReport fit_log_log(std::span<const double> x, std::span<const double> y, FitWindow window) {
  if (x.size() != y.size()) throw std::invalid_argument("fit: abscissa and ordinate sizes differ");
  if (!(window.lo < window.hi)) throw std::invalid_argument("fit: window needs lo < hi");
  FitReport fit;
  fit.window = window;
  std::vector<double> lx, ly;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < window.lo || x[i] > window.hi) continue;
    if (!(x[i] > 0.0) || !(y[i] > 0.0) || !std::isfinite(y[i])) {
      fit.dropped.push_back(x[i]);
      continue;
    }
    fit.xs.push_back(x[i]);
    fit.ys.push_back(y[i]);
    lx.push_back(std::log(x[i]));
    ly.push_back(std::log(y[i]));
  }
  if (lx.size() < 3)
    throw std::invalid_argument("fit: fewer than three usable points in the window [" + std::to_string(window.lo) +
                                ", " + std::to_string(window.hi) + "]");
  const auto line = stats::least_squares(lx, ly);
  fit.slope = line.slope;
  fit.intercept = line.intercept;
  fit.r_squared = line.r_squared;
  fit.slope_stderr = line.slope_stderr;
  fit.n_points = line.n;
  return fit;
}

FitReport fit_van_hove(const IdsCurve& curve, double n0, FitWindow window) {
  std::vector<double> y(curve.values.size());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = curve.values[i] - n0;
  return fit_log_log(curve.energy_grid, y, window);
}

FitReport fit_lifshits(const IdsCurve& curve, FitWindow window) {
  std::vector<double> y(curve.values.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double v = curve.values[i];
    y[i] = (v > 0.0 && v < 1.0) ? -std::log(v) : std::numeric_limits<double>::quiet_NaN();
  }
  return fit_log_log(curve.energy_grid, y, window);
}

FitReport fit_heat_decay(const LaplaceCurve& curve, FitWindow window) {
  return fit_log_log(curve.t_grid, curve.values, window);
}

FitReport dirichlet_cube_scaling(int dim, std::span<const int> sides) {
  std::vector<double> x, y;
  for (int side : sides) {
    if (side < 2) throw std::invalid_argument("dirichlet_cube_scaling: sides must be >= 2");
    const auto cube = uniform_configuration(BoxGeometry(dim, side, Topology::free), true);
    x.push_back(side);
    y.push_back(bottom_eigenvalue(
        assemble_laplacian(cube, BoundaryCondition::dirichlet, RestrictionScheme::graph_restriction)));
  }
  if (x.empty()) throw std::invalid_argument("dirichlet_cube_scaling: no sides");
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  return fit_log_log(x, y, {*lo, *hi});
}

MechanismReport monotonicity_check(const Configuration& config, std::span<const double> t_grid) {
  require_free(config, "monotonicity_check");
  std::vector<double> energies;
  double worst = 0.0;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    if (i > 0 && !(t_grid[i] > t_grid[i - 1])) throw std::invalid_argument("monotonicity_check: grid must increase");
    energies.push_back(bottom_eigenvalue(perturbation_family(config, t_grid[i])));
    if (i > 0) worst = std::max(worst, energies[i - 1] - energies[i]);
  }
  auto r = make_report("monotonicity", worst, 1e-10);
  r.parameters = {{"d", config.geometry.dim()}, {"L", config.geometry.side()}, {"seed", config.seed},
                  {"t_grid", std::vector<double>(t_grid.begin(), t_grid.end())}};
  r.details = {{"energies", energies}};
  return r;
}

MechanismReport linearization_check(const Configuration& config) {
  require_free(config, "linearization_check");
  const double slope0 = slope_at_zero(config);
  const auto ts = log_space(1e-4, 1e-2, 9);
  const double scale = volume_scale(config.geometry);
  std::vector<double> residuals;
  double beta_hat = 0.0, largest = 0.0;
  for (double t : ts) {
    const double r = std::abs(bottom_eigenvalue(perturbation_family(config, t)) - t * slope0);
    residuals.push_back(r);
    largest = std::max(largest, r);
    beta_hat = std::max(beta_hat, r / (t * t * scale));
  }
  MechanismReport report;
  report.name = "linearization";
  report.tolerance = 0.0;
  report.parameters = {{"d", config.geometry.dim()}, {"L", config.geometry.side()}, {"seed", config.seed}};
  if (largest < 1e-14) {
    report.pass = true;
    report.details = {{"degenerate", true}, {"residuals", residuals}, {"beta_hat", 0.0}, {"order", nullptr}};
    return report;
  }
  double order = std::numeric_limits<double>::quiet_NaN();
  try {
    order = fit_log_log(ts, residuals, {ts.front(), ts.back()}).slope;
  } catch (const std::invalid_argument&) {
  }
  // Distance of the order from [1.8, 2.2]; an unfittable order counts as a
  // full unit off.
  const double off = std::isfinite(order) ? std::max({0.0, 1.8 - order, order - 2.2}) : 1.0;
  report.worst_violation = off;
  report.pass = off <= report.tolerance;
  report.details = {{"degenerate", false}, {"residuals", residuals}, {"t", ts}, {"beta_hat", beta_hat},
                    {"order", json_safe(order)}, {"slope_at_zero", slope0}};
  return report;
}

MechanismReport slope_check(const Configuration& config, double h) {
  require_free(config, "slope_check");
  const double closed_form = slope_at_zero(config);
  const auto counted = 2.0 * static_cast<double>(closed_edge_count(config)) /
                       static_cast<double>(config.geometry.volume());
  // <1, W 1> / |Lambda| with W = H(1) - H(0).
  const auto h1 = perturbation_family(config, 1.0);
  const auto h0 = full_cube_operator(config.geometry);
  const std::vector<double> ones(config.geometry.volume(), 1.0);
  const double expectation = (h1.quadratic_form(ones) - h0.quadratic_form(ones)) /
                             static_cast<double>(config.geometry.volume());
  const double e0 = bottom_eigenvalue(perturbation_family(config, 0.0));
  const double eh = bottom_eigenvalue(perturbation_family(config, h));
  const double difference = (eh - e0) / h;
  const double scale = std::max(std::abs(closed_form), 1e-6);
  const double violation = std::max({std::abs(difference - closed_form) / scale - 1e-3,
                                     std::abs(expectation - closed_form) / scale - 1e-12,
                                     closed_form == counted ? 0.0 : 1.0, 0.0});
  auto r = make_report("slope_at_zero", violation, 0.0);
  r.parameters = {{"d", config.geometry.dim()}, {"L", config.geometry.side()}, {"seed", config.seed}, {"h", h}};
  r.details = {{"closed_form", closed_form}, {"finite_difference", difference}, {"expectation", expectation},
               {"closed_edges", closed_edge_count(config)}};
  return r;
}

double slope_log_probability(int dim, int side, double p, double alpha) {
  const BoxGeometry g(dim, side, Topology::free);
  const auto m = static_cast<double>(g.edge_count());
  // E'(0) = 2K/|Lambda| <= alpha  <=>  K <= alpha |Lambda| / 2.
  const double kmax = std::floor(alpha * static_cast<double>(g.volume()) / 2.0 + 1e-9);
  if (kmax < 0.0) return -std::numeric_limits<double>::infinity();
  const double q = 1.0 - p;
  if (q <= 0.0) return 0.0;
  if (p <= 0.0) return kmax >= m ? 0.0 : -std::numeric_limits<double>::infinity();
  std::vector<double> terms;
  for (double k = 0; k <= std::min(kmax, m); k += 1.0)
    terms.push_back(std::lgamma(m + 1) - std::lgamma(k + 1) - std::lgamma(m - k + 1) + k * std::log(q) +
                    (m - k) * std::log(p));
  const double top = *std::max_element(terms.begin(), terms.end());
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - top);
  return top + std::log(sum);
}

MechanismReport slope_large_deviation(int dim, double p, double alpha, std::size_t samples,
                                      std::uint64_t master_seed, std::span<const int> sides, unsigned jobs) {
  if (!(alpha >= 0.0) || !(alpha < 1.0 - p))
    throw std::invalid_argument("slope_large_deviation: alpha must lie in [0, 1 - p)");
  if (samples < 1) throw std::invalid_argument("slope_large_deviation: samples must be at least 1");
  std::vector<int> ordered(sides.begin(), sides.end());
  std::sort(ordered.begin(), ordered.end());
  nlohmann::json rows = nlohmann::json::array();
  std::vector<double> log_freq;
  for (int side : ordered) {
    const BoxGeometry g(dim, side, Topology::free);
    std::vector<std::uint8_t> hit(samples, 0);
    parallel_for(samples, jobs, [&](std::size_t s) {
      hit[s] = slope_at_zero(ensemble_configuration(g, p, split_seed(master_seed, static_cast<std::uint64_t>(side)), s)) <=
               alpha + 1e-12;
    });
    std::size_t hits = 0;
    for (auto h : hit) hits += h;
    const double freq = static_cast<double>(hits) / static_cast<double>(samples);
    log_freq.push_back(hits > 0 ? std::log(freq) : -std::numeric_limits<double>::infinity());
    rows.push_back({{"side", side}, {"volume", g.volume()}, {"hits", hits}, {"frequency", freq},
                    {"exact_log_probability", json_safe(slope_log_probability(dim, side, p, alpha))}});
  }
  double worst = 0.0;
  bool any = false;
  double previous = 0.0;
  for (double lf : log_freq) {
    if (!std::isfinite(lf)) continue;
    if (any) worst = std::max(worst, lf - previous);
    previous = lf;
    any = true;
  }
  auto r = make_report("slope_large_deviation", worst, 0.0);
  r.parameters = {{"d", dim}, {"p", p}, {"alpha", alpha}, {"samples", samples}, {"master_seed", master_seed},
                  {"sides", ordered}};
  r.details = {{"rows", rows}, {"vacuous", !any}};
  return r;
}

MechanismReport gap_scaling_check(int dim, std::span<const int> sides) {
  std::vector<double> x, y;
  double worst_gap = 0.0;
  nlohmann::json rows = nlohmann::json::array();
  for (int side : sides) {
    const double gap = spectral_gap(BoxGeometry(dim, side, Topology::free));
    const double exact = 2.0 - 2.0 * std::cos(std::numbers::pi / side);
    worst_gap = std::max(worst_gap, std::abs(gap - exact));
    x.push_back(side);
    y.push_back(gap);
    rows.push_back({{"side", side}, {"gap", gap}, {"exact", exact}});
  }
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  const auto fit = fit_log_log(x, y, {*lo, *hi});
  const double violation = std::max({worst_gap - 1e-9, std::abs(fit.slope + 2.0) - 0.1, 0.0});
  auto r = make_report("gap_scaling", violation, 0.0);
  r.parameters = {{"d", dim}, {"sides", std::vector<int>(sides.begin(), sides.end())}};
  r.details = {{"rows", rows}, {"max_gap_error", worst_gap}, {"fit", to_json(fit)}};
  return r;
}

MechanismReport tauberian_check(double delta, double t0) {
  if (!(delta > 0.0) || !(t0 > 0.0)) throw std::invalid_argument("tauberian_check: need delta > 0 and t0 > 0");
  boost::math::quadrature::exp_sinh<double> integrator;
  // mu~(t) = int e^{-tE} dmu(E) = t int_0^inf E^delta e^{-tE} dE.
  auto transform = [&](double t) {
    return t * integrator.integrate([&](double e) { return std::pow(e, delta) * std::exp(-t * e); });
  };
  const auto ts = log_space(t0, 1e4 * t0, 41);
  std::vector<double> mu;
  double c_l = std::numeric_limits<double>::infinity(), c_u = 0.0, quad_error = 0.0;
  const double gamma = std::tgamma(delta + 1.0);
  for (double t : ts) {
    const double v = transform(t);
    mu.push_back(v);
    const double scaled = v * std::pow(t, delta);
    c_l = std::min(c_l, scaled);
    c_u = std::max(c_u, scaled);
    quad_error = std::max(quad_error, std::abs(v / (gamma * std::pow(t, -delta)) - 1.0));
  }
  const double exponent = fit_log_log(ts, mu, {ts.front(), ts.back()}).slope;

  // Upper constant from Theta(1-x) <= e^{1-x}; lower constant from
  // Theta(1-x) >= e^{-tau x} - e^{-(tau-1)} e^{-x}, maximised over tau >= 1.
  const double C_u = std::numbers::e * c_u;
  double C_l = -std::numeric_limits<double>::infinity(), best_tau = 1.0;
  for (double tau = 1.0; tau <= 200.0; tau += 0.01) {
    const double v = c_l * std::pow(tau, -delta) - std::exp(1.0 - tau) * c_u;
    if (v > C_l) {
      C_l = v;
      best_tau = tau;
    }
  }
  double inequality = 0.0;
  for (double e : log_space(1e-6 / t0, 1.0 / t0, 61)) {
    const double m = std::pow(e, delta);
    inequality = std::max({inequality, C_l * m - m, m - C_u * m});
  }
  const double violation = std::max({inequality, quad_error - 1e-2, std::abs(exponent + delta) - 1e-3,
                                     C_l > 0.0 ? 0.0 : 1.0, 0.0});
  auto r = make_report("tauberian", violation, 0.0);
  r.parameters = {{"delta", delta}, {"t0", t0}};
  r.details = {{"c_l", c_l},          {"c_u", c_u},           {"C_l", C_l},
               {"C_u", C_u},          {"tau", best_tau},      {"quadrature_relative_error", quad_error},
               {"exponent", exponent}, {"gamma", gamma}};
  return r;
}

MechanismReport heaviside_check(std::size_t samples, std::uint64_t seed) {
  SplitMix64 gen(seed);
  std::size_t violations = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    // x spread over [0, 20] with extra mass near the jump at 1.
    const double x = (i % 2 == 0) ? 20.0 * gen.uniform() : 2.0 * gen.uniform();
    const double tau = 1.0 + 50.0 * gen.uniform();
    const double step = x <= 1.0 ? 1.0 : 0.0;
    const double lower = std::exp(-tau * x) - std::exp(-(tau - 1.0)) * std::exp(-x);
    const double upper = std::exp(1.0 - x);
    const double v = std::max(lower - step, step - upper);
    if (v > 0.0) ++violations;
    worst = std::max(worst, v);
  }
  auto r = make_report("heaviside", worst, 0.0);
  r.parameters = {{"samples", samples}, {"seed", seed}};
  r.details = {{"violations", violations}};
  return r;
}

MechanismReport finite_cluster_tail_check(const BoxGeometry& geometry, double p, std::span<const double> energies,
                                          std::size_t samples, std::uint64_t master_seed, unsigned jobs) {
  validate_energy_grid(energies);
  if (samples < 1) throw std::invalid_argument("finite_cluster_tail_check: samples must be at least 1");
  std::vector<double> grid{0.0};
  for (double e : energies) {
    if (!(e > 0.0)) throw std::invalid_argument("finite_cluster_tail_check: energies must be positive");
    grid.push_back(e);
  }
  const double n = static_cast<double>(geometry.volume());
  const int d = geometry.dim();
  struct Row {
    std::vector<double> increment, bound;
  };
  std::vector<Row> rows(samples);
  parallel_for(samples, jobs, [&](std::size_t s) {
    const auto config = ensemble_configuration(geometry, p, master_seed, s);
    const auto decomp = cluster_decomposition(config);
    const auto split = split_by_proxy(decomp);
    const auto proxy_label = split.genuine ? decomp.labels[split.proxy.front()] : std::uint32_t(-1);
    auto& row = rows[s];
    std::vector<std::size_t> counts(grid.size(), 0);
    if (!split.rest.empty()) {
      const auto op = assemble_laplacian(config, BoundaryCondition::neumann, RestrictionScheme::graph_restriction);
      counts = block_counts(op.principal_submatrix(split.rest), grid, CountingMethod::inertia);
    }
    for (std::size_t i = 1; i < grid.size(); ++i) {
      const double threshold = 1.0 / std::sqrt(d * grid[i]);
      std::size_t tail = 0;
      for (std::size_t c = 0; c < decomp.sizes.size(); ++c)
        if (c != proxy_label && static_cast<double>(decomp.sizes[c]) >= threshold) tail += decomp.sizes[c];
      row.increment.push_back(static_cast<double>(counts[i] - counts[0]) / n);
      row.bound.push_back(static_cast<double>(tail) / n);
    }
  });
  double worst = -std::numeric_limits<double>::infinity();
  std::size_t violations = 0;
  std::vector<double> mean_increment(energies.size(), 0.0), mean_bound(energies.size(), 0.0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < energies.size(); ++i) {
      const double margin = row.increment[i] - row.bound[i];
      worst = std::max(worst, margin);
      violations += margin > 0.0;
      mean_increment[i] += row.increment[i] / static_cast<double>(samples);
      mean_bound[i] += row.bound[i] / static_cast<double>(samples);
    }
  auto r = make_report("finite_cluster_tail", std::max(worst, 0.0), 0.0);
  r.parameters = {{"d", d},
                  {"L", geometry.side()},
                  {"topology", std::string(to_string(geometry.topology()))},
                  {"p", p},
                  {"energies", std::vector<double>(energies.begin(), energies.end())},
                  {"samples", samples},
                  {"master_seed", master_seed}};
  r.details = {{"violations", violations}, {"worst_margin", worst}, {"mean_increment", mean_increment},
               {"mean_bound", mean_bound}};
  return r;
}

MechanismReport implication_chain_check(int dim, double p, double alpha, double beta, std::span<const double> energies,
                                        std::size_t samples, std::uint64_t master_seed, unsigned jobs) {
  if (!(alpha > 0.0) || !(beta > 0.0)) throw std::invalid_argument("implication_chain_check: need alpha, beta > 0");
  nlohmann::json rows = nlohmann::json::array();
  double worst = 0.0;
  std::size_t total_premise = 0, total_failures = 0, total_bound_violations = 0;
  for (std::size_t i = 0; i < energies.size(); ++i) {
    const double e = energies[i];
    if (!(e > 0.0)) throw std::invalid_argument("implication_chain_check: energies must be positive");
    const double upper = alpha / (2.0 * std::sqrt(beta * e));
    const int side = static_cast<int>(std::floor(upper));
    nlohmann::json row = {{"E", e}, {"side", side}};
    if (side < 2) {
      row["skipped"] = "side below 2";
      rows.push_back(row);
      continue;
    }
    const double t_e = alpha / (2.0 * beta * side * side);
    row["t"] = t_e;
    if (t_e > 1.0) {
      row["skipped"] = "t_E above 1";
      rows.push_back(row);
      continue;
    }
    const BoxGeometry g(dim, side, Topology::free);
    const double scale = volume_scale(g);
    struct Outcome {
      bool premise = false;
      bool conclusion = false;
      bool bound_ok = false;
      double slope = 0.0;
    };
    std::vector<Outcome> out(samples);
    parallel_for(samples, jobs, [&](std::size_t s) {
      const auto config = ensemble_configuration(g, p, split_seed(master_seed, i), s);
      const double slope = slope_at_zero(config);
      const double energy = bottom_eigenvalue(perturbation_family(config, t_e));
      out[s].slope = slope;
      out[s].premise = energy <= e;
      out[s].conclusion = slope <= alpha;
      out[s].bound_ok = std::abs(energy - t_e * slope) <= beta * t_e * t_e * scale;
    });
    std::size_t premise = 0, nontrivial = 0, failures = 0, bound_violations = 0;
    for (const auto& o : out) {
      bound_violations += !o.bound_ok;
      if (!o.premise) continue;
      ++premise;
      nontrivial += o.slope > 0.0;
      if (!o.conclusion) {
        ++failures;
        worst = std::max(worst, o.slope - alpha);
      }
    }
    row["premise_hits"] = premise;
    row["premise_hits_with_closed_edges"] = nontrivial;
    row["conclusion_failures"] = failures;
    row["linearization_bound_violations"] = bound_violations;
    rows.push_back(row);
    total_premise += premise;
    total_failures += failures;
    total_bound_violations += bound_violations;
  }
  auto r = make_report("implication_chain", worst, 0.0);
  r.parameters = {{"d", dim},
                  {"p", p},
                  {"alpha", alpha},
                  {"beta", beta},
                  {"energies", std::vector<double>(energies.begin(), energies.end())},
                  {"samples", samples},
                  {"master_seed", master_seed}};
  r.details = {{"rows", rows},
               {"premise_hits", total_premise},
               {"conclusion_failures", total_failures},
               {"linearization_bound_violations", total_bound_violations}};
  return r;
}

}  // namespace perclap
