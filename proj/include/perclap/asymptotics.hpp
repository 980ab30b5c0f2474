#pragma once

// Exponent fits on IDS and Laplace curves, and numerical checks of the
// mechanisms behind the Lifshits and van Hove asymptotics.

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "perclap/ids.hpp"
#include "perclap/lattice.hpp"

namespace perclap {

struct FitWindow {
  double lo = 0.0;
  double hi = 0.0;
};

struct FitReport {
  double slope = 0.0;
  double intercept = 0.0;
  FitWindow window;
  double r_squared = 0.0;
  std::size_t n_points = 0;
  double slope_stderr = 0.0;
  /// Abscissae inside the window that were dropped (non-positive or
  /// otherwise unusable ordinates).
  std::vector<double> dropped;
  /// The (x, y) pairs that entered the fit, before taking logarithms.
  std::vector<double> xs;
  std::vector<double> ys;
};

nlohmann::json to_json(const FitReport& fit);

/// Least-squares slope of ln y against ln x over x in [lo, hi]. Points with
/// y <= 0 are dropped and listed. Throws std::invalid_argument when fewer
/// than three points remain.
FitReport fit_log_log(std::span<const double> x, std::span<const double> y, FitWindow window);

/// Slope of ln(N(E) - n0) against ln E.
FitReport fit_van_hove(const IdsCurve& curve, double n0, FitWindow window);

/// Slope of ln|ln N(E)| against ln E; values equal to 0 or >= 1 are dropped.
FitReport fit_lifshits(const IdsCurve& curve, FitWindow window);

/// Slope of ln value against ln t.
FitReport fit_heat_decay(const LaplaceCurve& curve, FitWindow window);

/// Bottom eigenvalue of the Dirichlet Laplacian of the all-open free cube of
/// each side, fitted against the side on log-log axes.
FitReport dirichlet_cube_scaling(int dim, std::span<const int> sides);

struct MechanismReport {
  std::string name;
  bool pass = false;
  double worst_violation = 0.0;
  double tolerance = 0.0;
  nlohmann::json parameters = nlohmann::json::object();
  nlohmann::json details = nlohmann::json::object();
};

nlohmann::json to_json(const MechanismReport& report);

/// E(t) = bottom eigenvalue of H(t) over the grid; violation is the largest
/// decrease between consecutive grid points. Pass iff <= 1e-10.
MechanismReport monotonicity_check(const Configuration& config, std::span<const double> t_grid);

/// Residual |E(t) - t E'(0)| over nine log-spaced t in [1e-4, 1e-2]; pass iff
/// its log-log slope lies in [1.8, 2.2]. Reports beta_hat = max residual /
/// (t^2 |Lambda|^{2/d}). Residuals all below 1e-14 pass trivially.
MechanismReport linearization_check(const Configuration& config);

/// Closed-form slope against the forward difference (E(h) - E(0)) / h and
/// the ground-state expectation of the perturbation; pass iff the relative
/// difference is <= 1e-3.
MechanismReport slope_check(const Configuration& config, double h = 1e-6);

/// Empirical frequency of {E'(0) <= alpha} on free cubes of each side, next
/// to the exact binomial probability. Pass iff the log-frequency is
/// non-increasing in |Lambda| across the sides where it is nonzero.
MechanismReport slope_large_deviation(int dim, double p, double alpha, std::size_t samples,
                                      std::uint64_t master_seed, std::span<const int> sides, unsigned jobs = 1);

/// Exact P[E'(0) <= alpha] for a free cube: the number of closed edges is
/// binomial. Returned as a natural logarithm (-inf when impossible).
double slope_log_probability(int dim, int side, double p, double alpha);

/// Spectral gap of the full cube against 2 - 2cos(pi/L) and its log-log
/// slope in L. Pass iff every gap matches to 1e-9 and the slope is within
/// 0.1 of -2.
MechanismReport gap_scaling_check(int dim, std::span<const int> sides);

/// For mu([0,E]) = E^delta: Laplace transform by quadrature against
/// Gamma(delta+1) t^-delta, constants c_l, c_u on t >= t0, and the resulting
/// C_l, C_u checked on E in ]0, 1/t0].
MechanismReport tauberian_check(double delta, double t0);

/// e^{-tau x} - e^{-(tau-1)} e^{-x} <= Theta(1-x) <= e^{1-x} on random
/// (x >= 0, tau >= 1).
MechanismReport heaviside_check(std::size_t samples, std::uint64_t seed);

/// Per sample and energy: finite-cluster counting increment
/// (N_fin(E) - N_fin(0)) against the fraction of vertices in finite clusters
/// of size >= (dE)^{-1/2}. Pass iff no increment exceeds its bound.
MechanismReport finite_cluster_tail_check(const BoxGeometry& geometry, double p, std::span<const double> energies,
                                          std::size_t samples, std::uint64_t master_seed, unsigned jobs = 1);

/// For each E: side l_E = floor(alpha / (2 sqrt(beta E))) (skipped when < 2)
/// and t_E = alpha / (2 beta l_E^2); samples free cubes of side l_E and
/// checks that E(t_E) <= E implies E'(0) <= alpha.
MechanismReport implication_chain_check(int dim, double p, double alpha, double beta, std::span<const double> energies,
                                        std::size_t samples, std::uint64_t master_seed, unsigned jobs = 1);

/// n log-spaced points between lo and hi inclusive.
std::vector<double> log_space(double lo, double hi, std::size_t n);

}  // namespace perclap
