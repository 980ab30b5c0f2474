#pragma once

// Verification suite: structural operator identities, estimator consistency
// checks and the mechanism checks of the asymptotics module, each reported
// as a MechanismReport.

#include <cstdint>
#include <string>
#include <vector>

#include "perclap/asymptotics.hpp"
#include "perclap/lattice.hpp"
#include "perclap/operators.hpp"

namespace perclap {

/// Sorted spectra satisfy lambda_k(D) = 4d - lambda_{n+1-k}(N) and
/// lambda_k(D~) = 4d - lambda_{n+1-k}(D~). Tolerance 1e-9.
MechanismReport involution_check(const std::vector<Configuration>& configs, const Assembler& assemble);

/// Every eigenvalue of the three graph-restriction Laplacians lies in
/// [-1e-9, 4d + 1e-9].
MechanismReport spectrum_range_check(const std::vector<Configuration>& configs, const Assembler& assemble);

/// dim ker(Delta_N), counted by inertia, equals the number of clusters.
MechanismReport kernel_components_check(const std::vector<Configuration>& configs);

/// <phi, N phi> <= <phi, D~ phi> <= <phi, D phi> for random phi; tolerance
/// 1e-12 relative to |phi|^2.
MechanismReport ordering_check(const std::vector<Configuration>& configs, std::size_t vectors, std::uint64_t seed);

struct VerifyOptions {
  std::string suite = "quick";  // quick | full
  std::uint64_t master_seed = 1;
  unsigned jobs = 1;
  /// Operator assembly used by the structural checks; replaceable so that a
  /// deliberately broken assembler can be shown to fail them.
  Assembler assemble = assemble_laplacian;
  /// Run only the named checks (all when empty).
  std::vector<std::string> only;
};

std::vector<MechanismReport> run_verify_suite(const VerifyOptions& options);

/// Names of the checks in a suite, in execution order.
std::vector<std::string> verify_check_names(const std::string& suite);

}  // namespace perclap
