#pragma once

// Batch front-end: presets, JSON configuration with command-line overrides,
// and the ids / walk / spectrum / mechanism / verify commands.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "perclap/asymptotics.hpp"
#include "perclap/ids.hpp"
#include "perclap/lattice.hpp"
#include "perclap/operators.hpp"

namespace perclap::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitConfigError = 2;

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  std::string command = "ids";
  std::string preset = "supercritical-d2";
  int d = 2;
  int L = 128;
  Topology topology = Topology::periodic;
  double p = 0.7;
  BoundaryCondition bc = BoundaryCondition::neumann;
  RestrictionScheme scheme = RestrictionScheme::graph_restriction;
  CountingMethod method = CountingMethod::inertia;
  std::vector<double> energy_grid;
  std::vector<double> t_grid;
  std::size_t samples = 1;
  std::size_t walks = 1;
  std::uint64_t master_seed = 1;
  unsigned jobs = 1;
  double fit_lo = 0.0;
  double fit_hi = 0.0;
  std::string output_path;
  std::string format = "both";  // csv | json | both
  std::string suite = "quick";
  std::string check;
  double alpha = 0.0;
  double beta = 0.0;  // 0: estimate from linearization checks
  double delta = 1.0;
  double t0 = 1.0;
  std::vector<int> sides;
  std::size_t sample_index = 0;

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

/// Every key accepted in configuration files and as --key flags.
const std::vector<std::string>& config_keys();
const std::vector<std::string>& preset_names();
const std::vector<std::string>& mechanism_names();

nlohmann::json to_json(const ExperimentConfig& config);

/// Strict parse of a complete or partial configuration layered over `base`.
/// Unknown keys, wrong types and invalid values throw ConfigError.
ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig base = {});

/// Defaults of a preset for a command (and mechanism check).
nlohmann::json preset_defaults(const std::string& preset, const std::string& command, const std::string& check);

/// Grid text: comma-separated numbers, or "lin:lo:hi:n" / "log:lo:hi:n".
std::vector<double> parse_grid(const std::string& text);

struct RunContext {
  /// Master-seed fallback when neither the file nor a flag sets one;
  /// run_command reads PERCLAP_SEED when this is empty.
  std::optional<std::string> seed_env;
  bool read_environment = true;
  /// Assembly used by the structural verify checks.
  Assembler assemble = assemble_laplacian;
};

/// Resolves the configuration for `args` (without the program name):
/// preset defaults, then the --config file, then PERCLAP_SEED, then flags.
ExperimentConfig resolve_config(const std::vector<std::string>& args, const RunContext& context = {});

/// Runs a command line in-process. Returns the exit code: 0 ok, 1 a check
/// failed or a computation error, 2 configuration error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                const RunContext& context = {});

}  // namespace perclap::cli
