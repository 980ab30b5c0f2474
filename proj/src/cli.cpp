#include "perclap/cli.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "perclap/format.hpp"
#include "perclap/spectral.hpp"
#include "perclap/verify.hpp"
#include "perclap/walk.hpp"

namespace perclap::cli {

namespace {

enum class Kind { text, integer, unsigned_integer, real, grid, window, int_list };

const std::map<std::string, Kind>& key_kinds() {
  static const std::map<std::string, Kind> kinds{
      {"command", Kind::text},      {"preset", Kind::text},          {"d", Kind::integer},
      {"L", Kind::integer},         {"topology", Kind::text},        {"p", Kind::real},
      {"bc", Kind::text},           {"scheme", Kind::text},          {"method", Kind::text},
      {"energy_grid", Kind::grid},  {"t_grid", Kind::grid},          {"samples", Kind::unsigned_integer},
      {"walks", Kind::unsigned_integer}, {"master_seed", Kind::unsigned_integer}, {"jobs", Kind::unsigned_integer},
      {"fit_window", Kind::window}, {"output_path", Kind::text},     {"format", Kind::text},
      {"suite", Kind::text},        {"check", Kind::text},           {"alpha", Kind::real},
      {"beta", Kind::real},         {"delta", Kind::real},           {"t0", Kind::real},
      {"sides", Kind::int_list},    {"sample_index", Kind::unsigned_integer},
  };
  return kinds;
}

const std::vector<std::string> kCommands{"ids", "walk", "verify", "spectrum", "mechanism"};

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  const char* begin = text.data();
  const char* end = begin + text.size();
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) throw ConfigError("invalid value for " + key + ": '" + text + "'");
  return value;
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream is(text);
  while (std::getline(is, part, sep)) parts.push_back(part);
  return parts;
}

std::vector<double> linear_grid(double lo, double hi, std::size_t n) {
  std::vector<double> g(n);
  for (std::size_t i = 0; i < n; ++i)
    g[i] = n == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  return g;
}

std::vector<double> concat(std::vector<double> a, const std::vector<double>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

void check_key(const nlohmann::json& value, const std::string& key, Kind kind) {
  auto fail = [&](const char* what) { throw ConfigError("key '" + key + "' must be " + what); };
  switch (kind) {
    case Kind::text:
      if (!value.is_string()) fail("a string");
      break;
    case Kind::integer:
      if (!value.is_number_integer()) fail("an integer");
      break;
    case Kind::unsigned_integer:
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<std::int64_t>() >= 0))
        fail("a non-negative integer");
      break;
    case Kind::real:
      if (!value.is_number()) fail("a number");
      break;
    case Kind::grid:
      if (value.is_string()) break;
      if (!value.is_array()) fail("an array of numbers or a grid string");
      for (const auto& v : value)
        if (!v.is_number()) fail("an array of numbers or a grid string");
      break;
    case Kind::window:
      if (!value.is_array() || value.size() != 2 || !value[0].is_number() || !value[1].is_number())
        fail("a pair [lo, hi]");
      break;
    case Kind::int_list:
      if (!value.is_array()) fail("an array of integers");
      for (const auto& v : value)
        if (!v.is_number_integer()) fail("an array of integers");
      break;
  }
}

std::vector<double> grid_value(const nlohmann::json& value) {
  if (value.is_string()) return parse_grid(value.get<std::string>());
  return value.get<std::vector<double>>();
}

void validate(const ExperimentConfig& c) {
  if (std::find(kCommands.begin(), kCommands.end(), c.command) == kCommands.end())
    throw ConfigError("unknown command '" + c.command + "'");
  const auto& presets = preset_names();
  if (std::find(presets.begin(), presets.end(), c.preset) == presets.end())
    throw ConfigError("unknown preset '" + c.preset + "'");
  if (c.d < 1 || c.d > 4) throw ConfigError("d must lie in 1..4");
  if (c.L < 1) throw ConfigError("L must be at least 1");
  if (!(c.p >= 0.0 && c.p <= 1.0)) throw ConfigError("p must lie in [0, 1]");
  if (c.scheme == RestrictionScheme::neumann_boundary && c.bc != BoundaryCondition::pseudo_dirichlet)
    throw ConfigError("scheme neumann_boundary requires bc pseudo_dirichlet");
  if (c.samples < 1) throw ConfigError("samples must be at least 1");
  if (c.walks < 1) throw ConfigError("walks must be at least 1");
  if (!c.energy_grid.empty()) {
    try {
      validate_energy_grid(c.energy_grid);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("energy_grid: ") + e.what());
    }
  }
  for (std::size_t i = 0; i < c.t_grid.size(); ++i)
    if (!(c.t_grid[i] > 0.0) || !std::isfinite(c.t_grid[i]) || (i > 0 && !(c.t_grid[i] > c.t_grid[i - 1])))
      throw ConfigError("t_grid must be positive, finite and strictly increasing");
  if (!(c.fit_lo < c.fit_hi) && !(c.fit_lo == 0.0 && c.fit_hi == 0.0))
    throw ConfigError("fit_window needs lo < hi");
  if (c.format != "csv" && c.format != "json" && c.format != "both")
    throw ConfigError("format must be csv, json or both");
  if (c.suite != "quick" && c.suite != "full") throw ConfigError("suite must be quick or full");
  const auto& checks = mechanism_names();
  if (!c.check.empty() && std::find(checks.begin(), checks.end(), c.check) == checks.end())
    throw ConfigError("unknown check '" + c.check + "'");
  if (!(c.alpha >= 0.0) || !(c.beta >= 0.0)) throw ConfigError("alpha and beta must be >= 0");
  if (!(c.delta > 0.0) || !(c.t0 > 0.0)) throw ConfigError("delta and t0 must be > 0");
  for (int s : c.sides)
    if (s < 2) throw ConfigError("sides must be >= 2");
}

nlohmann::json flag_value(const std::string& key, Kind kind, const std::string& text) {
  switch (kind) {
    case Kind::text:
      return text;
    case Kind::integer:
      return parse_number<std::int64_t>(key, text);
    case Kind::unsigned_integer:
      return parse_number<std::uint64_t>(key, text);
    case Kind::real:
      return parse_number<double>(key, text);
    case Kind::grid:
      return parse_grid(text);
    case Kind::window: {
      const auto w = parse_grid(text);
      if (w.size() != 2) throw ConfigError("fit_window needs two numbers lo,hi");
      return w;
    }
    case Kind::int_list: {
      std::vector<int> out;
      for (const auto& part : split(text, ',')) out.push_back(parse_number<int>(key, part));
      return out;
    }
  }
  return nullptr;
}

struct ParsedArgs {
  std::string command;
  std::string config_path;
  std::map<std::string, std::string> flags;
  bool help = false;
  std::string help_text;
};

ParsedArgs parse_args(const std::vector<std::string>& args) {
  CLI::App app{"perclap: Laplacians on bond-percolation graphs", "perclap"};
  app.require_subcommand(1);
  ParsedArgs parsed;
  std::map<std::string, std::map<std::string, std::string>> values;
  std::map<std::string, std::string> config_paths;
  std::map<std::string, std::string> positional;
  static const std::map<std::string, std::string> about{
      {"ids", "integrated density of states curve (CSV/JSON)"},
      {"walk", "annealed return probability of the random walk"},
      {"verify", "run the quick or full verification suite"},
      {"spectrum", "dense spectrum of one sampled configuration"},
      {"mechanism", "run one named mechanism check"}};
  for (const auto& name : kCommands) {
    auto* sub = app.add_subcommand(name, about.at(name));
    sub->add_option("--config", config_paths[name], "JSON configuration file");
    for (const auto& [key, kind] : key_kinds()) {
      if (key == "command") continue;
      // --seed is a short alias of --master_seed.
      sub->add_option(key == "master_seed" ? "--master_seed,--seed" : "--" + key, values[name][key]);
    }
    if (name == "verify") sub->add_option("suite_name", positional[name], "quick or full");
    if (name == "mechanism") sub->add_option("check_name", positional[name], "mechanism check");
  }
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    parsed.help = true;
    parsed.help_text = app.help();
    return parsed;
  } catch (const CLI::ParseError& e) {
    throw ConfigError(e.what());
  }
  auto* chosen = app.get_subcommands().front();
  parsed.command = chosen->get_name();
  parsed.config_path = config_paths[parsed.command];
  for (const auto& [key, kind] : key_kinds()) {
    if (key == "command") continue;
    if (chosen->get_option("--" + key)->count() > 0) parsed.flags[key] = values[parsed.command][key];
  }
  if (!positional[parsed.command].empty()) {
    const std::string key = parsed.command == "verify" ? "suite" : "check";
    if (parsed.flags.count(key) && parsed.flags[key] != positional[parsed.command])
      throw ConfigError("conflicting " + key + " values");
    parsed.flags[key] = positional[parsed.command];
  }
  return parsed;
}

// ---------------------------------------------------------------- outputs

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path + " for writing");
  f << text;
  if (!f) throw std::runtime_error("write to " + path + " failed");
}

/// CSV and/or JSON to files under output_path, or one of them to `out`.
void emit(const ExperimentConfig& c, const std::string& csv, const nlohmann::json& doc, std::ostream& out) {
  const bool want_csv = c.format != "json" && !csv.empty();
  const bool want_json = c.format != "csv" || csv.empty();
  if (c.output_path.empty()) {
    if (want_csv && c.format == "csv")
      out << csv;
    else if (want_json)
      out << doc.dump(2) << '\n';
    else
      out << csv;
    return;
  }
  if (want_csv) write_text(c.output_path + ".csv", csv);
  if (want_json) write_text(c.output_path + ".json", doc.dump(2) + "\n");
}

nlohmann::json document(const ExperimentConfig& c, const char* schema) {
  return {{"schema", schema}, {"command", c.command}, {"config", to_json(c)}};
}

FitWindow window_of(const ExperimentConfig& c) { return {c.fit_lo, c.fit_hi}; }

std::vector<Configuration> free_ensemble(const ExperimentConfig& c) {
  const BoxGeometry g(c.d, c.L, Topology::free);
  std::vector<Configuration> out;
  for (std::size_t s = 0; s < c.samples; ++s) out.push_back(ensemble_configuration(g, c.p, c.master_seed, s));
  return out;
}

MechanismReport summarize(const std::string& name, const std::vector<MechanismReport>& reports, double fraction) {
  std::size_t passing = 0;
  double worst = 0.0;
  for (const auto& r : reports) {
    passing += r.pass;
    worst = std::max(worst, r.worst_violation);
  }
  const auto required = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(reports.size()) - 1e-9));
  MechanismReport s;
  s.name = name;
  s.tolerance = 0.0;
  s.worst_violation = passing >= required ? 0.0 : static_cast<double>(required - passing);
  s.pass = s.worst_violation <= s.tolerance;
  s.parameters = {{"configurations", reports.size()}, {"required_passing", required}};
  s.details = {{"passing", passing}, {"worst_single_violation", worst}};
  return s;
}

// --------------------------------------------------------------- commands

int cmd_ids(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  if (c.energy_grid.empty()) throw ConfigError("ids needs an energy_grid");
  IdsRequest req;
  req.bc = c.bc;
  req.scheme = c.scheme;
  req.geometry = BoxGeometry(c.d, c.L, c.topology);
  req.p = c.p;
  req.energy_grid = c.energy_grid;
  req.samples = c.samples;
  req.master_seed = c.master_seed;
  req.jobs = c.jobs;
  req.method = c.method;
  const auto curve = estimate_ids(req);

  auto doc = document(c, "perclap.ids_run/1");
  doc["curve"] = to_json(curve);
  std::ostringstream summary;
  summary << "ids: " << curve.samples << " samples on " << c.d << "d L=" << c.L << " p=" << c.p << ", "
          << curve.energy_grid.size() << " energies";
  const bool have_window = c.fit_lo < c.fit_hi;
  if (have_window) {
    try {
      if (c.bc == BoundaryCondition::neumann) {
        const auto z = zero_mode_density(req.geometry, c.p, c.samples, c.master_seed, c.jobs);
        const auto fit = fit_van_hove(curve, z.nn_at_zero, window_of(c));
        doc["fit_kind"] = "van_hove";
        doc["fit"] = to_json(fit);
        doc["zero_mode"] = {{"nn_at_zero", z.nn_at_zero},
                            {"component_density", z.component_density},
                            {"isolated_density", z.isolated_density},
                            {"formula_all_clusters", z.formula_all_clusters},
                            {"formula_nontrivial_clusters", z.formula_nontrivial_clusters},
                            {"mismatched_samples", z.mismatched_samples}};
        summary << "; van Hove slope " << format_double(fit.slope) << " (target " << c.d / 2.0 << ")";
      } else {
        const auto fit = fit_lifshits(curve, window_of(c));
        doc["fit_kind"] = "lifshits";
        doc["fit"] = to_json(fit);
        summary << "; Lifshits double-log slope " << format_double(fit.slope) << " (informational)";
      }
    } catch (const std::invalid_argument& e) {
      doc["fit"] = {{"error", e.what()}};
      summary << "; fit unavailable: " << e.what();
    }
  }
  std::ostringstream csv;
  write_csv(csv, curve);
  emit(c, csv.str(), doc, out);
  err << summary.str() << '\n';
  return kExitOk;
}

int cmd_walk(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  if (c.t_grid.empty()) throw ConfigError("walk needs a t_grid");
  AnnealedRequest req;
  req.geometry = BoxGeometry(c.d, c.L, c.topology);
  req.p = c.p;
  req.t_grid = c.t_grid;
  req.configs = c.samples;
  req.walks_per_config = c.walks;
  req.master_seed = c.master_seed;
  req.jobs = c.jobs;
  const auto curve = annealed_return(req);
  auto doc = document(c, "perclap.walk_run/1");
  doc["curve"] = to_json(curve);
  std::ostringstream summary;
  summary << "walk: " << curve.samples << " configurations x " << c.walks << " walks, " << curve.excluded_samples
          << " without a spanning cluster";
  if (c.fit_lo < c.fit_hi) {
    try {
      const auto fit = fit_heat_decay(curve, window_of(c));
      doc["fit_kind"] = "heat_decay";
      doc["fit"] = to_json(fit);
      summary << "; decay slope " << format_double(fit.slope) << " (target " << -c.d / 2.0 << ")";
    } catch (const std::invalid_argument& e) {
      doc["fit"] = {{"error", e.what()}};
      summary << "; fit unavailable: " << e.what();
    }
  }
  std::ostringstream csv;
  write_csv(csv, curve);
  emit(c, csv.str(), doc, out);
  err << summary.str() << '\n';
  return kExitOk;
}

int cmd_spectrum(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  const auto config = ensemble_configuration(BoxGeometry(c.d, c.L, c.topology), c.p, c.master_seed, c.sample_index);
  const auto op = assemble_laplacian(config, c.bc, c.scheme);
  const auto spectrum = full_spectrum(op);
  std::ostringstream csv;
  csv << "# perclap spectrum v1\n";
  csv << "k,eigenvalue\n";
  for (std::size_t k = 0; k < spectrum.eigenvalues.size(); ++k)
    csv << k << ',' << format_double(spectrum.eigenvalues[k]) << '\n';
  auto doc = document(c, "perclap.spectrum_run/1");
  doc["configuration"] = perclap::to_json(config);
  doc["eigenvalues"] = spectrum.eigenvalues;
  doc["kernel_dimension"] = count_at_most(spectrum.eigenvalues, 0.0);
  doc["components"] = cluster_decomposition(config).component_count;
  emit(c, csv.str(), doc, out);
  err << "spectrum: " << spectrum.eigenvalues.size() << " eigenvalues in [" << format_double(spectrum.eigenvalues.front())
      << ", " << format_double(spectrum.eigenvalues.back()) << "]\n";
  return kExitOk;
}

int cmd_mechanism(const ExperimentConfig& c, std::ostream& out, std::ostream& err) {
  if (c.check.empty()) throw ConfigError("mechanism needs a check name");
  std::vector<MechanismReport> reports;
  double required_fraction = 1.0;
  const auto& name = c.check;
  if (name == "monotonicity") {
    std::vector<double> grid(21);
    for (int i = 0; i <= 20; ++i) grid[static_cast<std::size_t>(i)] = i / 20.0;
    for (const auto& config : free_ensemble(c)) reports.push_back(monotonicity_check(config, grid));
  } else if (name == "linearization") {
    for (const auto& config : free_ensemble(c)) reports.push_back(linearization_check(config));
    required_fraction = 0.95;
  } else if (name == "slope") {
    for (const auto& config : free_ensemble(c)) reports.push_back(slope_check(config));
  } else if (name == "large_deviation") {
    if (!(c.alpha < 1.0 - c.p)) throw ConfigError("large_deviation needs alpha < 1 - p");
    reports.push_back(slope_large_deviation(c.d, c.p, c.alpha, c.samples, c.master_seed, c.sides, c.jobs));
  } else if (name == "gap_scaling") {
    reports.push_back(gap_scaling_check(c.d, c.sides));
  } else if (name == "dirichlet_scaling") {
    const auto fit = dirichlet_cube_scaling(c.d, c.sides);
    MechanismReport r;
    r.name = "dirichlet_scaling";
    r.worst_violation = std::max(0.0, std::abs(fit.slope + 2.0) - 0.1);
    r.pass = r.worst_violation <= 0.0;
    r.parameters = {{"d", c.d}, {"sides", c.sides}, {"range", {-2.1, -1.9}}};
    r.details = {{"fit", to_json(fit)}, {"eigenvalues", fit.ys}};
    reports.push_back(r);
  } else if (name == "tauberian") {
    reports.push_back(tauberian_check(c.delta, c.t0));
  } else if (name == "heaviside") {
    reports.push_back(heaviside_check(c.samples, c.master_seed));
  } else if (name == "finite_cluster_tail") {
    reports.push_back(finite_cluster_tail_check(BoxGeometry(c.d, c.L, c.topology), c.p, c.energy_grid, c.samples,
                                                c.master_seed, c.jobs));
  } else if (name == "implication_chain") {
    double beta = c.beta;
    nlohmann::json beta_source = "config";
    if (beta == 0.0) {
      for (const auto& config : free_ensemble(c))
        beta = std::max(beta, linearization_check(config).details["beta_hat"].get<double>());
      beta_source = "max beta_hat over linearization checks of the same ensemble";
    }
    if (!(beta > 0.0)) throw ConfigError("implication_chain: beta could not be estimated (all residuals vanish)");
    auto r = implication_chain_check(c.d, c.p, c.alpha, beta, c.energy_grid, c.samples, c.master_seed, c.jobs);
    r.parameters["beta_source"] = beta_source;
    reports.push_back(r);
  } else if (name == "zero_modes") {
    const auto z = zero_mode_density(BoxGeometry(c.d, c.L, c.topology), c.p, c.samples, c.master_seed, c.jobs);
    MechanismReport r;
    r.name = "zero_modes";
    r.worst_violation = static_cast<double>(z.mismatched_samples);
    r.pass = z.mismatched_samples == 0;
    r.details = {{"nn_at_zero", z.nn_at_zero},
                 {"component_density", z.component_density},
                 {"isolated_density", z.isolated_density},
                 {"formula_all_clusters", z.formula_all_clusters},
                 {"formula_nontrivial_clusters", z.formula_nontrivial_clusters}};
    reports.push_back(r);
  }
  const auto summary = summarize(name, reports, required_fraction);
  auto doc = document(c, "perclap.mechanism_run/1");
  doc["summary"] = perclap::to_json(summary);
  for (const auto& r : reports) doc["reports"].push_back(perclap::to_json(r));
  emit(c, "", doc, out);
  err << "mechanism " << name << ": " << (summary.pass ? "PASS" : "FAIL") << " ("
      << summary.details["passing"].get<std::size_t>() << "/" << reports.size() << " passing)\n";
  return summary.pass ? kExitOk : kExitCheckFailed;
}

int cmd_verify(const ExperimentConfig& c, std::ostream& out, std::ostream& err, const RunContext& context) {
  VerifyOptions options;
  options.suite = c.suite;
  options.master_seed = c.master_seed;
  options.jobs = c.jobs;
  options.assemble = context.assemble;
  const auto reports = run_verify_suite(options);
  bool all = true;
  auto doc = document(c, "perclap.verify_run/1");
  doc["checks"] = nlohmann::json::array();
  for (const auto& r : reports) {
    all = all && r.pass;
    doc["checks"].push_back(perclap::to_json(r));
    err << (r.pass ? "PASS " : "FAIL ") << r.name << " (violation " << format_double(r.worst_violation)
        << ", tolerance " << format_double(r.tolerance) << ")\n";
  }
  doc["pass"] = all;
  emit(c, "", doc, out);
  return all ? kExitOk : kExitCheckFailed;
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [key, kind] : key_kinds()) k.push_back(key);
    return k;
  }();
  return keys;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names{"subcritical-d2", "supercritical-d2", "supercritical-d3",
                                              "fullLattice-d2"};
  return names;
}

const std::vector<std::string>& mechanism_names() {
  static const std::vector<std::string> names{
      "monotonicity", "linearization", "slope",     "large_deviation",     "gap_scaling",       "dirichlet_scaling",
      "tauberian",    "heaviside",     "zero_modes", "finite_cluster_tail", "implication_chain"};
  return names;
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() == 4 && (parts[0] == "lin" || parts[0] == "log")) {
    const double lo = parse_number<double>("grid", parts[1]);
    const double hi = parse_number<double>("grid", parts[2]);
    const auto n = parse_number<std::size_t>("grid", parts[3]);
    if (n < 1 || !(hi >= lo)) throw ConfigError("grid '" + text + "' needs n >= 1 and hi >= lo");
    if (parts[0] == "lin") return linear_grid(lo, hi, n);
    if (!(lo > 0.0)) throw ConfigError("log grid '" + text + "' needs lo > 0");
    return log_space(lo, hi, n);
  }
  std::vector<double> out;
  for (const auto& part : split(text, ',')) out.push_back(parse_number<double>("grid", part));
  if (out.empty()) throw ConfigError("empty grid");
  return out;
}

nlohmann::json to_json(const ExperimentConfig& c) {
  return {{"command", c.command},
          {"preset", c.preset},
          {"d", c.d},
          {"L", c.L},
          {"topology", to_string(c.topology)},
          {"p", c.p},
          {"bc", to_string(c.bc)},
          {"scheme", to_string(c.scheme)},
          {"method", to_string(c.method)},
          {"energy_grid", c.energy_grid},
          {"t_grid", c.t_grid},
          {"samples", c.samples},
          {"walks", c.walks},
          {"master_seed", c.master_seed},
          {"jobs", c.jobs},
          {"fit_window", {c.fit_lo, c.fit_hi}},
          {"output_path", c.output_path},
          {"format", c.format},
          {"suite", c.suite},
          {"check", c.check},
          {"alpha", c.alpha},
          {"beta", c.beta},
          {"delta", c.delta},
          {"t0", c.t0},
          {"sides", c.sides},
          {"sample_index", c.sample_index}};
}

ExperimentConfig config_from_json(const nlohmann::json& j, ExperimentConfig c) {
  if (!j.is_object()) throw ConfigError("configuration must be a JSON object");
  const auto& kinds = key_kinds();
  for (const auto& [key, value] : j.items()) {
    const auto it = kinds.find(key);
    if (it == kinds.end()) throw ConfigError("unknown configuration key '" + key + "'");
    check_key(value, key, it->second);
  }
  auto text = [&](const char* key, std::string& field) {
    if (j.contains(key)) field = j.at(key).get<std::string>();
  };
  try {
    text("command", c.command);
    text("preset", c.preset);
    if (j.contains("d")) c.d = j.at("d").get<int>();
    if (j.contains("L")) c.L = j.at("L").get<int>();
    if (j.contains("topology")) c.topology = parse_topology(j.at("topology").get<std::string>());
    if (j.contains("p")) c.p = j.at("p").get<double>();
    if (j.contains("bc")) c.bc = parse_boundary_condition(j.at("bc").get<std::string>());
    if (j.contains("scheme")) c.scheme = parse_restriction_scheme(j.at("scheme").get<std::string>());
    if (j.contains("method")) c.method = parse_counting_method(j.at("method").get<std::string>());
    if (j.contains("energy_grid")) c.energy_grid = grid_value(j.at("energy_grid"));
    if (j.contains("t_grid")) c.t_grid = grid_value(j.at("t_grid"));
    if (j.contains("samples")) c.samples = j.at("samples").get<std::size_t>();
    if (j.contains("walks")) c.walks = j.at("walks").get<std::size_t>();
    if (j.contains("master_seed")) c.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("jobs")) c.jobs = j.at("jobs").get<unsigned>();
    if (j.contains("fit_window")) {
      c.fit_lo = j.at("fit_window")[0].get<double>();
      c.fit_hi = j.at("fit_window")[1].get<double>();
    }
    text("output_path", c.output_path);
    text("format", c.format);
    text("suite", c.suite);
    text("check", c.check);
    if (j.contains("alpha")) c.alpha = j.at("alpha").get<double>();
    if (j.contains("beta")) c.beta = j.at("beta").get<double>();
    if (j.contains("delta")) c.delta = j.at("delta").get<double>();
    if (j.contains("t0")) c.t0 = j.at("t0").get<double>();
    if (j.contains("sides")) c.sides = j.at("sides").get<std::vector<int>>();
    if (j.contains("sample_index")) c.sample_index = j.at("sample_index").get<std::size_t>();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(e.what());
  }
  validate(c);
  return c;
}

nlohmann::json preset_defaults(const std::string& preset, const std::string& command, const std::string& check) {
  nlohmann::json j;
  j["command"] = command;
  j["preset"] = preset;
  j["topology"] = "periodic";
  j["bc"] = "neumann";
  j["scheme"] = "graph_restriction";
  j["method"] = "inertia";
  j["walks"] = 10000;
  j["samples"] = 20;
  j["master_seed"] = 1;
  j["jobs"] = 1;
  j["format"] = "both";
  j["suite"] = "quick";
  const auto upper = linear_grid(0.25, 8.0, 32);
  j["t_grid"] = log_space(1.0, 64.0, 13);
  if (preset == "supercritical-d2" || preset == "fullLattice-d2") {
    j["d"] = 2;
    j["L"] = 128;
    j["p"] = preset == "supercritical-d2" ? 0.7 : 1.0;
    if (preset == "fullLattice-d2") j["samples"] = 1;
    j["energy_grid"] = concat(concat({0.0}, log_space(0.02, 0.2, 13)), upper);
    j["fit_window"] = {0.02, 0.2};
  } else if (preset == "subcritical-d2") {
    j["d"] = 2;
    j["L"] = 128;
    j["p"] = 0.3;
    j["bc"] = "pseudo_dirichlet";
    j["energy_grid"] = concat(log_space(0.05, 0.2, 7), upper);
    j["fit_window"] = {0.05, 1.0};
  } else if (preset == "supercritical-d3") {
    j["d"] = 3;
    j["L"] = 32;
    j["p"] = 0.35;
    j["samples"] = 8;
    j["energy_grid"] = concat(concat({0.0}, log_space(0.005, 0.05, 8)), linear_grid(0.1, 12.0, 120));
    j["fit_window"] = {0.005, 0.05};
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
  if (command == "walk") j["fit_window"] = {8.0, 64.0};
  if (command == "spectrum") j["L"] = j["d"] == 3 ? 8 : 16;

  if (command == "mechanism") {
    auto free_box = [&](double p, std::size_t samples) {
      j["d"] = 2;
      j["L"] = 6;
      j["p"] = p;
      j["topology"] = "free";
      j["samples"] = samples;
    };
    if (check == "monotonicity" || check == "linearization" || check == "slope") {
      free_box(0.5, 100);
    } else if (check == "large_deviation") {
      free_box(0.5, 100000);
      j["alpha"] = 0.3;
      j["sides"] = {4, 6, 8, 10};
    } else if (check == "gap_scaling") {
      j["d"] = 2;
      j["sides"] = {4, 8, 16, 32, 64};
    } else if (check == "dirichlet_scaling") {
      j["d"] = 2;
      j["sides"] = {4, 8, 16, 32};
    } else if (check == "heaviside") {
      j["samples"] = 10000;
    } else if (check == "finite_cluster_tail") {
      j["energy_grid"] = {0.01, 0.05, 0.1};
      j["samples"] = 50;
    } else if (check == "implication_chain") {
      free_box(0.9, 500);
      j["alpha"] = 0.09;
      j["energy_grid"] = {0.003, 0.01, 0.02};
    }
  }
  return j;
}

ExperimentConfig resolve_config(const std::vector<std::string>& args, const RunContext& context) {
  const auto parsed = parse_args(args);
  if (parsed.help) throw ConfigError(parsed.help_text);
  nlohmann::json file = nlohmann::json::object();
  if (!parsed.config_path.empty()) {
    std::ifstream f(parsed.config_path);
    if (!f) throw ConfigError("cannot read configuration file " + parsed.config_path);
    try {
      file = nlohmann::json::parse(f);
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("configuration file " + parsed.config_path + ": " + e.what());
    }
    if (!file.is_object()) throw ConfigError("configuration file must hold a JSON object");
  }
  auto pick = [&](const char* key, const std::string& fallback) {
    if (parsed.flags.count(key)) return parsed.flags.at(key);
    if (file.contains(key) && file.at(key).is_string()) return file.at(key).get<std::string>();
    return fallback;
  };
  const std::string preset = pick("preset", "supercritical-d2");
  const std::string check = pick("check", "");
  nlohmann::json merged;
  try {
    merged = preset_defaults(preset, parsed.command, check);
  } catch (const ConfigError&) {
    throw;
  }
  for (const auto& [key, value] : file.items()) merged[key] = value;
  merged["command"] = parsed.command;

  if (!file.contains("master_seed") && !parsed.flags.count("master_seed")) {
    std::optional<std::string> env = context.seed_env;
    if (!env && context.read_environment)
      if (const char* raw = std::getenv("PERCLAP_SEED")) env = std::string(raw);
    if (env) merged["master_seed"] = parse_number<std::uint64_t>("PERCLAP_SEED", *env);
  }
  const auto& kinds = key_kinds();
  for (const auto& [key, text] : parsed.flags) merged[key] = flag_value(key, kinds.at(key), text);
  return config_from_json(merged);
}

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
                const RunContext& context) {
  ExperimentConfig config;
  try {
    const auto parsed = parse_args(args);
    if (parsed.help) {
      out << parsed.help_text;
      return kExitOk;
    }
    config = resolve_config(args, context);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  }
  try {
    if (config.command == "ids") return cmd_ids(config, out, err);
    if (config.command == "walk") return cmd_walk(config, out, err);
    if (config.command == "spectrum") return cmd_spectrum(config, out, err);
    if (config.command == "mechanism") return cmd_mechanism(config, out, err);
    return cmd_verify(config, out, err, context);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::invalid_argument& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
}

}  // namespace perclap::cli
