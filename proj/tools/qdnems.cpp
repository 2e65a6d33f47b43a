// qdnems command-line driver.
//
// Exit codes: 0 success, 1 configuration error, 2 numerical failure,
// 3 validation failure.

#include <CLI11.hpp>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>

#include "qdnems/config.hpp"
#include "qdnems/errors.hpp"
#include "qdnems/observables.hpp"
#include "qdnems/oracle.hpp"
#include "qdnems/plate.hpp"
#include "qdnems/run.hpp"
#include "qdnems/units.hpp"

namespace {

using namespace qdnems;

enum ExitCode : int { ok = 0, config_error = 1, numerical_error = 2, validation_error = 3 };

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
};

void add_common(CLI::App* sub, CommonOptions& opts) {
  sub->add_option("-c,--config", opts.config_path, "INI config file");
  sub->add_option("overrides", opts.overrides, "section.key=value assignments (also --section.key=value)");
  sub->allow_extras();
}

RunConfig load_config(const CLI::App* sub, const CommonOptions& opts) {
  Assignments assignments;
  if (!opts.config_path.empty()) {
    std::ifstream in(opts.config_path);
    if (!in) throw ConfigError("cannot open config file " + opts.config_path);
    assignments = parse_ini(in);
  }
  std::vector<std::string> extra = opts.overrides;
  for (const auto& e : sub->remaining()) extra.push_back(e);
  for (const auto& text : extra) {
    auto [key, value] = parse_override(text);
    assignments[key] = value;
  }
  return resolve_config(assignments);
}

int cmd_modes(const RunConfig& config, const std::string& out_path) {
  ConvergenceReport report;
  const auto modes = build_modes(config, &report);
  std::cerr << "modes: " << modes.size() << ", Ritz refinement shift " << report.max_relative_shift
            << " (checked at " << report.refined.nx << "x" << report.refined.ny << ")\n";
  std::cerr << " index      f_GHz      hw_meV  parity  lifetime_ns\n";
  for (const auto& m : modes.modes) {
    std::fprintf(stderr, "%6d %10.5f %11.4e %7s %12.4g\n", m.index, m.frequency_GHz, m.quantum_meV,
                 parity_name(m.parity), mode_lifetime_ns(m.frequency_GHz, modes.quality_factor));
  }
  if (out_path.empty() || out_path == "-") {
    write_mode_table(std::cout, modes);
  } else {
    std::ofstream f(out_path);
    if (!f) throw ConfigError("cannot write " + out_path);
    write_mode_table(f, modes);
  }
  return ok;
}

int cmd_validate(const oracle::ValidationOptions& options) {
  const auto table = oracle::run_validation_suite(options);
  bool all = true;
  std::cout << std::left << std::setw(58) << "check" << std::setw(14) << "value" << std::setw(12)
            << "tolerance" << "result\n";
  for (const auto& c : table) {
    all = all && c.pass;
    std::cout << std::left << std::setw(58) << c.name << std::setw(14) << std::setprecision(3)
              << c.value << std::setw(12) << c.tolerance << (c.pass ? "PASS" : "FAIL") << '\n';
  }
  std::cout << (all ? "all checks passed\n" : "validation FAILED\n");
  return all ? ok : validation_error;
}

int cmd_fit_rabi(const std::string& path, double skip_ns) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  const auto record = read_csv(in);
  std::vector<double> t, l;
  for (const auto& row : record.rows) {
    if (row.t_ns < skip_ns) continue;
    t.push_back(row.t_ns);
    l.push_back(row.angular_momentum);
  }
  const auto fit = fit_rabi(t, l);
  std::cout << std::setprecision(6) << "period_ns " << fit.period_ns << '\n'
            << "angular_frequency_rad_per_ns " << fit.angular_frequency << '\n'
            << "effective_coupling_meV " << fit.coupling_meV << '\n'
            << "amplitude " << fit.amplitude << '\n'
            << "offset " << fit.offset << '\n'
            << "rms_residual " << fit.rms_residual << '\n'
            << "peak_fraction " << fit.peak_fraction << '\n';
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Electron-phonon dynamics of a quantum dot on a suspended plate"};
  app.require_subcommand(1);

  CommonOptions common;
  auto* modes = app.add_subcommand("modes", "solve the plate modes and write the mode table");
  std::string modes_out;
  add_common(modes, common);
  modes->add_option("-o,--out", modes_out, "mode table path (default stdout)");

  auto* basis = app.add_subcommand("basis", "build basis and Hamiltonian, print diagnostics as JSON");
  add_common(basis, common);

  auto* evolve = app.add_subcommand("evolve", "run a scenario and write trajectory CSV plus metadata");
  add_common(evolve, common);

  auto* validate = app.add_subcommand("validate", "run the oracle suite and print a pass/fail table");
  oracle::ValidationOptions vopts;
  validate->add_option("--accuracy", vopts.accuracy, "Chebyshev accuracy for the oracle comparisons");
  validate->add_option("--t-final", vopts.t_final_ns, "propagation horizon in ns");
  validate->add_option("--seed", vopts.seed, "seed for random vectors and matrices");

  auto* qfactor = app.add_subcommand("qfactor", "print the closed-form Q estimates");
  add_common(qfactor, common);

  auto* fit = app.add_subcommand("fit-rabi", "fit a Rabi period to the L_el column of a trajectory CSV");
  std::string csv_path;
  double skip_ns = 0.0;
  fit->add_option("csv", csv_path, "trajectory CSV")->required();
  fit->add_option("--skip-ns", skip_ns, "ignore samples before this time");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? ok : config_error;
  }

  try {
    if (*modes) return cmd_modes(load_config(modes, common), modes_out);
    if (*basis) {
      const auto system = prepare_system(load_config(basis, common), &std::cerr);
      std::cout << system_metadata_json(system) << '\n';
      return ok;
    }
    if (*evolve) {
      run_evolve(load_config(evolve, common), &std::cerr);
      return ok;
    }
    if (*validate) return cmd_validate(vopts);
    if (*qfactor) {
      const auto q = q_estimates(load_config(qfactor, common).plate);
      std::cout << std::fixed << std::setprecision(1) << "Q_PJ " << q.q_pj << '\n'
                << "Q_JI " << q.q_ji << '\n';
      return ok;
    }
    if (*fit) return cmd_fit_rabi(csv_path, skip_ns);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return config_error;
  } catch (const ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << '\n';
    return validation_error;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return numerical_error;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return numerical_error;
  }
  return ok;
}
