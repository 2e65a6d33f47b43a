#include "qdnems/run.hpp"

#include <openssl/evp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <json.hpp>
#include <memory>
#include <ostream>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

MagneticConfig field_of(const RunConfig& config) {
  return MagneticConfig::make(config.field_gauss, config.dot.effective_mass);
}

nlohmann::json finite_or_string(double x) {
  if (std::isfinite(x)) return x;
  return std::isnan(x) ? "nan" : (x > 0 ? "infinite" : "-infinite");
}

}  // namespace

double detuned_quantum(const RunConfig& config) {
  if (!config.detuned_mode) throw ConfigError("no detuned mode configured");
  const auto field = field_of(config);
  const double gap = electron_energy(1, 1, config.dot, field) - electron_energy(0, 1, config.dot, field);
  return gap / (1.0 + config.detuned_mode->delta_fraction);
}

ModeTable build_modes(const RunConfig& config, ConvergenceReport* report) {
  auto modes = solve_modes(config.plate, config.ritz, config.mode_count, config.quality_factor, report);
  if (config.detuned_mode) {
    retune_mode(modes, static_cast<std::size_t>(config.detuned_mode->index - 1), detuned_quantum(config));
  }
  return modes;
}

std::size_t estimate_run_memory(const RunConfig& config, std::size_t electron_count) {
  const std::size_t dim = config.caps.size_cap;
  const auto modes = static_cast<std::size_t>(config.mode_count);
  const std::size_t workers = config.workers > 0 ? config.workers : worker_count();
  const auto candidates = static_cast<std::size_t>(config.caps.oversample * static_cast<double>(dim));
  // Each worker owns the state, its initial copy and three recurrence vectors.
  return estimate_memory_bytes(dim, electron_count, modes) + workers * 5 * dim * sizeof(cplx) +
         candidates * (modes + 2 * sizeof(double));
}

void check_memory_budget(const RunConfig& config, std::size_t electron_count) {
  const double need_MB = static_cast<double>(estimate_run_memory(config, electron_count)) / 1048576.0;
  if (need_MB > config.memory_budget_MB) {
    std::ostringstream msg;
    msg << std::fixed << std::setprecision(0) << "estimated memory " << need_MB
        << " MB exceeds run.memory_budget_MB = " << config.memory_budget_MB
        << "; lower basis.size_cap or raise the budget";
    throw ConfigError(msg.str());
  }
}

PreparedSystem prepare_system(const RunConfig& config, std::ostream* log) {
  config.validate();
  const auto start = Clock::now();
  auto note = [&](const std::string& what) {
    if (log) *log << "[" << std::fixed << std::setprecision(2) << seconds_since(start) << " s] " << what << '\n';
  };

  const auto field = field_of(config);
  std::optional<WeakFieldReport> weak;
  if (config.field_gauss > 0.0) {
    weak = validate_weak_field(config.dot, field);
    if (!weak->pass) {
      throw WeakFieldError("weak-field approximation violated: l_B / R = " +
                               std::to_string(weak->length_ratio),
                           weak->length_ratio);
    }
  }
  auto electrons = ElectronBasis::build(config.dot, field, config.l_max, config.nu_max,
                                        config.kinetic_cutoff_meV);
  check_memory_budget(config, electrons.size());

  ConvergenceReport convergence;
  auto modes = build_modes(config, &convergence);
  note("modes solved: f1 = " + std::to_string(modes.modes.front().frequency_GHz) + " GHz");

  CouplingDiagnostics coupling;
  auto tensor = build_coupling_tensor(electrons, modes, config.dot, config.coupling, &coupling);
  if (config.target_coupling_meV) {
    calibrate_scale(tensor, *config.target_coupling_meV, config.calibration);
  }
  std::vector<Parity> parities;
  for (const auto& m : modes.modes) parities.push_back(m.parity);
  const bool centred = config.dot.offset_x_nm == 0.0 && config.dot.offset_y_nm == 0.0;
  const double quadrature_shift = coupling.quadrature_shift;
  coupling = diagnose(tensor, centred, parities);
  coupling.quadrature_shift = quadrature_shift;
  note("coupling built: max |g| = " + std::to_string(coupling.max_abs_meV) + " meV");
  if (log && !coupling.plausible) {
    *log << "warning: max |g| " << std::defaultfloat << std::setprecision(4) << coupling.max_abs_meV
         << " meV lies outside the 1e-7..1e-4 meV window\n";
  }

  std::vector<double> quanta;
  for (const auto& m : modes.modes) quanta.push_back(m.quantum_meV);
  BasisCaps caps = config.caps;
  caps.required = {{config.scenario.initial_l, config.scenario.initial_nu, {}}};
  for (const int l : {1, -1}) {
    if (l != config.scenario.initial_l || config.scenario.initial_nu != 1) caps.required.push_back({l, 1, {}});
  }
  BasisDiagnostics basis_report;
  auto basis = enumerate_basis(electrons, quanta, caps, &basis_report);
  note("basis: " + std::to_string(basis.size()) + " states, " + std::to_string(basis.config_count()) +
       " phonon configurations");

  auto hamiltonian = assemble_hamiltonian(basis, tensor, config.drop_tolerance_meV);
  const auto bounds = estimate_bounds(hamiltonian, config.bound_margin);
  auto plan = plan_step(bounds, config.dt_ns, config.accuracy);
  note("hamiltonian: " + std::to_string(hamiltonian.off_diagonal_count()) + " couplings, K = " +
       std::to_string(plan.order) + ", tau = " + std::to_string(plan.tau));
  auto relaxation = make_relaxation(modes, config.thermal.temperature_mK);

  return PreparedSystem{config,
                        std::move(modes),
                        convergence,
                        std::move(electrons),
                        field,
                        weak,
                        std::move(tensor),
                        coupling,
                        std::move(basis),
                        basis_report,
                        std::move(hamiltonian),
                        bounds,
                        std::move(plan),
                        std::move(relaxation),
                        seconds_since(start)};
}

std::string sha256_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 initialisation failed");
  }
  std::vector<char> buffer(1 << 16);
  while (in) {
    in.read(buffer.data(), static_cast<std::streamsize>(buffer.size()));
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buffer.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);
  std::ostringstream hex;
  for (unsigned int i = 0; i < length; ++i) hex << std::hex << std::setw(2) << std::setfill('0') << int(digest[i]);
  return hex.str();
}

namespace {

nlohmann::json system_json(const PreparedSystem& s) {
  nlohmann::json j;
  j["config"] = describe_config(s.config);
  j["modes"] = {{"count", s.modes.size()},
                {"f1_GHz", s.modes.modes.front().frequency_GHz},
                {"ritz_refined", {s.convergence.refined.nx, s.convergence.refined.ny}},
                {"max_relative_shift_on_refinement", s.convergence.max_relative_shift}};
  j["electrons"] = {{"count", s.electrons.size()}};
  if (s.weak_field) {
    j["weak_field"] = {{"length_ratio", s.weak_field->length_ratio},
                       {"diamagnetic_to_zeeman", s.weak_field->diamagnetic_to_zeeman},
                       {"diamagnetic_to_zeeman_ground_state", s.weak_field->diamagnetic_to_zeeman_ground_state},
                       {"energy_error_bound", s.weak_field->energy_error_bound}};
  }
  j["coupling"] = {{"scale", s.tensor.scale()},
                   {"max_abs_meV", s.coupling.max_abs_meV},
                   {"hermiticity_defect_meV", s.coupling.hermiticity_defect_meV},
                   {"raw_asymmetry_meV", s.coupling.raw_asymmetry_meV},
                   {"quadrature_shift", s.coupling.quadrature_shift},
                   {"effective_coupling_meV", s.coupling.effective_coupling_meV},
                   {"plausible", s.coupling.plausible}};
  if (s.coupling.parity_violation_meV) j["coupling"]["parity_violation_meV"] = *s.coupling.parity_violation_meV;
  j["basis"] = {{"dimension", s.basis.size()},
                {"candidates", s.basis_report.candidates},
                {"phonon_configs", s.basis_report.phonon_configs},
                {"candidate_cutoff_meV", s.basis_report.candidate_cutoff_meV},
                {"lowest_energy_meV", s.basis_report.lowest_energy_meV},
                {"highest_energy_meV", s.basis_report.highest_energy_meV},
                {"window", s.config.caps.window == WindowPolicy::bottom ? "bottom" : "centered"},
                {"drop_tolerance_meV", s.config.drop_tolerance_meV},
                {"off_diagonal_entries", s.hamiltonian.off_diagonal_count()},
                {"max_row_degree", s.hamiltonian.max_row_degree()},
                {"hamiltonian_bytes", s.hamiltonian.memory_bytes()}};
  j["spectral_bounds"] = {{"e_min_meV", s.bounds.e_min},
                          {"e_max_meV", s.bounds.e_max},
                          {"centre_meV", s.bounds.centre()},
                          {"width_meV", s.bounds.width()},
                          {"margin", s.bounds.margin}};
  j["plan"] = {{"dt_ns", s.plan.dt_ns},
               {"accuracy", s.plan.accuracy},
               {"tau", s.plan.tau},
               {"order_K", s.plan.order},
               {"K_over_tau", s.plan.order_ratio()},
               {"matvecs_per_step", s.plan.matvecs_per_step()}};
  j["relaxation"] = {{"enabled", s.relaxation.enabled},
                     {"quality_factor", finite_or_string(s.modes.quality_factor)},
                     {"scheme", s.config.scenario.dissipation == DissipationMode::mean_reverting
                                    ? "mean_reverting"
                                    : "literal"}};
  j["setup_seconds"] = s.setup_seconds;
  return j;
}

}  // namespace

std::string system_metadata_json(const PreparedSystem& system) { return system_json(system).dump(2); }

EvolveOutcome run_evolve(const RunConfig& config, std::ostream* log) {
  const auto start = Clock::now();
  auto system = prepare_system(config, log);
  const auto& cfg = system.config;

  EvolveOutcome out;
  std::vector<double> quanta;
  for (const auto& m : system.modes.modes) quanta.push_back(m.quantum_meV);
  ThermalFieldSpec thermal = cfg.thermal;
  if (thermal.temperature_mK <= 0.0) thermal.policy = RealizationPolicy::vacuum;
  out.ensemble = enumerate_thermal_states(quanta, thermal);
  const std::size_t enumerated = out.ensemble.members.size();
  std::vector<ThermalMember> removed;
  const double excluded = restrict_to_basis(out.ensemble, cfg.scenario.initial_l, cfg.scenario.initial_nu,
                                            system.basis, &removed);
  if (log) {
    *log << "ensemble: " << out.ensemble.members.size() << " members (" << policy_name(thermal.policy)
         << "), thermal probability covered " << out.ensemble.covered << '\n';
    if (!removed.empty()) {
      *log << "warning: " << removed.size() << " members outside the basis dropped (weight "
           << excluded << ")\n";
    }
  }

  Scenario scenario = cfg.scenario;
  scenario.dt_ns = cfg.dt_ns;
  scenario.workers = cfg.workers;
  out.result = run_ensemble(out.ensemble, scenario, system.hamiltonian, system.basis, system.plan,
                            system.relaxation);

  const std::filesystem::path dir(cfg.output_dir);
  std::filesystem::create_directories(dir);
  auto write_file = [&](const std::filesystem::path& path, auto&& writer) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path.string());
    writer(f);
    if (!f) throw ConfigError("write failed for " + path.string());
  };
  out.trajectory_csv = dir / "trajectory.csv";
  write_file(out.trajectory_csv, [&](std::ostream& f) { write_csv(f, out.result.average); });
  nlohmann::json checksums;
  checksums["trajectory.csv"] = sha256_file(out.trajectory_csv);
  for (std::size_t m = 0; m < out.result.members.size(); ++m) {
    char name[32];
    std::snprintf(name, sizeof name, "member_%04zu.csv", m);
    write_file(dir / name, [&](std::ostream& f) { write_csv(f, out.result.members[m]); });
    checksums[name] = sha256_file(dir / name);
  }
  write_file(dir / "modes.txt", [&](std::ostream& f) { write_mode_table(f, system.modes); });
  checksums["modes.txt"] = sha256_file(dir / "modes.txt");
  write_file(dir / "coupling.txt", [&](std::ostream& f) { write_coupling_table(f, system.tensor); });
  checksums["coupling.txt"] = sha256_file(dir / "coupling.txt");

  out.wall_seconds = seconds_since(start);
  auto meta = system_json(system);
  nlohmann::json members = nlohmann::json::array();
  for (const auto& m : out.ensemble.members) {
    members.push_back({{"occupations", m.occupations}, {"weight", m.weight}, {"probability", m.probability}});
  }
  meta["ensemble"] = {{"mode", "weighted ensemble of Fock configurations"},
                      {"policy", policy_name(thermal.policy)},
                      {"temperature_mK", thermal.temperature_mK},
                      {"enumerated_members", enumerated},
                      {"members", out.ensemble.members.size()},
                      {"excluded_outside_basis", removed.size()},
                      {"excluded_weight", excluded},
                      {"covered_probability", out.ensemble.covered},
                      {"discarded_probability", out.ensemble.discarded},
                      {"bose_einstein", out.ensemble.bose_einstein},
                      {"member_mean", out.ensemble.member_mean},
                      {"tail_bound", out.ensemble.tail_bound},
                      {"member_list", members}};
  meta["scenario"] = {{"name", cfg.scenario_name},
                      {"initial_l", scenario.initial_l},
                      {"initial_nu", scenario.initial_nu},
                      {"t_final_ns", scenario.t_final_ns},
                      {"stride", scenario.stride},
                      {"output_interval_ns", static_cast<double>(scenario.stride) * cfg.dt_ns}};
  if (cfg.detuned_mode) {
    meta["scenario"]["detuned_mode"] = {{"index", cfg.detuned_mode->index},
                                        {"delta_fraction", cfg.detuned_mode->delta_fraction},
                                        {"quantum_meV", detuned_quantum(cfg)}};
  }
  meta["evolution"] = {{"steps", out.result.stats.steps},
                       {"matvecs", out.result.stats.matvecs},
                       {"max_norm_drift", out.result.stats.max_norm_drift},
                       {"stuck_mode_events", out.result.stats.stuck_mode_events}};
  meta["checksums_sha256"] = checksums;
  meta["wall_seconds"] = out.wall_seconds;
  meta["versions"] = {{"qdnems", "0.1.0"}, {"compiler", __VERSION__}};
  out.metadata_json = dir / "metadata.json";
  write_file(out.metadata_json, [&](std::ostream& f) { f << meta.dump(2) << '\n'; });
  if (log) *log << "wrote " << out.trajectory_csv.string() << " and " << out.metadata_json.string() << '\n';
  return out;
}

}  // namespace qdnems
