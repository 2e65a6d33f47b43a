#pragma once

// Pipeline orchestration shared by the CLI and the acceptance suite.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "qdnems/chebyshev.hpp"
#include "qdnems/config.hpp"
#include "qdnems/coupling.hpp"
#include "qdnems/electron.hpp"
#include "qdnems/plate.hpp"
#include "qdnems/product_basis.hpp"
#include "qdnems/thermal.hpp"

namespace qdnems {

/// Mode table for a config: solve, apply Q, apply the optional detuning.
ModeTable build_modes(const RunConfig& config, ConvergenceReport* report = nullptr);

/// Quantum that puts a mode delta_fraction * hbar omega below the (1,1)-(0,1) gap.
double detuned_quantum(const RunConfig& config);

/// Everything needed to propagate, built once per run.
struct PreparedSystem {
  RunConfig config;
  ModeTable modes;
  ConvergenceReport convergence;
  ElectronBasis electrons;
  MagneticConfig field;
  std::optional<WeakFieldReport> weak_field;
  CouplingTensor tensor;
  CouplingDiagnostics coupling;
  ProductBasis basis;
  BasisDiagnostics basis_report;
  SparseHamiltonian hamiltonian;
  SpectralBounds bounds;
  ChebyshevPlan plan;
  RelaxationSpec relaxation;
  double setup_seconds = 0.0;
};

/// Bytes a run of this config is expected to need, before anything is built.
std::size_t estimate_run_memory(const RunConfig& config, std::size_t electron_count);

/// Throws ConfigError, quoting the estimate, when it exceeds the budget.
void check_memory_budget(const RunConfig& config, std::size_t electron_count);

/// Builds modes, electrons, coupling, basis, Hamiltonian and plan. The basis
/// always contains the scenario's initial state in the bath vacuum.
PreparedSystem prepare_system(const RunConfig& config, std::ostream* log = nullptr);

struct EvolveOutcome {
  ThermalEnsemble ensemble;
  EnsembleResult result;
  std::filesystem::path trajectory_csv;
  std::filesystem::path metadata_json;
  double wall_seconds = 0.0;
};

/// End-to-end scenario run: writes trajectory.csv (plus member_XXXX.csv when
/// requested) and metadata.json into the output directory.
EvolveOutcome run_evolve(const RunConfig& config, std::ostream* log = nullptr);

/// Hex SHA-256 of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

/// JSON text describing the prepared system (config, basis, bounds, plan).
std::string system_metadata_json(const PreparedSystem& system);

}  // namespace qdnems
