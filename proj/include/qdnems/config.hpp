#pragma once

// Run configuration: INI-style sections with unit-suffixed keys, named
// scenario presets, and `section.key=value` overrides.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qdnems/chebyshev.hpp"
#include "qdnems/coupling.hpp"
#include "qdnems/electron.hpp"
#include "qdnems/plate.hpp"
#include "qdnems/product_basis.hpp"
#include "qdnems/thermal.hpp"

namespace qdnems {

/// Moves one plate mode just below the (1,1)-(0,1) gap so that
/// gap - hbar omega = delta_fraction * hbar omega.
struct DetunedMode {
  int index = 0;  // 1-based position in the solved spectrum
  double delta_fraction = 0.004;
};

struct RunConfig {
  // [plate]
  PlateSpec plate;
  RitzSize ritz;
  int mode_count = 8;
  double quality_factor = 100.0;  // infinity disables relaxation

  // [dot] and [field]
  DotGeometry dot;
  double field_gauss = 0.0;

  // [coupling]
  CouplingConfig coupling;
  /// Calibration target; nullopt keeps overall_scale as given.
  std::optional<double> target_coupling_meV = 5e-5;
  CalibrationMode calibration = CalibrationMode::effective;

  // [basis]
  int l_max = 4;
  int nu_max = 2;
  std::optional<double> kinetic_cutoff_meV;
  BasisCaps caps;
  double drop_tolerance_meV = 1e-14;

  // [propagation]
  double dt_ns = 0.25;
  double accuracy = 5e-5;
  double bound_margin = 0.05;

  // [thermal] and [scenario]
  ThermalFieldSpec thermal;
  Scenario scenario;
  std::string scenario_name = "custom";
  std::optional<DetunedMode> detuned_mode;

  // [output] and [run]
  std::string output_dir = "qdnems-out";
  std::size_t workers = 0;  // 0: QDNEMS_WORKERS or hardware concurrency
  double memory_budget_MB = 3072.0;

  /// Cross-field checks; throws ConfigError.
  void validate() const;
};

/// Names of the shipped presets.
std::vector<std::string> preset_names();
/// Applies a preset on top of the current values. Throws ConfigError
/// (listing the valid names) for an unknown preset.
void apply_preset(RunConfig& config, const std::string& name);

/// Flat `section.key -> value` assignments.
using Assignments = std::map<std::string, std::string>;

/// Parses an INI stream into assignments; duplicate keys are an error.
Assignments parse_ini(std::istream& in);
/// `section.key=value` (with or without leading dashes).
std::pair<std::string, std::string> parse_override(const std::string& text);

/// Every accepted `section.key`.
std::vector<std::string> valid_keys();

/// Defaults, then the preset named by scenario.name (if any), then every other
/// assignment. Unknown keys raise ConfigError listing the valid keys.
RunConfig resolve_config(const Assignments& assignments);

/// All resolved values as assignments (round-trips through resolve_config).
Assignments describe_config(const RunConfig& config);

}  // namespace qdnems
