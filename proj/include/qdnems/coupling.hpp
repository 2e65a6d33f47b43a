#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <vector>

#include "qdnems/electron.hpp"
#include "qdnems/plate.hpp"

namespace qdnems {

struct CouplingConfig {
  double deformation_potential_eV = 9.0;
  /// Height of the electron sheet above the midplane; t/4 when unset.
  std::optional<double> layer_offset_nm;
  double overall_scale = 1.0;
  int radial_order = 48;   // Gauss-Legendre nodes on [0, R]
  int angular_order = 64;  // trapezoid nodes on (0, pi), mirrored onto (-pi, 0)

  double layer_offset(const PlateSpec& plate) const;
  void validate(const PlateSpec& plate) const;  // throws ConfigError
};

enum class CalibrationMode {
  /// Second-order (one virtual phonon) coupling between (1,1) and (-1,1) in
  /// the bath vacuum equals the target.
  effective,
  /// Largest direct element |g(+1, alpha, -1)| equals the target.
  direct,
};

/// g[k', alpha, k] in meV, for one electron basis and one mode table.
class CouplingTensor {
 public:
  CouplingTensor() = default;
  CouplingTensor(std::vector<ElectronState> electrons, std::vector<double> quanta_meV,
                 std::vector<std::complex<double>> raw, double scale);

  std::size_t electron_count() const noexcept { return electrons_.size(); }
  std::size_t mode_count() const noexcept { return quanta_.size(); }
  const std::vector<ElectronState>& electrons() const noexcept { return electrons_; }
  const std::vector<double>& quanta_meV() const noexcept { return quanta_; }

  std::complex<double> operator()(std::size_t k_out, std::size_t mode, std::size_t k_in) const {
    return values_[(k_out * quanta_.size() + mode) * electrons_.size() + k_in];
  }
  /// Value at unit overall scale.
  std::complex<double> raw(std::size_t k_out, std::size_t mode, std::size_t k_in) const {
    return raw_[(k_out * quanta_.size() + mode) * electrons_.size() + k_in];
  }

  double scale() const noexcept { return scale_; }
  /// Replaces the overall scale; values are recomputed from the raw table.
  void set_scale(double scale);

  double max_abs() const;
  /// max |g(k', a, k) - conj(g(k, a, k'))|.
  double hermiticity_defect() const;
  /// Largest asymmetry seen before symmetrization, meV at unit scale.
  double raw_asymmetry() const noexcept { return raw_asymmetry_; }
  void set_raw_asymmetry(double a) noexcept { raw_asymmetry_ = a; }

  std::optional<std::size_t> electron_index(int l, int nu) const;

 private:
  std::vector<ElectronState> electrons_;
  std::vector<double> quanta_;
  std::vector<std::complex<double>> raw_;
  std::vector<std::complex<double>> values_;
  double scale_ = 1.0;
  double raw_asymmetry_ = 0.0;
};

/// One element of the deformation-potential overlap with the given mode, meV,
/// at the configured overall scale.
std::complex<double> dp_overlap(const ElectronState& k_out, const PhononMode& mode,
                                const ElectronState& k_in, const DotGeometry& dot,
                                const ModeTable& table, const CouplingConfig& config);

struct CouplingDiagnostics {
  double max_abs_meV = 0.0;
  double raw_asymmetry_meV = 0.0;
  double hermiticity_defect_meV = 0.0;
  /// Centred dot only: largest imaginary part on even modes or real part on
  /// odd modes.
  std::optional<double> parity_violation_meV;
  double quadrature_shift = 0.0;  // relative change under doubled orders
  double effective_coupling_meV = 0.0;
  bool plausible = true;  // max |g| inside the plausibility window
};

/// Builds every element, then symmetrizes. Throws NumericalError if doubling
/// both quadrature orders changes the tensor by more than 1e-8 relative.
CouplingTensor build_coupling_tensor(const ElectronBasis& electrons, const ModeTable& table,
                                     const DotGeometry& dot, const CouplingConfig& config,
                                     CouplingDiagnostics* diagnostics = nullptr);

/// Magnitude of the one-phonon virtual-process coupling between (1,1) and
/// (-1,1) in the bath vacuum, from zero-field energies. Throws if either state
/// is missing.
double two_level_effective_coupling(const CouplingTensor& tensor);

/// Sets the overall scale so the chosen channel equals target_meV and returns
/// the new scale. Computed from the raw table, so repeated calls are exact
/// no-ops.
double calibrate_scale(CouplingTensor& tensor, double target_meV,
                       CalibrationMode mode = CalibrationMode::effective);

struct PlausibilityWindow {
  double lo_meV = 1e-7;
  double hi_meV = 1e-4;
};
CouplingDiagnostics diagnose(const CouplingTensor& tensor, bool centred_dot,
                             const std::vector<Parity>& parities, PlausibilityWindow window = {});

/// For fixed mode: A = Re g, and B the real source of the imaginary part with
/// g = A + i^sign(l'-l) B. Both symmetric.
struct BlockViews {
  Eigen::MatrixXd real_part;
  Eigen::MatrixXd imag_part;
};
BlockViews block_views(const CouplingTensor& tensor, std::size_t mode);

void write_coupling_table(std::ostream& out, const CouplingTensor& tensor);
CouplingTensor read_coupling_table(std::istream& in);

}  // namespace qdnems
