#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "qdnems/product_basis.hpp"

namespace qdnems {

/// rho(a, b) = sum_n C(a, n) conj(C(b, n)) over the electron basis.
Eigen::MatrixXcd reduce_electron(std::span<const cplx> psi, const ProductBasis& basis);

double angular_momentum(const Eigen::MatrixXcd& rho, const std::vector<ElectronState>& electrons);
/// Tr rho^2, as the squared Frobenius norm.
double purity(const Eigen::MatrixXcd& rho);
double electron_energy_expectation(const Eigen::MatrixXcd& rho,
                                   const std::vector<ElectronState>& electrons);

/// Population of (1,1) minus population of (-1,1).
double inversion_amplitude(std::span<const cplx> psi, const ProductBasis& basis);

struct BlochCoherence {
  double modulus = 0.0;
  double phase = 0.0;  // arg rho(-1, +1) in (-pi, pi]; NaN when modulus < 1e-14
};
/// Coherence between (1,1) and (-1,1). Throws ConfigError if either is missing.
BlochCoherence bloch_coherence(const Eigen::MatrixXcd& rho,
                               const std::vector<ElectronState>& electrons);

struct ModeOccupations {
  std::vector<double> mean;
  std::vector<double> variance;
};
ModeOccupations mode_occupations(std::span<const cplx> psi, const ProductBasis& basis);

/// <psi0 | psi_t>.
cplx autocorrelation(std::span<const cplx> psi0, std::span<const cplx> psi_t);

/// Observables of one pure state, in the form that averages linearly.
struct StateObservables {
  Eigen::MatrixXcd rho;
  double inversion = 0.0;
  cplx overlap = 0.0;  // autocorrelation with the member's initial state
  std::vector<double> occupation;
};
StateObservables measure(std::span<const cplx> psi, std::span<const cplx> psi0,
                         const ProductBasis& basis);

struct TrajectoryRow {
  double t_ns = 0.0;
  double angular_momentum = 0.0;
  double purity = 0.0;
  double electron_energy_meV = 0.0;
  double autocorrelation_abs = 0.0;
  double inversion = 0.0;
  double coherence_abs = 0.0;
  double coherence_phase_over_pi = 0.0;  // NaN when undefined
  std::vector<double> occupation;
};

/// Collapses (possibly weight-averaged) observables into one output row.
TrajectoryRow summarize(double t_ns, const StateObservables& obs,
                        const std::vector<ElectronState>& electrons);

struct TrajectoryRecord {
  std::vector<TrajectoryRow> rows;
  std::size_t mode_count = 0;

  std::vector<double> times() const;
  std::vector<double> column_angular_momentum() const;
  std::vector<double> column_purity() const;
};

void write_csv(std::ostream& out, const TrajectoryRecord& record);
TrajectoryRecord read_csv(std::istream& in);
std::string csv_header(std::size_t mode_count);

/// Weighted pointwise average of member observables on a shared time grid.
/// Members are folded in call order, so the result is reproducible.
class EnsembleAccumulator {
 public:
  EnsembleAccumulator(std::size_t time_points, std::size_t electrons, std::size_t modes);
  void add(std::size_t time_index, double weight, const StateObservables& obs);
  /// Divides by the accumulated weight of each time point.
  std::vector<StateObservables> averages() const;
  double total_weight(std::size_t time_index) const { return weight_[time_index]; }

 private:
  std::vector<StateObservables> sums_;
  std::vector<double> weight_;
};

/// L(t) from the two-level Rabi formula; splitting_rad_per_ns is the bare
/// (1,1)/(-1,1) angular frequency, coupling_meV the effective coupling.
double rabi_model(double t_ns, double splitting_rad_per_ns, double coupling_meV);

struct RabiFit {
  double angular_frequency = 0.0;  // rad/ns
  double period_ns = 0.0;
  double coupling_meV = 0.0;  // hbar * omega / 2, from L = cos(2 g t / hbar)
  double amplitude = 0.0;     // sqrt(A^2 + B^2) of the fitted sinusoid
  double offset = 0.0;
  double rms_residual = 0.0;
  double peak_fraction = 0.0;  // share of the oscillating power in the peak bin
};

/// Fourier peak, then golden-section refinement of the least-squares
/// residual of A cos(w t) + B sin(w t) + c. Uniform samples required; throws
/// NumericalError when no dominant peak covers at least two periods.
RabiFit fit_rabi(const std::vector<double>& t_ns, const std::vector<double>& values);

/// Half the peak-to-peak swing over [t0, t0 + span].
double swing_amplitude(const std::vector<double>& t_ns, const std::vector<double>& values,
                       double t0, double span);

/// Mean over the final `fraction` of the samples.
double tail_mean(const std::vector<double>& values, double fraction = 0.25);

}  // namespace qdnems
