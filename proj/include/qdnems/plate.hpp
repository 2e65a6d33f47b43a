#pragma once

#include <Eigen/Dense>
#include <iosfwd>
#include <limits>
#include <memory>
#include <vector>

namespace qdnems {

struct Material {
  double density_kg_m3 = 2329.0;
  double youngs_modulus_GPa = 169.0;
  double poisson_ratio = 0.28;
};

/// Rectangular plate clamped along one full-width edge (x = 0), free on the
/// other three. x runs along the length from the clamp, y across the width
/// from the midline.
struct PlateSpec {
  double width_nm = 1200.0;
  double length_nm = 200.0;
  double thickness_nm = 50.0;
  Material material;

  void validate() const;  // throws ConfigError
  double flexural_rigidity_J() const;
  double volume_m3() const;
};

enum class Parity { even, odd };
const char* parity_name(Parity p);

/// Product basis X_i(x) Y_j(y): clamped-free beam functions along the length,
/// free-free functions (with the two rigid-body terms) across the width. Every
/// function has unit mean square. Width functions have definite parity, so the
/// eigenproblem splits into independent even and odd blocks.
class RitzBasis {
 public:
  RitzBasis(const PlateSpec& plate, int nx, int ny);

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  int size() const noexcept { return nx_ * ny_; }
  const PlateSpec& plate() const noexcept { return plate_; }

  /// d-th derivative (d <= 3) with respect to xi = x / l.
  double length_function(int i, double xi, int d) const;
  /// d-th derivative (d <= 3) with respect to s = 2 y / w.
  double width_function(int j, double s, int d) const;
  Parity width_parity(int j) const;

  /// Mean-measure mass matrix over the full (i * ny + j) coefficient layout.
  const Eigen::MatrixXd& mass_matrix() const noexcept { return mass_; }
  /// Stiffness matrix such that omega^2 = D / (rho t) * lambda, lengths in m.
  const Eigen::MatrixXd& stiffness_matrix() const noexcept { return stiffness_; }

 private:
  PlateSpec plate_;
  int nx_;
  int ny_;
  std::vector<double> beta_;        // clamped-free wavenumbers
  std::vector<double> sigma_;       // (cosh b + cos b) / (sinh b + sin b)
  std::vector<double> one_minus_sigma_;
  std::vector<double> x_norm_;
  std::vector<double> kappa_;       // width wavenumbers; index 0, 1 unused
  std::vector<double> y_norm_;
  Eigen::MatrixXd mass_;
  Eigen::MatrixXd stiffness_;

  double raw_length_function(int i, double xi, int d) const;
  double raw_width_function(int j, double s, int d) const;
};

struct PhononMode {
  int index = 0;  // 1-based position in ascending frequency order
  double frequency_GHz = 0.0;
  double quantum_meV = 0.0;
  Parity parity = Parity::even;
  /// Ritz coefficients in the full i * ny + j layout; entries on width
  /// functions of the other parity are exactly zero.
  std::vector<double> coefficients;
  double gamma_meV = 0.0;  // quantum / Q
};

struct ModeTable {
  PlateSpec plate;
  std::shared_ptr<const RitzBasis> basis;
  std::vector<PhononMode> modes;
  double quality_factor = std::numeric_limits<double>::infinity();

  std::size_t size() const noexcept { return modes.size(); }
  void set_quality_factor(double q);  // refreshes every gamma
};

struct RitzSize {
  int nx = 8;
  int ny = 24;
};

/// Every mode of the basis, ascending in frequency. No convergence check.
std::vector<PhononMode> solve_ritz(const RitzBasis& basis);

struct ConvergenceReport {
  RitzSize refined;
  double max_relative_shift = 0.0;
};

/// Lowest count modes. Re-solves at doubled (nx, ny) and throws NumericalError
/// if any of them moves by 1% or more.
ModeTable solve_modes(const PlateSpec& plate, RitzSize size, int count,
                      double quality_factor = std::numeric_limits<double>::infinity(),
                      ConvergenceReport* report = nullptr);

/// Dimensionless deflection with unit mean square over the plate.
double mode_shape_eval(const ModeTable& table, const PhononMode& mode, double x_nm, double y_nm);
/// Laplacian of the dimensionless deflection, nm^-2.
double mode_laplacian(const ModeTable& table, const PhononMode& mode, double x_nm, double y_nm);

/// Laplacians of every mode at every point: rows are modes, columns points.
Eigen::MatrixXd mode_laplacians(const ModeTable& table, const std::vector<double>& x_nm,
                                const std::vector<double>& y_nm);

/// c_a^T M c_b with the mean-measure mass matrix.
double mass_inner_product(const ModeTable& table, const PhononMode& a, const PhononMode& b);

struct QEstimates {
  double q_pj = 0.0;  // 3.2 l^5 / (w t^4)
  double q_ji = 0.0;  // 2.17 (l / t)^3
};
QEstimates q_estimates(const PlateSpec& plate);

/// Q / (2 pi f), ns for f in GHz.
double mode_lifetime_ns(double frequency_GHz, double quality_factor);

/// Sets one mode's quantum and re-sorts the table, renumbering indices.
void retune_mode(ModeTable& table, std::size_t position, double quantum_meV);

void write_mode_table(std::ostream& out, const ModeTable& table);
ModeTable read_mode_table(std::istream& in);

}  // namespace qdnems
