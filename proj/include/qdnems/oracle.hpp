#pragma once

// Independent reference solutions for small instances. Clarity over speed:
// dense eigendecompositions, closed forms, and direct summation.

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qdnems/chebyshev.hpp"
#include "qdnems/coupling.hpp"
#include "qdnems/observables.hpp"
#include "qdnems/plate.hpp"
#include "qdnems/product_basis.hpp"

namespace qdnems::oracle {

inline constexpr std::size_t max_dense_dimension = 2048;

/// Dense Hermitian matrix with its eigendecomposition.
class DenseInstance {
 public:
  /// Throws ConfigError above max_dense_dimension, NumericalError if the
  /// decomposition does not reconstruct H to 1e-10 relative.
  explicit DenseInstance(Eigen::MatrixXcd hamiltonian);
  static DenseInstance from_sparse(const SparseHamiltonian& h);

  std::size_t dimension() const noexcept { return static_cast<std::size_t>(h_.rows()); }
  const Eigen::MatrixXcd& hamiltonian() const noexcept { return h_; }
  const Eigen::VectorXd& eigenvalues() const noexcept { return values_; }
  const Eigen::MatrixXcd& eigenvectors() const noexcept { return vectors_; }
  /// max-row-sum norm of H - V diag(E) V^dagger, relative to that of H.
  double reconstruction_error() const noexcept { return reconstruction_; }

  /// psi(t) = V exp(-i E t / hbar) V^dagger psi0.
  std::vector<cplx> exact_propagate(std::span<const cplx> psi0, double t_ns) const;

 private:
  Eigen::MatrixXcd h_;
  Eigen::VectorXd values_;
  Eigen::MatrixXcd vectors_;
  double reconstruction_ = 0.0;
};

/// CSR form of a dense Hermitian matrix (exact zeros are skipped).
SparseHamiltonian sparse_from_dense(const Eigen::MatrixXcd& h);

/// Random Hermitian matrix: diagonal uniform in [0, spread], off-diagonal
/// entries with |z| <= coupling, each present with probability density.
Eigen::MatrixXcd random_hermitian(std::size_t dimension, std::uint64_t seed, double spread_meV,
                                  double coupling_meV, double density = 0.05);

struct TwoLevelPopulations {
  double upper = 1.0;  // |e, n>
  double lower = 0.0;  // |g, n+1>
};

/// Resonance-manifold solution for a start in |e, n>: transfer probability
/// 4 g^2 (n+1) / (hbar Omega)^2 sin^2(Omega t / 2), with
/// Omega = sqrt(detuning^2 + 4 g^2 (n+1)) / hbar.
TwoLevelPopulations jaynes_cummings_reference(double coupling_meV, double detuning_meV, int n,
                                              double t_ns);

/// A two-state slice of the real pipeline: electrons (0,1) and (1,1), the plate
/// mode at `position` retuned to the requested detuning from their gap, the
/// coupling built for that retuned mode, and the product basis restricted to
/// the manifold {|(1,1), n>, |(0,1), n+1>}.
struct TwoLevelInstance {
  ProductBasis basis;
  SparseHamiltonian hamiltonian;
  double coupling_meV = 0.0;  // |g((0,1), mode, (1,1))|
  double detuning_meV = 0.0;  // E(1,1) - E(0,1) - hbar omega
  std::uint32_t upper_index = 0;
  std::uint32_t lower_index = 0;
};
TwoLevelInstance two_level_instance(const ModeTable& modes, std::size_t position,
                                    double detuning_meV, int n, const DotGeometry& dot = {},
                                    const CouplingConfig& config = {});

/// Small pipeline instance: electrons with |l| <= 2, nu = 1, the first
/// `mode_count` plate modes, calibrated coupling, bottom window of `cap` states.
struct PipelineInstance {
  ElectronBasis electrons;
  ModeTable modes;
  CouplingTensor tensor;
  ProductBasis basis;
  SparseHamiltonian hamiltonian;
};
PipelineInstance pipeline_instance(std::size_t cap = 256, int mode_count = 2,
                                   int max_occupation = 15, double target_coupling_meV = 5e-5);

/// Every observable of one state, by direct summation over basis states with
/// an ordered map from occupation vectors (no basis index maps).
struct BruteForceObservables {
  Eigen::MatrixXcd rho;
  double angular_momentum = 0.0;  // sum l |C|^2 in amplitude space
  double purity = 0.0;            // Tr rho^2 by explicit product
  double electron_energy_meV = 0.0;
  double inversion = 0.0;
  cplx coherence = 0.0;  // rho(-1, +1)
  cplx overlap = 0.0;
  std::vector<double> occupation_mean;
  std::vector<double> occupation_variance;
};
BruteForceObservables brute_force_observables(std::span<const cplx> psi, std::span<const cplx> psi0,
                                              const ProductBasis& basis);

struct Discrepancy {
  std::string observable;
  double difference = 0.0;
};
/// Compares the optimized observables against the brute-force ones and
/// returns every entry above tolerance (empty when they agree).
std::vector<Discrepancy> compare_observables(std::span<const cplx> psi,
                                             std::span<const cplx> psi0,
                                             const ProductBasis& basis, double tolerance = 1e-12);

/// max_i |a_i - b_i|.
double max_amplitude_error(std::span<const cplx> a, std::span<const cplx> b);

/// Runs Chebyshev steps from psi0 to t_final and returns the largest
/// amplitude deviation from the dense exact solution at any step.
double chebyshev_vs_exact(const SparseHamiltonian& h, const DenseInstance& dense,
                          std::span<const cplx> psi0, double dt_ns, double t_final_ns,
                          double accuracy);

struct ValidationCheck {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct ValidationOptions {
  double dt_ns = 0.25;
  double t_final_ns = 100.0;
  /// The oracle comparisons run at this accuracy; it has to sit well below
  /// the 1e-8 amplitude tolerance for the comparison to be meaningful.
  double accuracy = 1e-12;
  std::uint64_t seed = 7;
};

/// The pass/fail table behind the `validate` subcommand.
std::vector<ValidationCheck> run_validation_suite(const ValidationOptions& options = {});

}  // namespace qdnems::oracle
