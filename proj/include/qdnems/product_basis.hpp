#pragma once

#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "qdnems/coupling.hpp"
#include "qdnems/electron.hpp"

namespace qdnems {

using Occupation = std::uint8_t;
using cplx = std::complex<double>;

enum class WindowPolicy {
  bottom,    // lowest unperturbed energies
  centered,  // closest to the anchor state's energy
};

/// A requested product state (electron (l, nu) and phonon occupations).
struct ProductLabel {
  int l = 1;
  int nu = 1;
  std::vector<int> occupations;  // empty means the bath vacuum
};

struct BasisCaps {
  int max_occupation = 40;
  std::size_t size_cap = 20000;
  double oversample = 1.5;
  WindowPolicy window = WindowPolicy::bottom;
  /// Must survive truncation; the first one anchors a centered window.
  std::vector<ProductLabel> required;
};

struct BasisDiagnostics {
  std::size_t candidates = 0;   // states generated before truncation
  std::size_t dimension = 0;
  std::size_t phonon_configs = 0;
  double candidate_cutoff_meV = 0.0;
  double lowest_energy_meV = 0.0;
  double highest_energy_meV = 0.0;
};

/// Energy-sorted electron x Fock product states. States sharing one phonon
/// configuration are grouped, which is what the partial trace needs.
class ProductBasis {
 public:
  static constexpr std::uint32_t npos = 0xffffffffu;

  ProductBasis(std::vector<ElectronState> electrons, std::vector<double> quanta_meV,
               int max_occupation);

  std::size_t size() const noexcept { return electron_of_.size(); }
  std::size_t mode_count() const noexcept { return quanta_.size(); }
  std::size_t electron_count() const noexcept { return electrons_.size(); }
  std::size_t config_count() const noexcept { return config_energy_.size(); }
  int max_occupation() const noexcept { return max_occupation_; }

  const std::vector<ElectronState>& electrons() const noexcept { return electrons_; }
  const std::vector<double>& quanta_meV() const noexcept { return quanta_; }

  std::uint32_t electron_of(std::size_t i) const { return electron_of_[i]; }
  std::uint32_t config_of(std::size_t i) const { return config_of_[i]; }
  double energy(std::size_t i) const { return energy_[i]; }
  std::span<const double> energies() const noexcept { return energy_; }

  /// Occupations of phonon configuration c.
  std::span<const Occupation> config(std::size_t c) const {
    return {configs_.data() + c * mode_count(), mode_count()};
  }
  std::span<const Occupation> occupations(std::size_t i) const { return config(config_of_[i]); }
  /// Basis index of (electron k, config c), or npos.
  std::uint32_t member(std::size_t c, std::size_t k) const {
    return members_[c * electron_count() + k];
  }
  /// Config id of an occupation vector, or npos.
  std::uint32_t find_config(std::span<const Occupation> n) const;
  /// Basis index of a labelled state, or npos.
  std::uint32_t find(const ProductLabel& label) const;

  /// Appends a state; callers must add states in final sorted order.
  void push_back(std::uint32_t electron, std::span<const Occupation> n, double energy);

  std::string describe(std::size_t i) const;

 private:
  std::vector<ElectronState> electrons_;
  std::vector<double> quanta_;
  int max_occupation_;
  std::vector<std::uint32_t> electron_of_;
  std::vector<std::uint32_t> config_of_;
  std::vector<double> energy_;
  std::vector<Occupation> configs_;
  std::vector<double> config_energy_;
  std::vector<std::uint32_t> members_;
  std::unordered_map<std::string, std::uint32_t> config_index_;
};

/// Unperturbed energy E_k + sum (n_a + 1/2) hw_a, summed in mode order.
double unperturbed_energy(const ElectronState& e, std::span<const double> quanta,
                          std::span<const Occupation> n);

/// Generates at least oversample * size_cap candidates below a moving energy
/// cutoff, sorts by (E, l, nu, n_1..n_N), truncates. Throws BasisError when a
/// required state does not survive.
ProductBasis enumerate_basis(const ElectronBasis& electrons, std::span<const double> quanta_meV,
                             const BasisCaps& caps, BasisDiagnostics* diagnostics = nullptr);

/// Bose-Einstein occupation; 0 for T <= 0.
double bose_einstein(double quantum_meV, double temperature_mK);

struct RelaxationSpec {
  std::vector<double> gamma_meV;       // hw / Q per mode
  std::vector<double> thermal_target;  // Bose-Einstein occupation per mode
  bool enabled = false;
};

RelaxationSpec make_relaxation(const ModeTable& modes, double temperature_mK);

/// Hermitian operator: real diagonal plus compressed sparse rows of
/// off-diagonal couplings.
class SparseHamiltonian {
 public:
  SparseHamiltonian() = default;
  SparseHamiltonian(std::vector<double> diagonal, std::vector<std::uint64_t> row_start,
                    std::vector<std::uint32_t> columns, std::vector<cplx> values);

  std::size_t dimension() const noexcept { return diagonal_.size(); }
  std::size_t off_diagonal_count() const noexcept { return values_.size(); }
  std::span<const double> diagonal() const noexcept { return diagonal_; }
  std::span<const std::uint64_t> row_start() const noexcept { return row_start_; }
  std::span<const std::uint32_t> columns() const noexcept { return columns_; }
  std::span<const cplx> values() const noexcept { return values_; }

  /// y = H x. Safe to call concurrently.
  void apply(std::span<const cplx> x, std::span<cplx> y) const;
  /// y = a (H x - shift x) - y_prev, the Chebyshev recurrence kernel.
  void apply_shifted(std::span<const cplx> x, std::span<cplx> y, double a, double shift,
                     std::span<const cplx> y_prev) const;

  /// max |H_ij - conj(H_ji)| over stored entries (missing partners count fully).
  double hermiticity_defect() const;
  /// Largest number of off-diagonal entries in one row.
  std::size_t max_row_degree() const;
  std::size_t memory_bytes() const;

 private:
  std::vector<double> diagonal_;
  std::vector<std::uint64_t> row_start_;
  std::vector<std::uint32_t> columns_;
  std::vector<cplx> values_;
};

/// Couples (k, n) to (k', n + 1_a) with g(k', a, k) sqrt(n_a + 1) and the
/// Hermitian partner. Entries below drop_tolerance_meV are omitted.
SparseHamiltonian assemble_hamiltonian(const ProductBasis& basis, const CouplingTensor& tensor,
                                       double drop_tolerance_meV = 1e-14);

/// Bytes needed for a basis of the given dimension and degree estimate.
std::size_t estimate_memory_bytes(std::size_t dimension, std::size_t electrons, std::size_t modes);

}  // namespace qdnems
