#pragma once

// Unit system used throughout qdnems: energies in meV, times in ns,
// lengths in nm, temperatures in mK, magnetic fields in gauss at the
// interfaces. Every conversion goes through this header.

#include <numbers>

namespace qdnems::units {

inline constexpr double pi = std::numbers::pi;

/// Reduced Planck constant, meV ns.
inline constexpr double hbar = 6.582119569e-4;
/// Planck constant times 1 GHz, meV.
inline constexpr double meV_per_GHz = 4.135667696e-3;
/// Boltzmann constant, meV per mK.
inline constexpr double kB_meV_per_mK = 8.617333262e-5;
/// hbar^2 / (2 m_0) for the free electron mass, meV nm^2.
inline constexpr double hbar2_over_2m0 = 38.09982113;
/// Free-electron Bohr magneton e hbar / 2 m_0, meV per tesla.
inline constexpr double bohr_magneton_free = 5.7883818060e-2;
/// sqrt(hbar / e) in nm T^(1/2); the magnetic length is this over sqrt(B[T]).
inline constexpr double magnetic_length_unit = 25.65569;
inline constexpr double gauss_per_tesla = 1.0e4;

// SI values used by the plate and the phonon zero-point amplitude.
inline constexpr double hbar_SI = 1.054571817e-34;      // J s
inline constexpr double joule_per_meV = 1.602176634e-22;
inline constexpr double meter_per_nm = 1.0e-9;

inline constexpr double tesla_from_gauss(double gauss) { return gauss / gauss_per_tesla; }

/// Energy quantum hbar*omega (meV) of a mode with frequency f (GHz).
inline constexpr double quantum_from_GHz(double f_GHz) { return f_GHz * meV_per_GHz; }
inline constexpr double GHz_from_quantum(double hw_meV) { return hw_meV / meV_per_GHz; }

/// k_B T in meV.
inline constexpr double thermal_energy(double T_mK) { return kB_meV_per_mK * T_mK; }

}  // namespace qdnems::units
