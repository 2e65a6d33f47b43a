#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "qdnems/product_basis.hpp"

namespace qdnems {

/// Spectrum enclosure [e_min, e_max]; the rescaled operator is
/// 2 (H - centre) / width.
struct SpectralBounds {
  double e_min = 0.0;
  double e_max = 0.0;
  double margin = 0.05;

  double centre() const noexcept { return 0.5 * (e_max + e_min); }
  double width() const noexcept { return e_max - e_min; }
};

/// Gershgorin discs, widened by margin * width / 2 on each side.
SpectralBounds estimate_bounds(const SparseHamiltonian& h, double margin = 0.05);

struct ChebyshevPlan {
  double dt_ns = 0.0;
  double tau = 0.0;  // width * dt / (2 hbar)
  double accuracy = 0.0;
  double centre_meV = 0.0;
  double width_meV = 0.0;
  int order = 0;  // K: |c_K|, |c_{K+1}| < accuracy
  std::vector<double> bessel;  // J_0 .. J_{K+10} at tau
  std::vector<cplx> coefficients;  // c_0 .. c_{K+1}

  double order_ratio() const { return tau > 0.0 ? order / tau : 0.0; }
  std::size_t matvecs_per_step() const { return static_cast<std::size_t>(order) + 1; }
};

ChebyshevPlan plan_step(const SpectralBounds& bounds, double dt_ns, double accuracy);

/// Scratch vectors for one trajectory: two recurrence terms and the sum.
struct ChebyshevWorkspace {
  std::vector<cplx> previous;
  std::vector<cplx> current;
  std::vector<cplx> sum;
  std::size_t matvecs = 0;
};

/// One step psi <- exp(-i H dt / hbar) psi. Returns the norm drift; throws
/// NumericalError when it exceeds 10 * accuracy (bounds too tight).
double propagate_step(std::span<cplx> psi, const SparseHamiltonian& h, const ChebyshevPlan& plan,
                      ChebyshevWorkspace& work);

enum class DissipationMode {
  mean_reverting,  // pulls each <n_a> toward its thermal target at rate gamma_a / hbar
  literal,         // scalar damping term; a no-op after renormalization
};

struct DissipationStats {
  bool applied = false;
  /// Modes with a nonzero deviation but (floored) zero variance: they cannot
  /// relax under this scheme.
  std::size_t stuck_modes = 0;
};

inline constexpr double variance_floor = 1e-6;

/// Multiplies each amplitude by a positive real factor, then renormalizes.
DissipationStats dissipative_substep(std::span<cplx> psi, const ProductBasis& basis,
                                     const RelaxationSpec& relaxation, double dt_ns,
                                     DissipationMode mode = DissipationMode::mean_reverting);

struct EvolveOptions {
  double t_final_ns = 0.0;
  std::size_t stride = 1;  // snapshot every stride steps
  DissipationMode dissipation = DissipationMode::mean_reverting;
};

struct EvolveStats {
  std::size_t steps = 0;
  std::size_t matvecs = 0;
  double max_norm_drift = 0.0;
  std::size_t stuck_mode_events = 0;
};

using SnapshotFn = std::function<void(std::size_t step, double t_ns, std::span<const cplx> psi)>;

/// Strang splitting: half dissipation, Hermitian step, half dissipation.
/// Snapshots at step 0 and every stride steps. t_final must be a multiple of dt.
EvolveStats evolve(std::vector<cplx>& psi, const SparseHamiltonian& h, const ProductBasis& basis,
                   const ChebyshevPlan& plan, const RelaxationSpec& relaxation,
                   const EvolveOptions& options, const SnapshotFn& snapshot);

/// Number of steps for t_final at dt; throws ConfigError unless it divides.
std::size_t step_count(double t_final_ns, double dt_ns);

}  // namespace qdnems
