#include "qdnems/chebyshev.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/observables.hpp"
#include "qdnems/special.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

SpectralBounds estimate_bounds(const SparseHamiltonian& h, double margin) {
  if (!(margin >= 0.0)) throw ConfigError("spectral margin must be non-negative");
  if (h.dimension() == 0) throw ConfigError("empty Hamiltonian");
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  const auto rows = h.row_start();
  const auto vals = h.values();
  for (std::size_t i = 0; i < h.dimension(); ++i) {
    double radius = 0.0;
    for (auto p = rows[i]; p < rows[i + 1]; ++p) radius += std::abs(vals[p]);
    lo = std::min(lo, h.diagonal()[i] - radius);
    hi = std::max(hi, h.diagonal()[i] + radius);
  }
  double pad = 0.5 * margin * (hi - lo);
  if (!(hi - lo > 0.0)) pad = 1e-6 * std::max(1.0, std::abs(lo));
  return {lo - pad, hi + pad, margin};
}

ChebyshevPlan plan_step(const SpectralBounds& bounds, double dt_ns, double accuracy) {
  if (!(dt_ns > 0.0)) throw ConfigError("time step must be positive");
  if (!(accuracy > 0.0 && accuracy < 1.0)) throw ConfigError("accuracy must be in (0, 1)");
  if (!(bounds.width() > 0.0)) throw ConfigError("spectral width must be positive");
  ChebyshevPlan plan;
  plan.dt_ns = dt_ns;
  plan.accuracy = accuracy;
  plan.centre_meV = bounds.centre();
  plan.width_meV = bounds.width();
  plan.tau = bounds.width() * dt_ns / (2.0 * units::hbar);

  // J_k(tau) decays super-exponentially once k exceeds tau; the table is
  // regrown until the cutoff pair is found.
  int reach = static_cast<int>(std::ceil(plan.tau)) + 40;
  for (;;) {
    const auto j = special::bessel_j_sequence(plan.tau, reach + 11);
    const int start = static_cast<int>(std::ceil(plan.tau));
    int found = -1;
    for (int k = start; k + 1 <= reach; ++k) {
      const double ck = (k == 0 ? 1.0 : 2.0) * std::abs(j[static_cast<std::size_t>(k)]);
      const double ck1 = 2.0 * std::abs(j[static_cast<std::size_t>(k + 1)]);
      if (ck < accuracy && ck1 < accuracy) {
        found = k;
        break;
      }
    }
    if (found >= 0) {
      plan.order = found;
      plan.bessel.assign(j.begin(), j.begin() + found + 11);
      break;
    }
    reach *= 2;
  }
  const cplx minus_i(0.0, -1.0);
  cplx phase = 1.0;
  for (int k = 0; k <= plan.order + 1; ++k) {
    plan.coefficients.push_back((k == 0 ? 1.0 : 2.0) * phase * plan.bessel[static_cast<std::size_t>(k)]);
    phase *= minus_i;
  }
  return plan;
}

namespace {

double norm_of(std::span<const cplx> v) {
  double s = 0.0;
  for (const auto& z : v) s += std::norm(z);
  return std::sqrt(s);
}

void axpy(cplx c, std::span<const cplx> x, std::span<cplx> y) {
  const double cr = c.real();
  const double ci = c.imag();
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xr = x[i].real();
    const double xi = x[i].imag();
    y[i] += cplx(cr * xr - ci * xi, cr * xi + ci * xr);
  }
}

}  // namespace

double propagate_step(std::span<cplx> psi, const SparseHamiltonian& h, const ChebyshevPlan& plan,
                      ChebyshevWorkspace& work) {
  const std::size_t n = psi.size();
  if (n != h.dimension()) throw std::invalid_argument("propagate_step: dimension mismatch");
  work.previous.resize(n);
  work.current.resize(n);
  work.sum.assign(n, cplx(0.0, 0.0));
  const double before = norm_of(psi);

  const double scale = 2.0 / plan.width_meV;
  std::copy(psi.begin(), psi.end(), work.previous.begin());
  axpy(plan.coefficients[0], work.previous, work.sum);
  h.apply_shifted(work.previous, work.current, scale, plan.centre_meV, {});
  ++work.matvecs;
  axpy(plan.coefficients[1], work.current, work.sum);
  for (int k = 2; k <= plan.order + 1; ++k) {
    // previous <- 2 Hs current - previous, then swap roles.
    h.apply_shifted(work.current, work.previous, 2.0 * scale, plan.centre_meV, work.previous);
    ++work.matvecs;
    std::swap(work.previous, work.current);
    axpy(plan.coefficients[static_cast<std::size_t>(k)], work.current, work.sum);
  }
  const cplx global = std::polar(1.0, -plan.centre_meV * plan.dt_ns / units::hbar);
  for (std::size_t i = 0; i < n; ++i) psi[i] = global * work.sum[i];

  const double drift = std::abs(norm_of(psi) - before);
  if (drift > 10.0 * plan.accuracy) {
    std::ostringstream msg;
    msg << "Chebyshev step changed the norm by " << drift
        << "; the spectral bounds do not enclose the spectrum";
    throw NumericalError(msg.str());
  }
  return drift;
}

DissipationStats dissipative_substep(std::span<cplx> psi, const ProductBasis& basis,
                                     const RelaxationSpec& relaxation, double dt_ns,
                                     DissipationMode mode) {
  DissipationStats stats;
  if (mode == DissipationMode::literal || !relaxation.enabled) return stats;
  const std::size_t nm = basis.mode_count();
  if (relaxation.gamma_meV.size() != nm || relaxation.thermal_target.size() != nm) {
    throw ConfigError("relaxation spec does not match the number of modes");
  }
  const auto occ = mode_occupations(psi, basis);
  std::vector<double> rate(nm, 0.0);
  bool any = false;
  for (std::size_t a = 0; a < nm; ++a) {
    const double deviation = occ.mean[a] - relaxation.thermal_target[a];
    if (relaxation.gamma_meV[a] == 0.0 || deviation == 0.0) continue;
    if (occ.variance[a] < variance_floor) ++stats.stuck_modes;
    rate[a] = relaxation.gamma_meV[a] * dt_ns / (2.0 * units::hbar) * deviation /
              std::max(occ.variance[a], variance_floor);
    any = true;
  }
  if (!any) return stats;
  // Per-configuration exponent, shared by every electron state on it. Only
  // occupied configurations matter; shifting by their smallest exponent keeps
  // every factor in (0, 1] and leaves the renormalized result unchanged.
  std::vector<double> exponent(basis.config_count(), 0.0);
  std::vector<char> occupied(basis.config_count(), 0);
  for (std::size_t i = 0; i < psi.size(); ++i) {
    if (psi[i] != cplx(0.0)) occupied[basis.config_of(i)] = 1;
  }
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < basis.config_count(); ++c) {
    if (!occupied[c]) continue;
    const auto n = basis.config(c);
    double e = 0.0;
    for (std::size_t a = 0; a < nm; ++a) e += rate[a] * (n[a] - occ.mean[a]);
    exponent[c] = e;
    lowest = std::min(lowest, e);
  }
  std::vector<double> factor(basis.config_count(), 0.0);
  for (std::size_t c = 0; c < basis.config_count(); ++c) {
    if (occupied[c]) factor[c] = std::exp(-(exponent[c] - lowest));
  }
  double norm2 = 0.0;
  for (std::size_t i = 0; i < psi.size(); ++i) {
    psi[i] *= factor[basis.config_of(i)];
    norm2 += std::norm(psi[i]);
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (auto& z : psi) z *= inv;
  stats.applied = true;
  return stats;
}

std::size_t step_count(double t_final_ns, double dt_ns) {
  if (!(dt_ns > 0.0) || !(t_final_ns >= 0.0)) throw ConfigError("need dt > 0 and t_final >= 0");
  const double ratio = t_final_ns / dt_ns;
  const double steps = std::round(ratio);
  if (std::abs(ratio - steps) > 1e-9 * std::max(1.0, ratio)) {
    throw ConfigError("t_final must be an integer multiple of dt");
  }
  return static_cast<std::size_t>(steps);
}

EvolveStats evolve(std::vector<cplx>& psi, const SparseHamiltonian& h, const ProductBasis& basis,
                   const ChebyshevPlan& plan, const RelaxationSpec& relaxation,
                   const EvolveOptions& options, const SnapshotFn& snapshot) {
  if (options.stride == 0) throw ConfigError("snapshot stride must be positive");
  EvolveStats stats;
  stats.steps = step_count(options.t_final_ns, plan.dt_ns);
  const bool dissipate = relaxation.enabled && options.dissipation == DissipationMode::mean_reverting;
  ChebyshevWorkspace work;
  if (snapshot) snapshot(0, 0.0, psi);
  for (std::size_t s = 1; s <= stats.steps; ++s) {
    if (dissipate) {
      stats.stuck_mode_events +=
          dissipative_substep(psi, basis, relaxation, 0.5 * plan.dt_ns, options.dissipation).stuck_modes;
    }
    stats.max_norm_drift = std::max(stats.max_norm_drift, propagate_step(psi, h, plan, work));
    if (dissipate) {
      stats.stuck_mode_events +=
          dissipative_substep(psi, basis, relaxation, 0.5 * plan.dt_ns, options.dissipation).stuck_modes;
    }
    if (snapshot && s % options.stride == 0) {
      snapshot(s, static_cast<double>(s) * plan.dt_ns, psi);
    }
  }
  stats.matvecs = work.matvecs;
  return stats;
}

}  // namespace qdnems
