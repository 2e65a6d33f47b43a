#include "qdnems/observables.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

Eigen::MatrixXcd reduce_electron(std::span<const cplx> psi, const ProductBasis& basis) {
  const auto ne = basis.electron_count();
  if (psi.size() != basis.size()) throw std::invalid_argument("reduce_electron: size mismatch");
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(ne),
                                                static_cast<Eigen::Index>(ne));
  std::vector<std::pair<Eigen::Index, cplx>> present;
  for (std::size_t c = 0; c < basis.config_count(); ++c) {
    present.clear();
    for (std::size_t k = 0; k < ne; ++k) {
      const auto i = basis.member(c, k);
      if (i != ProductBasis::npos && psi[i] != cplx(0.0, 0.0)) {
        present.emplace_back(static_cast<Eigen::Index>(k), psi[i]);
      }
    }
    for (const auto& [a, ca] : present)
      for (const auto& [b, cb] : present) rho(a, b) += ca * std::conj(cb);
  }
  return rho;
}

double angular_momentum(const Eigen::MatrixXcd& rho, const std::vector<ElectronState>& electrons) {
  double total = 0.0;
  for (std::size_t k = 0; k < electrons.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    total += electrons[k].l * rho(i, i).real();
  }
  return total;
}

double purity(const Eigen::MatrixXcd& rho) { return rho.squaredNorm(); }

double electron_energy_expectation(const Eigen::MatrixXcd& rho,
                                   const std::vector<ElectronState>& electrons) {
  double total = 0.0;
  for (std::size_t k = 0; k < electrons.size(); ++k) {
    const auto i = static_cast<Eigen::Index>(k);
    total += electrons[k].energy_meV * rho(i, i).real();
  }
  return total;
}

namespace {

std::pair<std::size_t, std::size_t> pm_indices(const std::vector<ElectronState>& electrons) {
  std::size_t plus = electrons.size();
  std::size_t minus = electrons.size();
  for (std::size_t k = 0; k < electrons.size(); ++k) {
    if (electrons[k].nu == 1 && electrons[k].l == 1) plus = k;
    if (electrons[k].nu == 1 && electrons[k].l == -1) minus = k;
  }
  if (plus == electrons.size() || minus == electrons.size()) {
    throw ConfigError("the (1,1) and (-1,1) electron states must be in the basis");
  }
  return {plus, minus};
}

}  // namespace

double inversion_amplitude(std::span<const cplx> psi, const ProductBasis& basis) {
  const auto [plus, minus] = pm_indices(basis.electrons());
  double w = 0.0;
  for (std::size_t c = 0; c < basis.config_count(); ++c) {
    const auto ip = basis.member(c, plus);
    const auto im = basis.member(c, minus);
    if (ip != ProductBasis::npos) w += std::norm(psi[ip]);
    if (im != ProductBasis::npos) w -= std::norm(psi[im]);
  }
  return w;
}

BlochCoherence bloch_coherence(const Eigen::MatrixXcd& rho,
                               const std::vector<ElectronState>& electrons) {
  const auto [plus, minus] = pm_indices(electrons);
  const cplx z = rho(static_cast<Eigen::Index>(minus), static_cast<Eigen::Index>(plus));
  BlochCoherence b;
  b.modulus = std::abs(z);
  b.phase = b.modulus < 1e-14 ? std::numeric_limits<double>::quiet_NaN() : std::arg(z);
  if (b.phase == -units::pi) b.phase = units::pi;
  return b;
}

ModeOccupations mode_occupations(std::span<const cplx> psi, const ProductBasis& basis) {
  const std::size_t nm = basis.mode_count();
  // Probability per phonon configuration first; moments follow from those.
  std::vector<double> config_weight(basis.config_count(), 0.0);
  for (std::size_t i = 0; i < psi.size(); ++i) config_weight[basis.config_of(i)] += std::norm(psi[i]);
  ModeOccupations m{std::vector<double>(nm, 0.0), std::vector<double>(nm, 0.0)};
  std::vector<double> second(nm, 0.0);
  double total = 0.0;
  for (std::size_t c = 0; c < basis.config_count(); ++c) {
    const double p = config_weight[c];
    if (p == 0.0) continue;
    total += p;
    const auto n = basis.config(c);
    for (std::size_t a = 0; a < nm; ++a) {
      m.mean[a] += p * n[a];
      second[a] += p * n[a] * n[a];
    }
  }
  for (std::size_t a = 0; a < nm; ++a) {
    m.mean[a] /= total;
    m.variance[a] = std::max(0.0, second[a] / total - m.mean[a] * m.mean[a]);
  }
  return m;
}

cplx autocorrelation(std::span<const cplx> psi0, std::span<const cplx> psi_t) {
  if (psi0.size() != psi_t.size()) throw std::invalid_argument("autocorrelation: size mismatch");
  cplx s = 0.0;
  for (std::size_t i = 0; i < psi0.size(); ++i) s += std::conj(psi0[i]) * psi_t[i];
  return s;
}

StateObservables measure(std::span<const cplx> psi, std::span<const cplx> psi0,
                         const ProductBasis& basis) {
  StateObservables o;
  o.rho = reduce_electron(psi, basis);
  o.inversion = inversion_amplitude(psi, basis);
  o.overlap = autocorrelation(psi0, psi);
  o.occupation = mode_occupations(psi, basis).mean;
  return o;
}

TrajectoryRow summarize(double t_ns, const StateObservables& obs,
                        const std::vector<ElectronState>& electrons) {
  TrajectoryRow r;
  r.t_ns = t_ns;
  r.angular_momentum = angular_momentum(obs.rho, electrons);
  r.purity = purity(obs.rho);
  r.electron_energy_meV = electron_energy_expectation(obs.rho, electrons);
  r.autocorrelation_abs = std::abs(obs.overlap);
  r.inversion = obs.inversion;
  const auto b = bloch_coherence(obs.rho, electrons);
  r.coherence_abs = b.modulus;
  r.coherence_phase_over_pi = b.phase / units::pi;
  r.occupation = obs.occupation;
  return r;
}

std::vector<double> TrajectoryRecord::times() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.t_ns);
  return v;
}
std::vector<double> TrajectoryRecord::column_angular_momentum() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.angular_momentum);
  return v;
}
std::vector<double> TrajectoryRecord::column_purity() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.purity);
  return v;
}

std::string csv_header(std::size_t mode_count) {
  std::string h = "t_ns,L_el,purity,E_el_meV,xi_abs,W,rho_pm_abs,rho_pm_phase_over_pi";
  for (std::size_t a = 1; a <= mode_count; ++a) h += ",n_" + std::to_string(a);
  return h;
}

void write_csv(std::ostream& out, const TrajectoryRecord& record) {
  out << csv_header(record.mode_count) << '\n';
  char buf[64];
  auto put = [&](double v, bool comma) {
    std::snprintf(buf, sizeof buf, "%.12g", v);
    if (comma) out << ',';
    out << (std::isnan(v) ? "nan" : buf);
  };
  for (const auto& r : record.rows) {
    put(r.t_ns, false);
    put(r.angular_momentum, true);
    put(r.purity, true);
    put(r.electron_energy_meV, true);
    put(r.autocorrelation_abs, true);
    put(r.inversion, true);
    put(r.coherence_abs, true);
    put(r.coherence_phase_over_pi, true);
    for (double n : r.occupation) put(n, true);
    out << '\n';
  }
}

TrajectoryRecord read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("trajectory CSV is empty");
  std::vector<std::string> names;
  {
    std::istringstream h(line);
    std::string f;
    while (std::getline(h, f, ',')) names.push_back(f);
  }
  if (names.size() < 8) throw ConfigError("trajectory CSV header has too few columns");
  const std::size_t nm = names.size() - 8;
  if (line != csv_header(nm)) throw ConfigError("trajectory CSV header not recognised");
  TrajectoryRecord rec;
  rec.mode_count = nm;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v;
    std::istringstream row(line);
    std::string f;
    while (std::getline(row, f, ',')) v.push_back(std::strtod(f.c_str(), nullptr));
    if (v.size() != names.size()) throw ConfigError("trajectory CSV row has the wrong width");
    TrajectoryRow r;
    r.t_ns = v[0];
    r.angular_momentum = v[1];
    r.purity = v[2];
    r.electron_energy_meV = v[3];
    r.autocorrelation_abs = v[4];
    r.inversion = v[5];
    r.coherence_abs = v[6];
    r.coherence_phase_over_pi = v[7];
    r.occupation.assign(v.begin() + 8, v.end());
    rec.rows.push_back(std::move(r));
  }
  return rec;
}

EnsembleAccumulator::EnsembleAccumulator(std::size_t time_points, std::size_t electrons,
                                         std::size_t modes)
    : weight_(time_points, 0.0) {
  StateObservables zero;
  zero.rho = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(electrons),
                                    static_cast<Eigen::Index>(electrons));
  zero.occupation.assign(modes, 0.0);
  sums_.assign(time_points, zero);
}

void EnsembleAccumulator::add(std::size_t time_index, double weight, const StateObservables& obs) {
  auto& s = sums_.at(time_index);
  s.rho += weight * obs.rho;
  s.inversion += weight * obs.inversion;
  s.overlap += weight * obs.overlap;
  for (std::size_t a = 0; a < s.occupation.size(); ++a) s.occupation[a] += weight * obs.occupation[a];
  weight_[time_index] += weight;
}

std::vector<StateObservables> EnsembleAccumulator::averages() const {
  std::vector<StateObservables> out = sums_;
  for (std::size_t t = 0; t < out.size(); ++t) {
    const double w = weight_[t];
    if (!(w > 0.0)) throw NumericalError("ensemble time point has no weight");
    out[t].rho /= w;
    out[t].inversion /= w;
    out[t].overlap /= w;
    for (auto& n : out[t].occupation) n /= w;
  }
  return out;
}

double rabi_model(double t_ns, double splitting_rad_per_ns, double coupling_meV) {
  const double w2 = splitting_rad_per_ns * splitting_rad_per_ns;
  const double g = 2.0 * coupling_meV / units::hbar;
  const double denom = w2 + g * g;
  if (denom == 0.0) return 1.0;
  return (w2 + g * g * std::cos(std::sqrt(denom) * t_ns)) / denom;
}

namespace {

struct SinusoidFit {
  double residual2 = 0.0;
  double a = 0.0, b = 0.0, c = 0.0;
};

SinusoidFit fit_at(const std::vector<double>& t, const std::vector<double>& y, double omega) {
  const auto n = static_cast<Eigen::Index>(t.size());
  Eigen::MatrixXd A(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double ti = t[static_cast<std::size_t>(i)] - t.front();
    A(i, 0) = std::cos(omega * ti);
    A(i, 1) = std::sin(omega * ti);
    A(i, 2) = 1.0;
    rhs(i) = y[static_cast<std::size_t>(i)];
  }
  const Eigen::Vector3d p = A.colPivHouseholderQr().solve(rhs);
  return {(A * p - rhs).squaredNorm(), p(0), p(1), p(2)};
}

}  // namespace

RabiFit fit_rabi(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n != y.size() || n < 8) throw NumericalError("Rabi fit needs at least 8 samples");
  const double dt = t[1] - t[0];
  for (std::size_t i = 1; i < n; ++i) {
    if (std::abs((t[i] - t[i - 1]) - dt) > 1e-6 * dt) {
      throw NumericalError("Rabi fit needs a uniform time grid");
    }
  }
  for (double v : y) {
    if (!std::isfinite(v)) throw NumericalError("Rabi fit input contains non-finite values");
  }
  double mean = 0.0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(n);
  const double span = dt * static_cast<double>(n);
  std::vector<double> power(n / 2 + 1, 0.0);
  double total = 0.0;
  for (std::size_t k = 1; k <= n / 2; ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double ph = 2.0 * units::pi * static_cast<double>(k * i) / static_cast<double>(n);
      re += (y[i] - mean) * std::cos(ph);
      im -= (y[i] - mean) * std::sin(ph);
    }
    power[k] = re * re + im * im;
    total += power[k];
  }
  const auto peak = static_cast<std::size_t>(
      std::max_element(power.begin() + 1, power.end()) - power.begin());
  RabiFit fit;
  const double neighbourhood =
      power[peak] + power[peak - 1] + (peak + 1 < power.size() ? power[peak + 1] : 0.0);
  fit.peak_fraction = total > 0.0 ? neighbourhood / total : 0.0;
  if (!(total > 0.0) || fit.peak_fraction < 0.5) {
    throw NumericalError("Rabi fit: no dominant spectral peak");
  }
  if (peak < 2) throw NumericalError("Rabi fit: trajectory covers fewer than two periods");

  // Golden-section search on the residual between neighbouring bins.
  const double w_unit = 2.0 * units::pi / span;
  double lo = (static_cast<double>(peak) - 1.0) * w_unit;
  double hi = (static_cast<double>(peak) + 1.0) * w_unit;
  const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - golden * (hi - lo);
  double x2 = lo + golden * (hi - lo);
  double f1 = fit_at(t, y, x1).residual2;
  double f2 = fit_at(t, y, x2).residual2;
  for (int it = 0; it < 100 && hi - lo > 1e-13 * hi; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - golden * (hi - lo);
      f1 = fit_at(t, y, x1).residual2;
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + golden * (hi - lo);
      f2 = fit_at(t, y, x2).residual2;
    }
  }
  const double omega = 0.5 * (lo + hi);
  const auto best = fit_at(t, y, omega);
  fit.angular_frequency = omega;
  fit.period_ns = 2.0 * units::pi / omega;
  fit.coupling_meV = 0.5 * units::hbar * omega;
  fit.amplitude = std::hypot(best.a, best.b);
  fit.offset = best.c;
  fit.rms_residual = std::sqrt(best.residual2 / static_cast<double>(n));
  return fit;
}

double swing_amplitude(const std::vector<double>& t, const std::vector<double>& y, double t0,
                       double span) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t0 || t[i] > t0 + span) continue;
    lo = std::min(lo, y[i]);
    hi = std::max(hi, y[i]);
  }
  return hi >= lo ? 0.5 * (hi - lo) : 0.0;
}

double tail_mean(const std::vector<double>& values, double fraction) {
  if (values.empty()) return 0.0;
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(values.size()))));
  double s = 0.0;
  for (std::size_t i = values.size() - count; i < values.size(); ++i) s += values[i];
  return s / static_cast<double>(count);
}

}  // namespace qdnems
