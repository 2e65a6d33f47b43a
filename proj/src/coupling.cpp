#include "qdnems/coupling.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "qdnems/errors.hpp"
#include "qdnems/quadrature.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

double CouplingConfig::layer_offset(const PlateSpec& plate) const {
  return layer_offset_nm.value_or(0.25 * plate.thickness_nm);
}

void CouplingConfig::validate(const PlateSpec& plate) const {
  if (std::abs(layer_offset(plate)) > 0.5 * plate.thickness_nm) {
    throw ConfigError("electron layer offset must lie inside the plate (|z_d| <= t/2)");
  }
  if (!(overall_scale > 0.0)) throw ConfigError("coupling overall_scale must be positive");
  if (radial_order < 4 || angular_order < 4) {
    throw ConfigError("coupling quadrature orders must be at least 4");
  }
}

CouplingTensor::CouplingTensor(std::vector<ElectronState> electrons,
                               std::vector<double> quanta_meV,
                               std::vector<std::complex<double>> raw, double scale)
    : electrons_(std::move(electrons)), quanta_(std::move(quanta_meV)), raw_(std::move(raw)) {
  if (raw_.size() != electrons_.size() * electrons_.size() * quanta_.size()) {
    throw std::invalid_argument("CouplingTensor: raw table has the wrong size");
  }
  set_scale(scale);
}

void CouplingTensor::set_scale(double scale) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    throw ConfigError("coupling scale must be positive and finite");
  }
  scale_ = scale;
  values_.resize(raw_.size());
  for (std::size_t i = 0; i < raw_.size(); ++i) values_[i] = scale * raw_[i];
}

double CouplingTensor::max_abs() const {
  double m = 0.0;
  for (const auto& v : values_) m = std::max(m, std::abs(v));
  return m;
}

double CouplingTensor::hermiticity_defect() const {
  double m = 0.0;
  const std::size_t ne = electron_count();
  for (std::size_t a = 0; a < mode_count(); ++a)
    for (std::size_t i = 0; i < ne; ++i)
      for (std::size_t j = 0; j < ne; ++j)
        m = std::max(m, std::abs((*this)(i, a, j) - std::conj((*this)(j, a, i))));
  return m;
}

std::optional<std::size_t> CouplingTensor::electron_index(int l, int nu) const {
  for (std::size_t i = 0; i < electrons_.size(); ++i) {
    if (electrons_[i].l == l && electrons_[i].nu == nu) return i;
  }
  return std::nullopt;
}

namespace {

void check_dot_inside(const DotGeometry& dot, const PlateSpec& plate) {
  const double xc = 0.5 * plate.length_nm + dot.offset_x_nm;
  const double yc = dot.offset_y_nm;
  if (xc - dot.radius_nm < 0.0 || xc + dot.radius_nm > plate.length_nm ||
      std::abs(yc) + dot.radius_nm > 0.5 * plate.width_nm) {
    throw ConfigError("quantum dot does not fit inside the plate footprint");
  }
}

double zero_point_amplitude_nm(const PlateSpec& plate, double quantum_meV) {
  const double omega = quantum_meV / units::hbar * 1e9;  // rad/s
  const double x = std::sqrt(units::hbar_SI /
                             (2.0 * plate.material.density_kg_m3 * plate.volume_m3() * omega));
  return x / units::meter_per_nm;
}

// Raw (unit-scale) tensor for the given quadrature orders, before symmetrization.
std::vector<std::complex<double>> raw_tensor(const std::vector<ElectronState>& electrons,
                                             const ModeTable& table, const DotGeometry& dot,
                                             const CouplingConfig& config, int radial_order,
                                             int angular_order) {
  const std::size_t ne = electrons.size();
  const std::size_t nm = table.size();
  const auto rule = quadrature::gauss_legendre(radial_order, 0.0, dot.radius_nm);
  const auto nr = static_cast<std::size_t>(radial_order);
  const auto nh = static_cast<std::size_t>(angular_order);
  const double dtheta = units::pi / angular_order;

  // Sample points: theta_k in (0, pi) and its mirror -theta_k.
  const double xc = 0.5 * table.plate.length_nm + dot.offset_x_nm;
  const double yc = dot.offset_y_nm;
  std::vector<double> xs, ys;
  xs.reserve(2 * nr * nh);
  ys.reserve(2 * nr * nh);
  for (int mirror = 0; mirror < 2; ++mirror) {
    for (std::size_t q = 0; q < nr; ++q) {
      for (std::size_t k = 0; k < nh; ++k) {
        const double th = (static_cast<double>(k) + 0.5) * dtheta;
        const double r = rule.nodes[q];
        xs.push_back(xc + r * std::cos(th));
        ys.push_back(yc + (mirror == 0 ? r * std::sin(th) : -(r * std::sin(th))));
      }
    }
  }
  const Eigen::MatrixXd lap = mode_laplacians(table, xs, ys);
  const std::size_t half = nr * nh;

  int max_delta = 0;
  for (const auto& a : electrons)
    for (const auto& b : electrons) max_delta = std::max(max_delta, std::abs(a.l - b.l));
  const auto nd = static_cast<std::size_t>(max_delta) + 1;

  // Angular transforms: cos_part[a][q][d], sin_part[a][q][d].
  std::vector<double> cos_part(nm * nr * nd, 0.0), sin_part(nm * nr * nd, 0.0);
  for (std::size_t a = 0; a < nm; ++a) {
    for (std::size_t q = 0; q < nr; ++q) {
      for (std::size_t k = 0; k < nh; ++k) {
        const double fp = lap(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(q * nh + k));
        const double fm =
            lap(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(half + q * nh + k));
        const double th = (static_cast<double>(k) + 0.5) * dtheta;
        for (std::size_t d = 0; d < nd; ++d) {
          const double phase = static_cast<double>(d) * th;
          cos_part[(a * nr + q) * nd + d] += dtheta * (fp + fm) * std::cos(phase);
          sin_part[(a * nr + q) * nd + d] += dtheta * (fp - fm) * std::sin(phase);
        }
      }
    }
  }

  std::vector<double> radial(ne * nr);
  for (std::size_t i = 0; i < ne; ++i)
    for (std::size_t q = 0; q < nr; ++q)
      radial[i * nr + q] = radial_amplitude(electrons[i], dot, rule.nodes[q]);

  const double c_dp_meV = config.deformation_potential_eV * 1e3;
  const double z_d = config.layer_offset(table.plate);
  std::vector<std::complex<double>> raw(ne * nm * ne);
  for (std::size_t a = 0; a < nm; ++a) {
    const double pref =
        c_dp_meV * zero_point_amplitude_nm(table.plate, table.modes[a].quantum_meV) * (-z_d);
    for (std::size_t i = 0; i < ne; ++i) {
      for (std::size_t j = 0; j < ne; ++j) {
        const int delta = electrons[j].l - electrons[i].l;
        const auto d = static_cast<std::size_t>(std::abs(delta));
        const double sgn = delta < 0 ? -1.0 : 1.0;
        double re = 0.0;
        double im = 0.0;
        for (std::size_t q = 0; q < nr; ++q) {
          const double weight =
              rule.weights[q] * rule.nodes[q] * (radial[i * nr + q] * radial[j * nr + q]);
          re += weight * cos_part[(a * nr + q) * nd + d];
          im += weight * sin_part[(a * nr + q) * nd + d];
        }
        raw[(i * nm + a) * ne + j] = pref * std::complex<double>(re, sgn * im);
      }
    }
  }
  return raw;
}

}  // namespace

std::complex<double> dp_overlap(const ElectronState& k_out, const PhononMode& mode,
                                const ElectronState& k_in, const DotGeometry& dot,
                                const ModeTable& table, const CouplingConfig& config) {
  config.validate(table.plate);
  check_dot_inside(dot, table.plate);
  ModeTable single = table;
  single.modes = {mode};
  const auto raw = raw_tensor({k_out, k_in}, single, dot, config, config.radial_order,
                              config.angular_order);
  return config.overall_scale * raw[1];  // (k_out, mode, k_in)
}

CouplingTensor build_coupling_tensor(const ElectronBasis& electrons, const ModeTable& table,
                                     const DotGeometry& dot, const CouplingConfig& config,
                                     CouplingDiagnostics* diagnostics) {
  config.validate(table.plate);
  dot.validate();
  check_dot_inside(dot, table.plate);
  const auto& states = electrons.states();
  const std::size_t ne = states.size();
  const std::size_t nm = table.size();

  auto raw = raw_tensor(states, table, dot, config, config.radial_order, config.angular_order);
  const auto fine = raw_tensor(states, table, dot, config, 2 * config.radial_order,
                               2 * config.angular_order);
  double biggest = 0.0;
  double shift = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    biggest = std::max(biggest, std::abs(fine[i]));
    shift = std::max(shift, std::abs(fine[i] - raw[i]));
  }
  const double rel_shift = biggest > 0.0 ? shift / biggest : 0.0;
  if (rel_shift > 1e-8) {
    std::ostringstream msg;
    msg << "coupling quadrature not converged: relative change " << rel_shift
        << " on doubling (radial " << config.radial_order << ", angular "
        << config.angular_order << ")";
    throw NumericalError(msg.str());
  }

  double asym = 0.0;
  for (std::size_t a = 0; a < nm; ++a) {
    for (std::size_t i = 0; i < ne; ++i) {
      for (std::size_t j = i; j < ne; ++j) {
        auto& gij = raw[(i * nm + a) * ne + j];
        auto& gji = raw[(j * nm + a) * ne + i];
        asym = std::max(asym, std::abs(gij - std::conj(gji)));
        const auto mean = 0.5 * (gij + std::conj(gji));
        gij = mean;
        gji = std::conj(mean);
      }
    }
  }

  std::vector<double> quanta;
  for (const auto& m : table.modes) quanta.push_back(m.quantum_meV);
  CouplingTensor tensor(states, std::move(quanta), std::move(raw), config.overall_scale);
  tensor.set_raw_asymmetry(asym);

  if (diagnostics) {
    std::vector<Parity> parities;
    for (const auto& m : table.modes) parities.push_back(m.parity);
    const bool centred = dot.offset_x_nm == 0.0 && dot.offset_y_nm == 0.0;
    *diagnostics = diagnose(tensor, centred, parities);
    diagnostics->quadrature_shift = rel_shift;
  }
  return tensor;
}

namespace {

// Effective coupling at unit scale.
double raw_effective_coupling(const CouplingTensor& t) {
  const auto plus = t.electron_index(1, 1);
  const auto minus = t.electron_index(-1, 1);
  if (!plus || !minus) {
    throw ConfigError("effective coupling needs the (1,1) and (-1,1) electron states");
  }
  const double e_plus = t.electrons()[*plus].kinetic_meV;
  const double e_minus = t.electrons()[*minus].kinetic_meV;
  std::complex<double> total = 0.0;
  for (std::size_t a = 0; a < t.mode_count(); ++a) {
    const double hw = t.quanta_meV()[a];
    for (std::size_t k = 0; k < t.electron_count(); ++k) {
      const double ek = t.electrons()[k].kinetic_meV;
      const double d1 = e_plus - ek - hw;
      const double d2 = e_minus - ek - hw;
      if (std::abs(d1) < 1e-12 || std::abs(d2) < 1e-12) {
        throw NumericalError("effective coupling: resonant intermediate state");
      }
      total += t.raw(*minus, a, k) * t.raw(k, a, *plus) * 0.5 * (1.0 / d1 + 1.0 / d2);
    }
  }
  return std::abs(total);
}

double raw_direct_coupling(const CouplingTensor& t) {
  const auto plus = t.electron_index(1, 1);
  const auto minus = t.electron_index(-1, 1);
  if (!plus || !minus) {
    throw ConfigError("calibration needs the (1,1) and (-1,1) electron states");
  }
  double m = 0.0;
  for (std::size_t a = 0; a < t.mode_count(); ++a) m = std::max(m, std::abs(t.raw(*plus, a, *minus)));
  return m;
}

}  // namespace

double two_level_effective_coupling(const CouplingTensor& tensor) {
  return raw_effective_coupling(tensor) * tensor.scale() * tensor.scale();
}

double calibrate_scale(CouplingTensor& tensor, double target_meV, CalibrationMode mode) {
  if (!(target_meV > 0.0)) throw ConfigError("calibration target must be positive");
  double scale = 0.0;
  if (mode == CalibrationMode::effective) {
    const double raw = raw_effective_coupling(tensor);
    if (!(raw > 0.0)) throw NumericalError("calibration: effective coupling channel is zero");
    scale = std::sqrt(target_meV / raw);
  } else {
    const double raw = raw_direct_coupling(tensor);
    if (!(raw > 0.0)) throw NumericalError("calibration: direct coupling channel is zero");
    scale = target_meV / raw;
  }
  tensor.set_scale(scale);
  return scale;
}

CouplingDiagnostics diagnose(const CouplingTensor& tensor, bool centred_dot,
                             const std::vector<Parity>& parities, PlausibilityWindow window) {
  CouplingDiagnostics d;
  d.max_abs_meV = tensor.max_abs();
  d.raw_asymmetry_meV = tensor.raw_asymmetry() * tensor.scale();
  d.hermiticity_defect_meV = tensor.hermiticity_defect();
  if (centred_dot && parities.size() == tensor.mode_count()) {
    double worst = 0.0;
    for (std::size_t a = 0; a < tensor.mode_count(); ++a)
      for (std::size_t i = 0; i < tensor.electron_count(); ++i)
        for (std::size_t j = 0; j < tensor.electron_count(); ++j) {
          const auto g = tensor(i, a, j);
          worst = std::max(worst, std::abs(parities[a] == Parity::even ? g.imag() : g.real()));
        }
    d.parity_violation_meV = worst;
  }
  try {
    d.effective_coupling_meV = two_level_effective_coupling(tensor);
  } catch (const std::exception&) {
    d.effective_coupling_meV = 0.0;
  }
  d.plausible = d.max_abs_meV >= window.lo_meV && d.max_abs_meV <= window.hi_meV;
  return d;
}

BlockViews block_views(const CouplingTensor& tensor, std::size_t mode) {
  const auto n = static_cast<Eigen::Index>(tensor.electron_count());
  BlockViews v{Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, n)};
  const auto& e = tensor.electrons();
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto g = tensor(static_cast<std::size_t>(i), mode, static_cast<std::size_t>(j));
      const int lo = e[static_cast<std::size_t>(i)].l;
      const int li = e[static_cast<std::size_t>(j)].l;
      v.real_part(i, j) = g.real();
      if (lo > li) v.imag_part(i, j) = g.imag();
      if (lo < li) v.imag_part(i, j) = -g.imag();
    }
  }
  return v;
}

void write_coupling_table(std::ostream& out, const CouplingTensor& t) {
  out << std::setprecision(17);
  out << "qdnems-coupling-table 1\n";
  out << "scale " << t.scale() << "\n";
  out << "electrons " << t.electron_count() << "\n";
  for (const auto& s : t.electrons()) {
    out << s.l << ' ' << s.nu << ' ' << s.alpha << ' ' << s.kinetic_meV << ' ' << s.energy_meV
        << '\n';
  }
  out << "modes " << t.mode_count() << "\n";
  for (double hw : t.quanta_meV()) out << hw << '\n';
  out << "# k_out alpha k_in re_raw im_raw (meV at unit scale)\n";
  for (std::size_t i = 0; i < t.electron_count(); ++i)
    for (std::size_t a = 0; a < t.mode_count(); ++a)
      for (std::size_t j = 0; j < t.electron_count(); ++j) {
        const auto g = t.raw(i, a, j);
        out << i << ' ' << a << ' ' << j << ' ' << g.real() << ' ' << g.imag() << '\n';
      }
}

CouplingTensor read_coupling_table(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) {
      throw ConfigError("coupling table: expected '" + word + "', found '" + got + "'");
    }
  };
  expect("qdnems-coupling-table");
  int version = 0;
  in >> version;
  if (version != 1) throw ConfigError("coupling table: unsupported version");
  double scale = 1.0;
  expect("scale");
  in >> scale;
  std::size_t ne = 0;
  expect("electrons");
  in >> ne;
  std::vector<ElectronState> electrons(ne);
  for (auto& s : electrons) in >> s.l >> s.nu >> s.alpha >> s.kinetic_meV >> s.energy_meV;
  std::size_t nm = 0;
  expect("modes");
  in >> nm;
  std::vector<double> quanta(nm);
  for (auto& hw : quanta) in >> hw;
  if (!in) throw ConfigError("coupling table: malformed header");
  std::vector<std::complex<double>> raw(ne * nm * ne);
  std::string line;
  std::size_t seen = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    std::size_t i = 0, a = 0, j = 0;
    double re = 0.0, im = 0.0;
    if (!(row >> i >> a >> j >> re >> im)) throw ConfigError("coupling table: bad record");
    if (i >= ne || j >= ne || a >= nm) throw ConfigError("coupling table: index out of range");
    raw[(i * nm + a) * ne + j] = {re, im};
    ++seen;
  }
  if (seen != raw.size()) throw ConfigError("coupling table: missing records");
  return CouplingTensor(std::move(electrons), std::move(quanta), std::move(raw), scale);
}

}  // namespace qdnems
