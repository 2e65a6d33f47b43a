#include "qdnems/plate.hpp"

#include <algorithm>
#include <array>
#include <boost/math/tools/roots.hpp>
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

namespace {

double bracketed_root(auto f, double lo, double hi) {
  boost::math::tools::eps_tolerance<double> tol(52);
  std::uintmax_t max_iter = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, max_iter);
  return 0.5 * (a + b);
}

// d-th derivatives of cos and sin.
double cos_derivative(double z, int d) {
  switch (d % 4) {
    case 0: return std::cos(z);
    case 1: return -std::sin(z);
    case 2: return -std::cos(z);
    default: return std::sin(z);
  }
}
double sin_derivative(double z, int d) {
  switch (d % 4) {
    case 0: return std::sin(z);
    case 1: return std::cos(z);
    case 2: return -std::sin(z);
    default: return -std::cos(z);
  }
}

int quadrature_order(int n) { return std::max(96, 16 * n); }

}  // namespace

void PlateSpec::validate() const {
  if (!(width_nm > 0.0 && length_nm > 0.0 && thickness_nm > 0.0)) {
    throw ConfigError("plate dimensions must be positive");
  }
  if (!(thickness_nm < std::min(width_nm, length_nm))) {
    throw ConfigError("plate thickness must be below both in-plane dimensions");
  }
  if (!(material.density_kg_m3 > 0.0) || !(material.youngs_modulus_GPa > 0.0)) {
    throw ConfigError("density and Young's modulus must be positive");
  }
  if (!(material.poisson_ratio > 0.0 && material.poisson_ratio < 0.5)) {
    throw ConfigError("Poisson ratio must be in (0, 0.5)");
  }
}

double PlateSpec::flexural_rigidity_J() const {
  const double t = thickness_nm * units::meter_per_nm;
  const double nu = material.poisson_ratio;
  return material.youngs_modulus_GPa * 1e9 * t * t * t / (12.0 * (1.0 - nu * nu));
}

double PlateSpec::volume_m3() const {
  return width_nm * length_nm * thickness_nm * std::pow(units::meter_per_nm, 3);
}

const char* parity_name(Parity p) { return p == Parity::even ? "even" : "odd"; }

RitzBasis::RitzBasis(const PlateSpec& plate, int nx, int ny) : plate_(plate), nx_(nx), ny_(ny) {
  plate_.validate();
  if (nx < 1 || ny < 1) throw ConfigError("Ritz basis sizes must be positive");

  for (int i = 0; i < nx; ++i) {
    const double centre = (i + 0.5) * units::pi;
    const double lo = std::max(1.0, centre - 0.5);
    const double b = bracketed_root([](double z) { return std::cos(z) + 1.0 / std::cosh(z); },
                                    lo, centre + 0.5);
    beta_.push_back(b);
    const double denom = std::sinh(b) + std::sin(b);
    sigma_.push_back((std::cosh(b) + std::cos(b)) / denom);
    one_minus_sigma_.push_back((-std::exp(-b) + std::sin(b) - std::cos(b)) / denom);
  }
  kappa_.assign(static_cast<std::size_t>(ny), 0.0);
  for (int j = 2; j < ny; ++j) {
    const int m = (j - 2) / 2 + 1;
    if ((j - 2) % 2 == 0) {
      const double c = (m - 0.25) * units::pi;
      kappa_[static_cast<std::size_t>(j)] = bracketed_root(
          [](double k) { return std::sin(k) + std::cos(k) * std::tanh(k); }, c - 0.4, c + 0.4);
    } else {
      const double c = (m + 0.25) * units::pi;
      kappa_[static_cast<std::size_t>(j)] = bracketed_root(
          [](double k) { return std::sin(k) - std::cos(k) * std::tanh(k); }, c - 0.4, c + 0.4);
    }
  }

  // Tabulate derivatives 0..2 at the quadrature nodes (mean measure).
  const auto qx = quadrature::gauss_legendre(quadrature_order(nx), 0.0, 1.0);
  const auto qy = quadrature::gauss_legendre(quadrature_order(ny), -1.0, 1.0);
  const auto nqx = static_cast<Eigen::Index>(qx.nodes.size());
  const auto nqy = static_cast<Eigen::Index>(qy.nodes.size());
  std::array<Eigen::MatrixXd, 3> X;
  std::array<Eigen::MatrixXd, 3> Y;
  for (int d = 0; d < 3; ++d) {
    X[static_cast<std::size_t>(d)].resize(nx, nqx);
    Y[static_cast<std::size_t>(d)].resize(ny, nqy);
    for (int i = 0; i < nx; ++i)
      for (Eigen::Index q = 0; q < nqx; ++q)
        X[static_cast<std::size_t>(d)](i, q) =
            raw_length_function(i, qx.nodes[static_cast<std::size_t>(q)], d);
    for (int j = 0; j < ny; ++j)
      for (Eigen::Index q = 0; q < nqy; ++q)
        Y[static_cast<std::size_t>(d)](j, q) =
            raw_width_function(j, qy.nodes[static_cast<std::size_t>(q)], d);
  }
  Eigen::VectorXd wx(nqx);
  Eigen::VectorXd wy(nqy);
  for (Eigen::Index q = 0; q < nqx; ++q) wx(q) = qx.weights[static_cast<std::size_t>(q)];
  for (Eigen::Index q = 0; q < nqy; ++q) wy(q) = 0.5 * qy.weights[static_cast<std::size_t>(q)];

  x_norm_.resize(static_cast<std::size_t>(nx));
  y_norm_.resize(static_cast<std::size_t>(ny));
  for (int i = 0; i < nx; ++i) {
    x_norm_[static_cast<std::size_t>(i)] =
        1.0 / std::sqrt((X[0].row(i).array().square() * wx.transpose().array()).sum());
  }
  for (int j = 0; j < ny; ++j) {
    y_norm_[static_cast<std::size_t>(j)] =
        1.0 / std::sqrt((Y[0].row(j).array().square() * wy.transpose().array()).sum());
  }
  for (auto& m : X)
    for (int i = 0; i < nx; ++i) m.row(i) *= x_norm_[static_cast<std::size_t>(i)];
  for (auto& m : Y)
    for (int j = 0; j < ny; ++j) m.row(j) *= y_norm_[static_cast<std::size_t>(j)];

  auto gram = [](const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const Eigen::VectorXd& w) {
    Eigen::MatrixXd g = a * w.asDiagonal() * b.transpose();
    return g;
  };
  const Eigen::MatrixXd X00 = gram(X[0], X[0], wx);
  const Eigen::MatrixXd X11 = gram(X[1], X[1], wx);
  const Eigen::MatrixXd X22 = gram(X[2], X[2], wx);
  const Eigen::MatrixXd X20 = gram(X[2], X[0], wx);
  const Eigen::MatrixXd Y00 = gram(Y[0], Y[0], wy);
  const Eigen::MatrixXd Y11 = gram(Y[1], Y[1], wy);
  const Eigen::MatrixXd Y22 = gram(Y[2], Y[2], wy);
  const Eigen::MatrixXd Y20 = gram(Y[2], Y[0], wy);

  // Stiffness in units of l^-4: the width derivatives carry (2 l / w).
  const double a = 2.0 * plate_.length_nm / plate_.width_nm;
  const double nu = plate_.material.poisson_ratio;
  const int n = nx * ny;
  mass_.resize(n, n);
  stiffness_.resize(n, n);
  for (int i = 0; i < nx; ++i)
    for (int j = 0; j < ny; ++j)
      for (int k = 0; k < nx; ++k)
        for (int m = 0; m < ny; ++m) {
          const int r = i * ny + j;
          const int c = k * ny + m;
          mass_(r, c) = X00(i, k) * Y00(j, m);
          stiffness_(r, c) = X22(i, k) * Y00(j, m) + a * a * a * a * X00(i, k) * Y22(j, m) +
                             nu * a * a * (X20(i, k) * Y20(m, j) + X20(k, i) * Y20(j, m)) +
                             2.0 * (1.0 - nu) * a * a * X11(i, k) * Y11(j, m);
        }
  // Exact symmetry for the generalized solver.
  mass_ = 0.5 * (mass_ + mass_.transpose()).eval();
  stiffness_ = 0.5 * (stiffness_ + stiffness_.transpose()).eval();
}

double RitzBasis::raw_length_function(int i, double xi, int d) const {
  const auto u = static_cast<std::size_t>(i);
  const double b = beta_[u];
  const double s = sigma_[u];
  const double bx = b * xi;
  const double sign = (d % 2 == 0) ? 1.0 : -1.0;
  const double hyp = 0.5 * (one_minus_sigma_[u] * std::exp(bx) + sign * (1.0 + s) * std::exp(-bx));
  const double trig = -cos_derivative(bx, d) + s * sin_derivative(bx, d);
  return std::pow(b, d) * (hyp + trig);
}

double RitzBasis::length_function(int i, double xi, int d) const {
  return x_norm_[static_cast<std::size_t>(i)] * raw_length_function(i, xi, d);
}

Parity RitzBasis::width_parity(int j) const {
  if (j == 0) return Parity::even;
  if (j == 1) return Parity::odd;
  return (j - 2) % 2 == 0 ? Parity::even : Parity::odd;
}

double RitzBasis::raw_width_function(int j, double s, int d) const {
  // Evaluate on |s| and restore the sign, so parity holds bit for bit.
  const double t = std::abs(s);
  const double sg = s < 0.0 ? -1.0 : 1.0;
  const bool even = width_parity(j) == Parity::even;
  const double sign = even ? ((d % 2 == 0) ? 1.0 : sg) : ((d % 2 == 0) ? sg : 1.0);
  double f = 0.0;
  if (j == 0) {
    f = d == 0 ? 1.0 : 0.0;
  } else if (j == 1) {
    f = d == 0 ? std::sqrt(3.0) * t : (d == 1 ? std::sqrt(3.0) : 0.0);
  } else {
    const double k = kappa_[static_cast<std::size_t>(j)];
    const double e = std::exp(k * (t - 1.0));
    const double a = std::exp(-2.0 * k * t);
    const double b = std::exp(-2.0 * k);
    const double kd = std::pow(k, d);
    if (even) {
      const double hyp = (d % 2 == 0) ? e * (1.0 + a) / (1.0 + b) : e * (1.0 - a) / (1.0 + b);
      f = kd * (cos_derivative(k * t, d) + std::cos(k) * hyp);
    } else {
      const double hyp = (d % 2 == 0) ? e * (1.0 - a) / (1.0 - b) : e * (1.0 + a) / (1.0 - b);
      f = kd * (sin_derivative(k * t, d) + std::sin(k) * hyp);
    }
  }
  return sign * f;
}

double RitzBasis::width_function(int j, double s, int d) const {
  return y_norm_[static_cast<std::size_t>(j)] * raw_width_function(j, s, d);
}

void ModeTable::set_quality_factor(double q) {
  if (!(q > 0.0)) throw ConfigError("quality factor must be positive (or infinite)");
  quality_factor = q;
  for (auto& m : modes) m.gamma_meV = std::isinf(q) ? 0.0 : m.quantum_meV / q;
}

std::vector<PhononMode> solve_ritz(const RitzBasis& basis) {
  const PlateSpec& plate = basis.plate();
  const double l = plate.length_nm * units::meter_per_nm;
  const double rho_t = plate.material.density_kg_m3 * plate.thickness_nm * units::meter_per_nm;
  const double omega2_unit = plate.flexural_rigidity_J() / (rho_t * l * l * l * l);

  std::vector<PhononMode> modes;
  for (Parity p : {Parity::even, Parity::odd}) {
    std::vector<int> sel;
    for (int i = 0; i < basis.nx(); ++i)
      for (int j = 0; j < basis.ny(); ++j)
        if (basis.width_parity(j) == p) sel.push_back(i * basis.ny() + j);
    if (sel.empty()) continue;
    const auto n = static_cast<Eigen::Index>(sel.size());
    Eigen::MatrixXd K(n, n);
    Eigen::MatrixXd M(n, n);
    for (Eigen::Index r = 0; r < n; ++r)
      for (Eigen::Index c = 0; c < n; ++c) {
        K(r, c) = basis.stiffness_matrix()(sel[static_cast<std::size_t>(r)],
                                           sel[static_cast<std::size_t>(c)]);
        M(r, c) = basis.mass_matrix()(sel[static_cast<std::size_t>(r)],
                                      sel[static_cast<std::size_t>(c)]);
      }
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> solver(K, M);
    if (solver.info() != Eigen::Success) throw NumericalError("Ritz eigensolver failed");
    for (Eigen::Index k = 0; k < n; ++k) {
      const double lambda = solver.eigenvalues()(k);
      if (!(lambda > 0.0)) throw NumericalError("non-positive Ritz eigenvalue");
      PhononMode mode;
      mode.parity = p;
      const double omega = std::sqrt(omega2_unit * lambda);  // rad/s
      mode.frequency_GHz = omega / (2.0 * units::pi) * 1e-9;
      mode.quantum_meV = units::quantum_from_GHz(mode.frequency_GHz);
      Eigen::VectorXd c = solver.eigenvectors().col(k);
      Eigen::Index big = 0;
      c.cwiseAbs().maxCoeff(&big);
      if (c(big) < 0.0) c = -c;
      mode.coefficients.assign(static_cast<std::size_t>(basis.size()), 0.0);
      for (Eigen::Index r = 0; r < n; ++r)
        mode.coefficients[static_cast<std::size_t>(sel[static_cast<std::size_t>(r)])] = c(r);
      modes.push_back(std::move(mode));
    }
  }
  std::stable_sort(modes.begin(), modes.end(), [](const PhononMode& a, const PhononMode& b) {
    return a.frequency_GHz < b.frequency_GHz;
  });
  for (std::size_t i = 0; i < modes.size(); ++i) modes[i].index = static_cast<int>(i) + 1;
  return modes;
}

ModeTable solve_modes(const PlateSpec& plate, RitzSize size, int count, double quality_factor,
                      ConvergenceReport* report) {
  if (size.nx < 5 || size.ny < 5) throw ConfigError("Ritz basis needs nx, ny >= 5");
  if (count < 1 || count > size.nx * size.ny) {
    throw ConfigError("mode count must be in [1, nx * ny]");
  }
  ModeTable table;
  table.plate = plate;
  table.basis = std::make_shared<RitzBasis>(plate, size.nx, size.ny);
  auto all = solve_ritz(*table.basis);

  const RitzSize refined{2 * size.nx, 2 * size.ny};
  const auto fine = solve_ritz(RitzBasis(plate, refined.nx, refined.ny));
  double worst = 0.0;
  for (int k = 0; k < count; ++k) {
    const auto u = static_cast<std::size_t>(k);
    worst = std::max(worst, std::abs(all[u].frequency_GHz - fine[u].frequency_GHz) /
                                fine[u].frequency_GHz);
  }
  if (report) *report = {refined, worst};
  if (worst >= 0.01) {
    std::ostringstream msg;
    msg << "Ritz basis (" << size.nx << ", " << size.ny << ") not converged: lowest " << count
        << " frequencies shift by " << 100.0 * worst << "% on doubling";
    throw NumericalError(msg.str());
  }
  all.resize(static_cast<std::size_t>(count));
  table.modes = std::move(all);
  table.set_quality_factor(quality_factor);
  return table;
}

namespace {

double shape_sum(const ModeTable& table, const PhononMode& mode, double x_nm, double y_nm,
                 bool laplacian) {
  const RitzBasis& b = *table.basis;
  const double l = table.plate.length_nm;
  const double w = table.plate.width_nm;
  const double xi = x_nm / l;
  const double s = 2.0 * y_nm / w;
  double total = 0.0;
  for (int i = 0; i < b.nx(); ++i) {
    const double x0 = b.length_function(i, xi, 0);
    const double x2 = laplacian ? b.length_function(i, xi, 2) : 0.0;
    for (int j = 0; j < b.ny(); ++j) {
      const double c = mode.coefficients[static_cast<std::size_t>(i * b.ny() + j)];
      if (c == 0.0) continue;
      if (laplacian) {
        total += c * (x2 * b.width_function(j, s, 0) / (l * l) +
                      x0 * b.width_function(j, s, 2) * 4.0 / (w * w));
      } else {
        total += c * x0 * b.width_function(j, s, 0);
      }
    }
  }
  return total;
}

}  // namespace

double mode_shape_eval(const ModeTable& table, const PhononMode& mode, double x_nm, double y_nm) {
  return shape_sum(table, mode, x_nm, y_nm, false);
}

double mode_laplacian(const ModeTable& table, const PhononMode& mode, double x_nm, double y_nm) {
  return shape_sum(table, mode, x_nm, y_nm, true);
}

Eigen::MatrixXd mode_laplacians(const ModeTable& table, const std::vector<double>& x_nm,
                                const std::vector<double>& y_nm) {
  if (x_nm.size() != y_nm.size()) throw std::invalid_argument("mode_laplacians: size mismatch");
  const RitzBasis& b = *table.basis;
  const double l = table.plate.length_nm;
  const double w = table.plate.width_nm;
  const auto P = static_cast<Eigen::Index>(x_nm.size());
  Eigen::MatrixXd lap_basis(b.size(), P);
  std::vector<double> x0(static_cast<std::size_t>(b.nx())), x2(x0.size());
  std::vector<double> y0(static_cast<std::size_t>(b.ny())), y2(y0.size());
  for (Eigen::Index p = 0; p < P; ++p) {
    const double xi = x_nm[static_cast<std::size_t>(p)] / l;
    const double s = 2.0 * y_nm[static_cast<std::size_t>(p)] / w;
    for (int i = 0; i < b.nx(); ++i) {
      x0[static_cast<std::size_t>(i)] = b.length_function(i, xi, 0);
      x2[static_cast<std::size_t>(i)] = b.length_function(i, xi, 2) / (l * l);
    }
    for (int j = 0; j < b.ny(); ++j) {
      y0[static_cast<std::size_t>(j)] = b.width_function(j, s, 0);
      y2[static_cast<std::size_t>(j)] = b.width_function(j, s, 2) * 4.0 / (w * w);
    }
    for (int i = 0; i < b.nx(); ++i)
      for (int j = 0; j < b.ny(); ++j)
        lap_basis(i * b.ny() + j, p) = x2[static_cast<std::size_t>(i)] * y0[static_cast<std::size_t>(j)] +
                                       x0[static_cast<std::size_t>(i)] * y2[static_cast<std::size_t>(j)];
  }
  Eigen::MatrixXd coeffs(static_cast<Eigen::Index>(table.size()), b.size());
  for (std::size_t a = 0; a < table.size(); ++a)
    for (int k = 0; k < b.size(); ++k)
      coeffs(static_cast<Eigen::Index>(a), k) = table.modes[a].coefficients[static_cast<std::size_t>(k)];
  return coeffs * lap_basis;
}

double mass_inner_product(const ModeTable& table, const PhononMode& a, const PhononMode& b) {
  const auto n = static_cast<Eigen::Index>(a.coefficients.size());
  const Eigen::Map<const Eigen::VectorXd> ca(a.coefficients.data(), n);
  const Eigen::Map<const Eigen::VectorXd> cb(b.coefficients.data(), n);
  return ca.dot(table.basis->mass_matrix() * cb);
}

QEstimates q_estimates(const PlateSpec& plate) {
  const double l = plate.length_nm;
  const double w = plate.width_nm;
  const double t = plate.thickness_nm;
  return {3.2 * std::pow(l, 5) / (w * std::pow(t, 4)), 2.17 * std::pow(l / t, 3)};
}

double mode_lifetime_ns(double frequency_GHz, double quality_factor) {
  if (!(quality_factor > 0.0)) throw ConfigError("quality factor must be positive");
  return quality_factor / (2.0 * units::pi * frequency_GHz);
}

void retune_mode(ModeTable& table, std::size_t position, double quantum_meV) {
  if (position >= table.size()) throw ConfigError("retune_mode: mode position out of range");
  if (!(quantum_meV > 0.0)) throw ConfigError("retune_mode: quantum must be positive");
  auto& m = table.modes[position];
  m.quantum_meV = quantum_meV;
  m.frequency_GHz = units::GHz_from_quantum(quantum_meV);
  std::stable_sort(table.modes.begin(), table.modes.end(),
                   [](const PhononMode& a, const PhononMode& b) {
                     return a.frequency_GHz < b.frequency_GHz;
                   });
  for (std::size_t i = 0; i < table.size(); ++i) table.modes[i].index = static_cast<int>(i) + 1;
  table.set_quality_factor(table.quality_factor);
}

void write_mode_table(std::ostream& out, const ModeTable& table) {
  out << std::setprecision(17);
  out << "qdnems-mode-table 1\n";
  const auto& p = table.plate;
  out << "plate " << p.width_nm << ' ' << p.length_nm << ' ' << p.thickness_nm << ' '
      << p.material.density_kg_m3 << ' ' << p.material.youngs_modulus_GPa << ' '
      << p.material.poisson_ratio << '\n';
  out << "ritz " << table.basis->nx() << ' ' << table.basis->ny() << '\n';
  out << "quality_factor ";
  if (std::isinf(table.quality_factor)) {
    out << "infinite\n";
  } else {
    out << table.quality_factor << '\n';
  }
  out << "modes " << table.size() << '\n';
  out << "# index f_GHz hw_meV parity n_coeff coefficients...\n";
  for (const auto& m : table.modes) {
    out << m.index << ' ' << m.frequency_GHz << ' ' << m.quantum_meV << ' '
        << parity_name(m.parity) << ' ' << m.coefficients.size();
    for (double c : m.coefficients) out << ' ' << c;
    out << '\n';
  }
}

ModeTable read_mode_table(std::istream& in) {
  auto expect = [&](const std::string& word) {
    std::string got;
    if (!(in >> got) || got != word) {
      throw ConfigError("mode table: expected '" + word + "', found '" + got + "'");
    }
  };
  expect("qdnems-mode-table");
  int version = 0;
  in >> version;
  if (version != 1) throw ConfigError("mode table: unsupported version");
  ModeTable table;
  auto& p = table.plate;
  expect("plate");
  in >> p.width_nm >> p.length_nm >> p.thickness_nm >> p.material.density_kg_m3 >>
      p.material.youngs_modulus_GPa >> p.material.poisson_ratio;
  expect("ritz");
  int nx = 0;
  int ny = 0;
  in >> nx >> ny;
  expect("quality_factor");
  std::string qtext;
  in >> qtext;
  const double q = qtext == "infinite" ? std::numeric_limits<double>::infinity() : std::stod(qtext);
  expect("modes");
  std::size_t count = 0;
  in >> count;
  if (!in) throw ConfigError("mode table: malformed header");
  std::string line;
  std::getline(in, line);
  table.basis = std::make_shared<RitzBasis>(p, nx, ny);
  while (table.modes.size() < count && std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    PhononMode m;
    std::string parity;
    std::size_t n = 0;
    row >> m.index >> m.frequency_GHz >> m.quantum_meV >> parity >> n;
    if (parity != "even" && parity != "odd") throw ConfigError("mode table: bad parity");
    m.parity = parity == "even" ? Parity::even : Parity::odd;
    if (n != static_cast<std::size_t>(nx * ny)) {
      throw ConfigError("mode table: coefficient count does not match the Ritz basis");
    }
    m.coefficients.resize(n);
    for (auto& c : m.coefficients) row >> c;
    if (!row) throw ConfigError("mode table: truncated mode record");
    table.modes.push_back(std::move(m));
  }
  if (table.modes.size() != count) throw ConfigError("mode table: missing mode records");
  table.set_quality_factor(q);
  return table;
}

}  // namespace qdnems
