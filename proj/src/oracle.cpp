#include "qdnems/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/thermal.hpp"
#include "qdnems/units.hpp"

namespace qdnems::oracle {

namespace {

double row_sum_norm(const Eigen::MatrixXcd& m) {
  return m.rows() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

Eigen::Map<const Eigen::VectorXcd> as_vector(std::span<const cplx> v) {
  return {v.data(), static_cast<Eigen::Index>(v.size())};
}

}  // namespace

DenseInstance::DenseInstance(Eigen::MatrixXcd hamiltonian) : h_(std::move(hamiltonian)) {
  if (h_.rows() != h_.cols()) throw ConfigError("dense instance must be square");
  if (static_cast<std::size_t>(h_.rows()) > max_dense_dimension) {
    std::ostringstream msg;
    msg << "dense oracle limited to dimension " << max_dense_dimension << ", got " << h_.rows();
    throw ConfigError(msg.str());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(h_);
  if (solver.info() != Eigen::Success) throw NumericalError("dense eigendecomposition failed");
  values_ = solver.eigenvalues();
  vectors_ = solver.eigenvectors();
  const Eigen::MatrixXcd rebuilt = vectors_ * values_.asDiagonal() * vectors_.adjoint();
  const double scale = row_sum_norm(h_);
  const double defect = row_sum_norm(h_ - rebuilt);
  reconstruction_ = scale > 0.0 ? defect / scale : defect;
  if (reconstruction_ > 1e-10) {
    std::ostringstream msg;
    msg << "dense eigendecomposition reconstructs H only to " << reconstruction_;
    throw NumericalError(msg.str());
  }
}

DenseInstance DenseInstance::from_sparse(const SparseHamiltonian& h) {
  const auto n = static_cast<Eigen::Index>(h.dimension());
  if (static_cast<std::size_t>(n) > max_dense_dimension) {
    std::ostringstream msg;
    msg << "dense oracle limited to dimension " << max_dense_dimension << ", got " << n;
    throw ConfigError(msg.str());
  }
  Eigen::MatrixXcd dense = Eigen::MatrixXcd::Zero(n, n);
  const auto diag = h.diagonal();
  const auto rows = h.row_start();
  const auto cols = h.columns();
  const auto vals = h.values();
  for (Eigen::Index i = 0; i < n; ++i) {
    dense(i, i) = diag[static_cast<std::size_t>(i)];
    for (auto p = rows[static_cast<std::size_t>(i)]; p < rows[static_cast<std::size_t>(i) + 1]; ++p) {
      dense(i, static_cast<Eigen::Index>(cols[p])) += vals[p];
    }
  }
  return DenseInstance(std::move(dense));
}

std::vector<cplx> DenseInstance::exact_propagate(std::span<const cplx> psi0, double t_ns) const {
  if (psi0.size() != dimension()) throw std::invalid_argument("exact_propagate: size mismatch");
  Eigen::VectorXcd c = vectors_.adjoint() * as_vector(psi0);
  for (Eigen::Index k = 0; k < c.size(); ++k) c(k) *= std::polar(1.0, -values_(k) * t_ns / units::hbar);
  const Eigen::VectorXcd out = vectors_ * c;
  return {out.data(), out.data() + out.size()};
}

SparseHamiltonian sparse_from_dense(const Eigen::MatrixXcd& h) {
  const auto n = static_cast<std::size_t>(h.rows());
  std::vector<double> diag(n);
  std::vector<std::uint64_t> rows(n + 1, 0);
  std::vector<std::uint32_t> cols;
  std::vector<cplx> vals;
  for (std::size_t i = 0; i < n; ++i) {
    diag[i] = h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
    for (std::size_t j = 0; j < n; ++j) {
      const cplx v = h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
      if (i == j || v == cplx(0.0, 0.0)) continue;
      cols.push_back(static_cast<std::uint32_t>(j));
      vals.push_back(v);
    }
    rows[i + 1] = vals.size();
  }
  return {std::move(diag), std::move(rows), std::move(cols), std::move(vals)};
}

Eigen::MatrixXcd random_hermitian(std::size_t dimension, std::uint64_t seed, double spread_meV,
                                  double coupling_meV, double density) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto n = static_cast<Eigen::Index>(dimension);
  Eigen::MatrixXcd h = Eigen::MatrixXcd::Zero(n, n);
  for (Eigen::Index i = 0; i < n; ++i) h(i, i) = spread_meV * unit(rng);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      // The first off-diagonal is always present so the instance is connected.
      const bool present = j == i + 1 || unit(rng) < density;
      if (!present) continue;
      const cplx v = std::polar(coupling_meV * unit(rng), 2.0 * units::pi * unit(rng));
      h(i, j) = v;
      h(j, i) = std::conj(v);
    }
  }
  return h;
}

TwoLevelPopulations jaynes_cummings_reference(double coupling_meV, double detuning_meV, int n,
                                              double t_ns) {
  if (n < 0) throw ConfigError("occupation must be non-negative");
  const double coupling_sq = 4.0 * coupling_meV * coupling_meV * (n + 1.0);
  const double omega_sq = detuning_meV * detuning_meV + coupling_sq;  // (hbar Omega)^2
  if (omega_sq == 0.0) return {};
  const double omega = std::sqrt(omega_sq) / units::hbar;
  const double s = std::sin(0.5 * omega * t_ns);
  const double transfer = coupling_sq / omega_sq * s * s;
  return {1.0 - transfer, transfer};
}

TwoLevelInstance two_level_instance(const ModeTable& modes, std::size_t position,
                                    double detuning_meV, int n, const DotGeometry& dot,
                                    const CouplingConfig& config) {
  if (position >= modes.size()) throw ConfigError("two-level instance: mode position out of range");
  if (n < 0 || n >= 255) throw ConfigError("two-level instance: occupation out of range");
  const auto field = MagneticConfig::make(0.0, dot.effective_mass);
  ElectronBasis pair({make_state(0, 1, dot, field), make_state(1, 1, dot, field)});
  const double gap = pair[1].energy_meV - pair[0].energy_meV;
  const double quantum = gap - detuning_meV;
  if (!(quantum > 0.0)) throw ConfigError("two-level instance: detuning exceeds the electronic gap");

  ModeTable one = modes;
  one.modes = {modes.modes[position]};
  retune_mode(one, 0, quantum);
  auto tensor = build_coupling_tensor(pair, one, dot, config);
  const double coupling = std::abs(tensor(0, 0, 1));
  if (!(coupling > 1e-12)) throw NumericalError("two-level instance: the chosen mode does not couple (0,1) and (1,1)");

  const std::vector<double> quanta{quantum};
  ProductBasis basis(pair.states(), quanta, n + 1);
  const std::vector<Occupation> upper_n{static_cast<Occupation>(n)};
  const std::vector<Occupation> lower_n{static_cast<Occupation>(n + 1)};
  const double e_upper = unperturbed_energy(pair[1], quanta, upper_n);
  const double e_lower = unperturbed_energy(pair[0], quanta, lower_n);
  if (e_lower <= e_upper) {
    basis.push_back(0, lower_n, e_lower);
    basis.push_back(1, upper_n, e_upper);
  } else {
    basis.push_back(1, upper_n, e_upper);
    basis.push_back(0, lower_n, e_lower);
  }
  auto h = assemble_hamiltonian(basis, tensor);
  const auto upper = basis.find({1, 1, {n}});
  const auto lower = basis.find({0, 1, {n + 1}});
  return {std::move(basis), std::move(h), coupling, e_upper - e_lower, upper, lower};
}

PipelineInstance pipeline_instance(std::size_t cap, int mode_count, int max_occupation,
                                   double target_coupling_meV) {
  const PlateSpec plate;
  const DotGeometry dot;
  auto modes = solve_modes(plate, RitzSize{}, mode_count);
  const auto field = MagneticConfig::make(0.0, dot.effective_mass);
  auto electrons = ElectronBasis::build(dot, field, 2, 1);
  auto tensor = build_coupling_tensor(electrons, modes, dot, CouplingConfig{});
  calibrate_scale(tensor, target_coupling_meV);
  std::vector<double> quanta;
  for (const auto& m : modes.modes) quanta.push_back(m.quantum_meV);
  BasisCaps caps;
  caps.max_occupation = max_occupation;
  caps.size_cap = cap;
  caps.required = {{1, 1, {}}, {-1, 1, {}}};
  auto basis = enumerate_basis(electrons, quanta, caps);
  auto h = assemble_hamiltonian(basis, tensor);
  return {std::move(electrons), std::move(modes), std::move(tensor), std::move(basis), std::move(h)};
}

BruteForceObservables brute_force_observables(std::span<const cplx> psi, std::span<const cplx> psi0,
                                              const ProductBasis& basis) {
  const std::size_t dim = basis.size();
  if (psi.size() != dim || psi0.size() != dim) throw std::invalid_argument("brute force: size mismatch");
  const auto& electrons = basis.electrons();
  const auto ne = static_cast<Eigen::Index>(electrons.size());
  const std::size_t nm = basis.mode_count();

  BruteForceObservables out;
  out.rho = Eigen::MatrixXcd::Zero(ne, ne);
  out.occupation_mean.assign(nm, 0.0);
  out.occupation_variance.assign(nm, 0.0);
  std::vector<double> second(nm, 0.0);

  std::map<std::vector<int>, std::vector<std::pair<std::size_t, cplx>>> branches;
  for (std::size_t i = 0; i < dim; ++i) {
    const auto occ = basis.occupations(i);
    std::vector<int> key(occ.begin(), occ.end());
    const std::size_t k = basis.electron_of(i);
    const auto& e = electrons[k];
    const double p = std::norm(psi[i]);
    branches[key].emplace_back(k, psi[i]);
    out.angular_momentum += e.l * p;
    out.electron_energy_meV += e.energy_meV * p;
    if (e.nu == 1 && e.l == 1) out.inversion += p;
    if (e.nu == 1 && e.l == -1) out.inversion -= p;
    out.overlap += std::conj(psi0[i]) * psi[i];
    for (std::size_t a = 0; a < nm; ++a) {
      out.occupation_mean[a] += p * key[a];
      second[a] += p * key[a] * key[a];
    }
  }
  for (const auto& [key, amps] : branches) {
    for (const auto& [a, ca] : amps)
      for (const auto& [b, cb] : amps)
        out.rho(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) += ca * std::conj(cb);
  }
  out.purity = (out.rho * out.rho).trace().real();
  for (std::size_t a = 0; a < nm; ++a) {
    out.occupation_variance[a] = second[a] - out.occupation_mean[a] * out.occupation_mean[a];
  }
  Eigen::Index plus = -1, minus = -1;
  for (Eigen::Index k = 0; k < ne; ++k) {
    const auto& e = electrons[static_cast<std::size_t>(k)];
    if (e.nu == 1 && e.l == 1) plus = k;
    if (e.nu == 1 && e.l == -1) minus = k;
  }
  if (plus >= 0 && minus >= 0) out.coherence = out.rho(minus, plus);
  return out;
}

std::vector<Discrepancy> compare_observables(std::span<const cplx> psi,
                                             std::span<const cplx> psi0,
                                             const ProductBasis& basis, double tolerance) {
  const auto brute = brute_force_observables(psi, psi0, basis);
  const auto& electrons = basis.electrons();
  const auto rho = reduce_electron(psi, basis);
  const auto occ = mode_occupations(psi, basis);

  std::vector<Discrepancy> found;
  auto check = [&](const char* name, double difference) {
    if (!(difference <= tolerance)) found.push_back({name, difference});
  };
  check("rho", (rho - brute.rho).cwiseAbs().maxCoeff());
  check("angular_momentum", std::abs(angular_momentum(rho, electrons) - brute.angular_momentum));
  check("purity", std::abs(purity(rho) - brute.purity));
  check("electron_energy", std::abs(electron_energy_expectation(rho, electrons) - brute.electron_energy_meV));
  check("inversion", std::abs(inversion_amplitude(psi, basis) - brute.inversion));
  check("autocorrelation", std::abs(autocorrelation(psi0, psi) - brute.overlap));
  if (brute.coherence != cplx(0.0, 0.0) || basis.electrons().size() >= 2) {
    try {
      check("coherence", std::abs(bloch_coherence(rho, electrons).modulus - std::abs(brute.coherence)));
    } catch (const ConfigError&) {
      // No (+1, 1)/(-1, 1) pair in this basis: nothing to compare.
    }
  }
  double mean_diff = 0.0, var_diff = 0.0;
  for (std::size_t a = 0; a < basis.mode_count(); ++a) {
    mean_diff = std::max(mean_diff, std::abs(occ.mean[a] - brute.occupation_mean[a]));
    var_diff = std::max(var_diff, std::abs(occ.variance[a] - brute.occupation_variance[a]));
  }
  check("occupation_mean", mean_diff);
  check("occupation_variance", var_diff);
  return found;
}

double max_amplitude_error(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) throw std::invalid_argument("max_amplitude_error: size mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

double chebyshev_vs_exact(const SparseHamiltonian& h, const DenseInstance& dense,
                          std::span<const cplx> psi0, double dt_ns, double t_final_ns,
                          double accuracy) {
  const auto plan = plan_step(estimate_bounds(h), dt_ns, accuracy);
  const std::size_t steps = step_count(t_final_ns, dt_ns);
  std::vector<cplx> psi(psi0.begin(), psi0.end());
  ChebyshevWorkspace work;
  double worst = 0.0;
  for (std::size_t s = 1; s <= steps; ++s) {
    propagate_step(psi, h, plan, work);
    const auto exact = dense.exact_propagate(psi0, static_cast<double>(s) * dt_ns);
    worst = std::max(worst, max_amplitude_error(psi, exact));
  }
  return worst;
}

namespace {

std::vector<cplx> random_unit_vector(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<cplx> v(n);
  double norm = 0.0;
  for (auto& x : v) {
    x = {normal(rng), normal(rng)};
    norm += std::norm(x);
  }
  for (auto& x : v) x /= std::sqrt(norm);
  return v;
}

}  // namespace

std::vector<ValidationCheck> run_validation_suite(const ValidationOptions& options) {
  std::vector<ValidationCheck> table;
  auto record = [&](std::string name, double value, double tolerance) {
    table.push_back({std::move(name), value, tolerance, value <= tolerance});
  };

  // Pipeline instance: assembly, propagation and observables.
  const auto inst = pipeline_instance();
  const auto dense = DenseInstance::from_sparse(inst.hamiltonian);
  record("dense reconstruction (relative)", dense.reconstruction_error(), 1e-10);
  record("assembled hermiticity (meV)", inst.hamiltonian.hermiticity_defect(), 1e-12);

  const auto x = random_unit_vector(inst.basis.size(), options.seed);
  std::vector<cplx> y(x.size());
  inst.hamiltonian.apply(x, y);
  const Eigen::VectorXcd dense_y = dense.hamiltonian() * as_vector(x);
  double matvec = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) matvec = std::max(matvec, std::abs(y[i] - dense_y(static_cast<Eigen::Index>(i))));
  record("sparse vs dense matvec (relative)", matvec / std::max(1e-300, dense_y.cwiseAbs().maxCoeff()), 1e-12);

  const auto start = build_initial_state(1, 1, {}, inst.basis);
  record("chebyshev vs exact, pipeline (amplitude)",
         chebyshev_vs_exact(inst.hamiltonian, dense, start, options.dt_ns, options.t_final_ns,
                            options.accuracy),
         1e-8);

  const auto random_h = random_hermitian(256, options.seed, 0.2, 0.01);
  const DenseInstance random_dense(random_h);
  record("chebyshev vs exact, random hermitian (amplitude)",
         chebyshev_vs_exact(sparse_from_dense(random_h), random_dense,
                            random_unit_vector(256, options.seed + 1), options.dt_ns,
                            options.t_final_ns, options.accuracy),
         1e-8);

  const auto evolved = dense.exact_propagate(x, 0.5 * options.t_final_ns);
  const auto mismatches = compare_observables(evolved, x, inst.basis, 1e-12);
  double worst = 0.0;
  for (const auto& d : mismatches) worst = std::max(worst, d.difference);
  record("optimized vs brute-force observables", worst, 1e-12);

  // Two-level slice against the closed form, on resonance and detuned.
  for (const double detuning_fraction : {0.0, 1.0}) {
    for (const int n : {0, 3}) {
      const auto probe = two_level_instance(inst.modes, 0, 0.0, n);
      const double detuning = detuning_fraction * 2.0 * probe.coupling_meV;
      const auto tl = detuning == 0.0 ? probe : two_level_instance(inst.modes, 0, detuning, n);
      const auto plan = plan_step(estimate_bounds(tl.hamiltonian), options.dt_ns, options.accuracy);
      std::vector<cplx> psi(2, 0.0);
      psi[tl.upper_index] = 1.0;
      ChebyshevWorkspace work;
      double err = 0.0;
      for (std::size_t s = 1; s <= step_count(options.t_final_ns, options.dt_ns); ++s) {
        propagate_step(psi, tl.hamiltonian, plan, work);
        const auto ref = jaynes_cummings_reference(tl.coupling_meV, tl.detuning_meV, n,
                                                   static_cast<double>(s) * options.dt_ns);
        err = std::max(err, std::abs(std::norm(psi[tl.upper_index]) - ref.upper));
      }
      std::ostringstream name;
      name << "two-level slice vs closed form (n=" << n << ", detuning=" << detuning_fraction
           << " x 2g)";
      record(name.str(), err, 1e-6);
    }
  }
  return table;
}

}  // namespace qdnems::oracle
