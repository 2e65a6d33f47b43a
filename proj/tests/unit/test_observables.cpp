#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/observables.hpp"
#include "qdnems/oracle.hpp"
#include "qdnems/thermal.hpp"
#include "qdnems/units.hpp"

using namespace qdnems;

namespace {

const oracle::PipelineInstance& instance() {
  static const auto inst = oracle::pipeline_instance(256, 2, 15);
  return inst;
}

std::vector<cplx> random_state(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  std::vector<cplx> v(n);
  double s = 0.0;
  for (auto& z : v) {
    z = {gauss(rng), gauss(rng)};
    s += std::norm(z);
  }
  for (auto& z : v) z /= std::sqrt(s);
  return v;
}

std::vector<double> evolve_angular_momentum(int l0, double t_final) {
  const auto& inst = instance();
  const auto plan = plan_step(estimate_bounds(inst.hamiltonian), 0.25, 1e-12);
  auto psi = build_initial_state(l0, 1, {}, inst.basis);
  std::vector<double> out;
  evolve(psi, inst.hamiltonian, inst.basis, plan, {}, {t_final, 4, DissipationMode::mean_reverting},
         [&](std::size_t, double, std::span<const cplx> s) {
           out.push_back(angular_momentum(reduce_electron(s, inst.basis), inst.basis.electrons()));
         });
  return out;
}

}  // namespace

TEST_SUITE("observables") {
  TEST_CASE("reduced density matrix is a valid state") {
    const auto& basis = instance().basis;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      const auto psi = random_state(basis.size(), seed);
      const auto rho = reduce_electron(psi, basis);
      CHECK((rho - rho.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
      CHECK(std::abs(rho.trace() - 1.0) <= 1e-10);
      const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(rho);
      CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
      const double p = purity(rho);
      CHECK(p <= 1.0 + 1e-10);
      CHECK(p >= 1.0 / static_cast<double>(basis.electron_count()) - 1e-10);
      CHECK(p == doctest::Approx((rho * rho).trace().real()).epsilon(1e-12));
    }
  }

  TEST_CASE("optimized observables match brute-force summation") {
    const auto& basis = instance().basis;
    const auto psi0 = random_state(basis.size(), 77);
    for (std::uint64_t seed = 10; seed < 14; ++seed) {
      const auto psi = random_state(basis.size(), seed);
      const auto bad = oracle::compare_observables(psi, psi0, basis, 1e-12);
      for (const auto& d : bad) FAIL_CHECK(d.observable << " differs by " << d.difference);
      const auto brute = oracle::brute_force_observables(psi, psi0, basis);
      CHECK(angular_momentum(reduce_electron(psi, basis), basis.electrons()) ==
            doctest::Approx(brute.angular_momentum).epsilon(1e-12));
    }
  }

  TEST_CASE("product state: unit purity, exact L, energy and occupations") {
    const auto& basis = instance().basis;
    const auto psi = build_initial_state(-1, 1, {2, 1}, basis);
    const auto rho = reduce_electron(psi, basis);
    CHECK(purity(rho) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(angular_momentum(rho, basis.electrons()) == doctest::Approx(-1.0).epsilon(1e-15));
    const auto idx = *instance().electrons.index_of(-1, 1);
    CHECK(electron_energy_expectation(rho, basis.electrons()) ==
          doctest::Approx(instance().electrons[idx].energy_meV).epsilon(1e-15));
    const auto occ = mode_occupations(psi, basis);
    CHECK(occ.mean == std::vector<double>{2.0, 1.0});
    CHECK(occ.variance[0] == doctest::Approx(0.0).scale(1.0));
    CHECK(inversion_amplitude(psi, basis) == -1.0);
    CHECK(std::abs(autocorrelation(psi, psi)) == doctest::Approx(1.0));
  }

  TEST_CASE("coherence phase convention") {
    const auto& basis = instance().basis;
    const auto plus = basis.find({1, 1, {}});
    const auto minus = basis.find({-1, 1, {}});
    for (const double phi : {0.0, 0.4, -2.0, units::pi}) {
      std::vector<cplx> psi(basis.size(), 0.0);
      psi[plus] = 1.0 / std::sqrt(2.0);
      psi[minus] = std::polar(1.0 / std::sqrt(2.0), phi);
      const auto c = bloch_coherence(reduce_electron(psi, basis), basis.electrons());
      CHECK(c.modulus == doctest::Approx(0.5).epsilon(1e-14));
      CHECK(c.phase == doctest::Approx(phi).epsilon(1e-12));
    }
    const auto pure_plus = build_initial_state(1, 1, {}, basis);
    CHECK(std::isnan(bloch_coherence(reduce_electron(pure_plus, basis), basis.electrons()).phase));
  }

  TEST_CASE("zero-field mirror symmetry of L") {
    const auto plus = evolve_angular_momentum(1, 60.0);
    const auto minus = evolve_angular_momentum(-1, 60.0);
    REQUIRE(plus.size() == minus.size());
    for (std::size_t i = 0; i < plus.size(); ++i) CHECK(std::abs(plus[i] + minus[i]) <= 1e-6);
    CHECK(plus.front() == 1.0);
  }

  TEST_CASE("CSV header names and round trip") {
    CHECK(csv_header(2) ==
          "t_ns,L_el,purity,E_el_meV,xi_abs,W,rho_pm_abs,rho_pm_phase_over_pi,n_1,n_2");
    TrajectoryRecord record;
    record.mode_count = 2;
    record.rows.push_back({0.0, 1.0, 1.0, 0.1, 1.0, 1.0, 0.0, std::nan(""), {0.5, 0.25}});
    record.rows.push_back({2.0, 0.25, 0.75, 0.1, 0.5, 0.3, 0.125, -0.5, {0.5, 0.3}});
    std::stringstream buffer;
    write_csv(buffer, record);
    const auto back = read_csv(buffer);
    REQUIRE(back.rows.size() == 2);
    CHECK(back.mode_count == 2);
    CHECK(back.rows[1].angular_momentum == 0.25);
    CHECK(back.rows[1].coherence_phase_over_pi == -0.5);
    CHECK(std::isnan(back.rows[0].coherence_phase_over_pi));
    CHECK(back.rows[1].occupation == std::vector<double>{0.5, 0.3});
    CHECK(back.times() == std::vector<double>{0.0, 2.0});
  }

  TEST_CASE("Rabi model and fit") {
    const double g = 5e-5;
    const double period = units::pi * units::hbar / g;
    CHECK(period == doctest::Approx(41.36).epsilon(1e-3));
    CHECK(rabi_model(0.0, 0.0, g) == 1.0);
    CHECK(rabi_model(0.5 * period, 0.0, g) == doctest::Approx(-1.0));
    // A detuned model never fully inverts.
    CHECK(rabi_model(0.5 * period, 0.2, g) > -1.0);

    std::vector<double> t, l;
    for (int i = 0; i < 400; ++i) {
      t.push_back(0.5 * i);
      l.push_back(0.1 + 0.8 * std::cos(2.0 * units::pi * t.back() / 52.0 + 0.3));
    }
    const auto fit = fit_rabi(t, l);
    CHECK(fit.period_ns == doctest::Approx(52.0).epsilon(1e-6));
    CHECK(fit.amplitude == doctest::Approx(0.8).epsilon(1e-6));
    CHECK(fit.offset == doctest::Approx(0.1).epsilon(1e-6));
    CHECK(fit.coupling_meV == doctest::Approx(units::pi * units::hbar / 52.0).epsilon(1e-6));
    CHECK(fit.rms_residual < 1e-8);

    std::vector<double> flat(t.size(), 0.3);
    CHECK_THROWS_AS(fit_rabi(t, flat), NumericalError);
    std::vector<double> t_short(t.begin(), t.begin() + 40), l_short(l.begin(), l.begin() + 40);
    CHECK_THROWS_AS(fit_rabi(t_short, l_short), NumericalError);
  }

  TEST_CASE("swing amplitude and tail mean") {
    std::vector<double> t, v;
    for (int i = 0; i <= 100; ++i) {
      t.push_back(i);
      v.push_back(i < 50 ? std::cos(0.3 * i) : 0.2);
    }
    CHECK(swing_amplitude(t, v, 0.0, 30.0) == doctest::Approx(1.0).epsilon(1e-2));
    CHECK(tail_mean(v, 0.25) == doctest::Approx(0.2));
  }

  TEST_CASE("accumulator averages with weights") {
    EnsembleAccumulator acc(1, 2, 1);
    StateObservables a{Eigen::MatrixXcd::Identity(2, 2) * 0.5, 1.0, 1.0, {2.0}};
    StateObservables b{Eigen::MatrixXcd::Zero(2, 2), -1.0, 0.0, {0.0}};
    b.rho(0, 0) = 1.0;
    acc.add(0, 3.0, a);
    acc.add(0, 1.0, b);
    const auto avg = acc.averages();
    CHECK(acc.total_weight(0) == 4.0);
    CHECK(avg[0].inversion == doctest::Approx(0.5));
    CHECK(avg[0].occupation[0] == doctest::Approx(1.5));
    CHECK(avg[0].rho(0, 0).real() == doctest::Approx(0.625));
    EnsembleAccumulator empty(1, 2, 1);
    CHECK_THROWS_AS(empty.averages(), NumericalError);
  }
}
