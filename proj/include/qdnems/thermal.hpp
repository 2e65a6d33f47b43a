#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "qdnems/chebyshev.hpp"
#include "qdnems/observables.hpp"

namespace qdnems {

enum class RealizationPolicy {
  exhaustive,  // most probable configurations until the coverage target
  sampled,     // i.i.d. draws from the thermal distribution
  vacuum,      // the single bath-vacuum configuration
};
const char* policy_name(RealizationPolicy p);
RealizationPolicy parse_policy(const std::string& name);

struct ThermalFieldSpec {
  double temperature_mK = 50.0;
  RealizationPolicy policy = RealizationPolicy::exhaustive;
  double coverage = 0.99;
  std::size_t samples = 32;
  std::uint64_t seed = 1;
  int max_occupation = 40;
  std::size_t max_members = 200000;
};

struct ThermalMember {
  std::vector<int> occupations;
  double weight = 0.0;  // averaging weight; sums to 1 over members
  double probability = 0.0;  // exact thermal probability of the configuration
};

struct ThermalEnsemble {
  std::vector<ThermalMember> members;
  /// Thermal probability carried by the members (exhaustive: >= coverage).
  double covered = 0.0;
  double discarded = 0.0;  // 1 - covered
  std::vector<double> bose_einstein;  // per mode
  /// Weighted <n_a> of the members.
  std::vector<double> member_mean;
  /// Rigorous bound on |member_mean - bose_einstein| from the discarded tail.
  std::vector<double> tail_bound;
};

/// Probability of occupation n of one mode, geometric and truncated at
/// max_occupation so it sums to one.
double occupation_probability(double quantum_meV, double temperature_mK, int n, int max_occupation);

/// Throws ConfigError for T <= 0 (except the vacuum policy) and NumericalError
/// if the coverage target needs more than max_members configurations.
ThermalEnsemble enumerate_thermal_states(const std::vector<double>& quanta_meV,
                                         const ThermalFieldSpec& spec);

/// Unit vector on the product state (l, nu; n). Throws BasisError if absent.
std::vector<cplx> build_initial_state(int l, int nu, const std::vector<int>& occupations,
                                      const ProductBasis& basis);

struct Scenario {
  int initial_l = 1;
  int initial_nu = 1;
  double t_final_ns = 200.0;
  double dt_ns = 0.25;
  std::size_t stride = 8;
  DissipationMode dissipation = DissipationMode::mean_reverting;
  bool keep_members = false;
  std::size_t workers = 0;  // 0: worker_count()
};

struct EnsembleResult {
  TrajectoryRecord average;
  std::vector<TrajectoryRecord> members;  // only with keep_members
  EvolveStats stats;                      // summed over members
  std::size_t member_count = 0;
};

/// Members whose initial product state is missing from the basis are removed
/// and the remaining averaging weights renormalized. Returns the removed
/// members' share of the averaging weight.
double restrict_to_basis(ThermalEnsemble& ensemble, int l, int nu, const ProductBasis& basis,
                         std::vector<ThermalMember>* removed = nullptr);

/// Worker count from QDNEMS_WORKERS, else the hardware concurrency.
std::size_t worker_count();

/// Evolves every member and averages observables pointwise in time. Members
/// are reduced in index order, so results do not depend on the worker count.
EnsembleResult run_ensemble(const ThermalEnsemble& ensemble, const Scenario& scenario,
                            const SparseHamiltonian& h, const ProductBasis& basis,
                            const ChebyshevPlan& plan, const RelaxationSpec& relaxation);

}  // namespace qdnems
