#include "qdnems/thermal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <map>
#include <queue>
#include <random>
#include <sstream>
#include <thread>

#include "qdnems/errors.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

const char* policy_name(RealizationPolicy p) {
  switch (p) {
    case RealizationPolicy::exhaustive: return "exhaustive";
    case RealizationPolicy::sampled: return "sampled";
    case RealizationPolicy::vacuum: return "vacuum";
  }
  return "?";
}

RealizationPolicy parse_policy(const std::string& name) {
  if (name == "exhaustive") return RealizationPolicy::exhaustive;
  if (name == "sampled") return RealizationPolicy::sampled;
  if (name == "vacuum") return RealizationPolicy::vacuum;
  throw ConfigError("unknown realization policy '" + name +
                    "' (expected exhaustive, sampled or vacuum)");
}

double occupation_probability(double quantum_meV, double temperature_mK, int n, int max_occupation) {
  if (n < 0 || n > max_occupation) return 0.0;
  if (temperature_mK <= 0.0) return n == 0 ? 1.0 : 0.0;
  const double x = quantum_meV / units::thermal_energy(temperature_mK);
  // (1 - e^-x) e^{-n x} / (1 - e^{-(nmax+1) x})
  return -std::expm1(-x) * std::exp(-n * x) / -std::expm1(-(max_occupation + 1) * x);
}

namespace {

struct Node {
  double log_weight;
  std::vector<int> n;
  std::size_t highest;  // children raise modes >= highest
};

struct NodeOrder {
  bool operator()(const Node& a, const Node& b) const {
    if (a.log_weight != b.log_weight) return a.log_weight < b.log_weight;
    return a.n > b.n;  // lexicographically smaller pops first
  }
};

}  // namespace

ThermalEnsemble enumerate_thermal_states(const std::vector<double>& quanta,
                                         const ThermalFieldSpec& spec) {
  const std::size_t nm = quanta.size();
  const int nmax = spec.max_occupation;
  if (nmax < 0 || nmax > 255) throw ConfigError("max occupation must be in [0, 255]");
  if (spec.policy != RealizationPolicy::vacuum && !(spec.temperature_mK > 0.0)) {
    throw ConfigError("thermal ensemble needs T > 0 (use the vacuum policy at T = 0)");
  }
  if (spec.policy == RealizationPolicy::exhaustive && !(spec.coverage > 0.0 && spec.coverage <= 1.0)) {
    throw ConfigError("coverage must be in (0, 1]");
  }
  if (spec.policy == RealizationPolicy::sampled && spec.samples == 0) {
    throw ConfigError("sampled policy needs at least one sample");
  }

  // Per-mode probability tables and logs.
  std::vector<std::vector<double>> prob(nm), logp(nm);
  ThermalEnsemble out;
  std::vector<double> trunc_mean(nm, 0.0), trunc_second(nm, 0.0);
  for (std::size_t a = 0; a < nm; ++a) {
    for (int n = 0; n <= nmax; ++n) {
      const double p = occupation_probability(quanta[a], spec.temperature_mK, n, nmax);
      prob[a].push_back(p);
      logp[a].push_back(p > 0.0 ? std::log(p) : -std::numeric_limits<double>::infinity());
      trunc_mean[a] += p * n;
      trunc_second[a] += p * n * n;
    }
    out.bose_einstein.push_back(bose_einstein(quanta[a], spec.temperature_mK));
  }
  auto config_probability = [&](const std::vector<int>& n) {
    double lp = 0.0;
    for (std::size_t a = 0; a < nm; ++a) lp += logp[a][static_cast<std::size_t>(n[a])];
    return std::exp(lp);
  };

  if (spec.policy == RealizationPolicy::vacuum) {
    std::vector<int> zero(nm, 0);
    out.members.push_back({zero, 1.0, config_probability(zero)});
  } else if (spec.policy == RealizationPolicy::exhaustive) {
    std::priority_queue<Node, std::vector<Node>, NodeOrder> heap;
    std::vector<int> zero(nm, 0);
    double lw0 = 0.0;
    for (std::size_t a = 0; a < nm; ++a) lw0 += logp[a][0];
    heap.push({lw0, zero, 0});
    double cumulative = 0.0;
    while (!heap.empty() && cumulative < spec.coverage) {
      if (out.members.size() >= spec.max_members) {
        std::ostringstream msg;
        msg << "thermal coverage " << spec.coverage << " not reached within "
            << spec.max_members << " configurations (achieved " << cumulative << ")";
        throw NumericalError(msg.str());
      }
      Node node = heap.top();
      heap.pop();
      const double p = std::exp(node.log_weight);
      cumulative += p;
      for (std::size_t j = node.highest; j < nm; ++j) {
        if (node.n[j] >= nmax) continue;
        Node child{node.log_weight - logp[j][static_cast<std::size_t>(node.n[j])] +
                       logp[j][static_cast<std::size_t>(node.n[j] + 1)],
                   node.n, j};
        ++child.n[j];
        heap.push(std::move(child));
      }
      out.members.push_back({std::move(node.n), p, p});
    }
    if (cumulative < spec.coverage) {
      std::ostringstream msg;
      msg << "thermal coverage " << spec.coverage << " unreachable; achieved " << cumulative;
      throw NumericalError(msg.str());
    }
  } else {
    std::mt19937_64 rng(spec.seed);
    std::map<std::vector<int>, std::size_t> seen;
    std::vector<std::size_t> multiplicity;
    for (std::size_t s = 0; s < spec.samples; ++s) {
      std::vector<int> n(nm, 0);
      for (std::size_t a = 0; a < nm; ++a) {
        const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
        double c = 0.0;
        int k = 0;
        for (; k < nmax; ++k) {
          c += prob[a][static_cast<std::size_t>(k)];
          if (u < c) break;
        }
        n[a] = k;
      }
      const auto [it, inserted] = seen.try_emplace(n, out.members.size());
      if (inserted) {
        out.members.push_back({n, 0.0, config_probability(n)});
        multiplicity.push_back(0);
      }
      ++multiplicity[it->second];
    }
    for (std::size_t m = 0; m < out.members.size(); ++m) {
      out.members[m].weight =
          static_cast<double>(multiplicity[m]) / static_cast<double>(spec.samples);
    }
  }

  double covered = 0.0;
  double weight_sum = 0.0;
  for (const auto& m : out.members) {
    covered += m.probability;
    weight_sum += m.weight;
  }
  out.covered = covered;
  out.discarded = std::max(0.0, 1.0 - covered);
  for (auto& m : out.members) m.weight /= weight_sum;

  out.member_mean.assign(nm, 0.0);
  for (const auto& m : out.members)
    for (std::size_t a = 0; a < nm; ++a) out.member_mean[a] += m.weight * m.occupations[a];
  for (std::size_t a = 0; a < nm; ++a) {
    const double truncation = std::abs(trunc_mean[a] - out.bose_einstein[a]);
    double bound = 0.0;
    if (spec.policy == RealizationPolicy::sampled) {
      // Three standard errors of the sample mean.
      const double var = trunc_second[a] - trunc_mean[a] * trunc_mean[a];
      bound = 3.0 * std::sqrt(var / static_cast<double>(spec.samples));
    } else {
      // |<n>_S - <n>| = |tail * <n> - sum_tail p n| / S, Cauchy-Schwarz on the sum.
      const double tail = out.discarded;
      bound = std::max(tail * trunc_mean[a], std::sqrt(tail * trunc_second[a])) / covered;
    }
    out.tail_bound.push_back(bound + truncation);
  }
  return out;
}

std::vector<cplx> build_initial_state(int l, int nu, const std::vector<int>& occupations,
                                      const ProductBasis& basis) {
  const auto idx = basis.find({l, nu, occupations});
  if (idx == ProductBasis::npos) {
    std::ostringstream msg;
    msg << "initial state (l=" << l << ", nu=" << nu << ", n=[";
    for (std::size_t a = 0; a < occupations.size(); ++a) msg << (a ? "," : "") << occupations[a];
    msg << "]) is outside the truncated basis; raise basis.size_cap";
    throw BasisError(msg.str());
  }
  std::vector<cplx> psi(basis.size(), cplx(0.0, 0.0));
  psi[idx] = 1.0;
  return psi;
}

double restrict_to_basis(ThermalEnsemble& ensemble, int l, int nu, const ProductBasis& basis,
                         std::vector<ThermalMember>* removed) {
  std::vector<ThermalMember> kept;
  double lost = 0.0;
  for (auto& m : ensemble.members) {
    if (basis.find({l, nu, m.occupations}) != ProductBasis::npos) {
      kept.push_back(std::move(m));
    } else {
      lost += m.weight;
      if (removed) removed->push_back(m);
    }
  }
  if (kept.empty()) throw BasisError("no thermal member lies inside the truncated basis; raise basis.size_cap");
  double total = 0.0;
  for (const auto& m : kept) total += m.weight;
  for (auto& m : kept) m.weight /= total;
  ensemble.members = std::move(kept);
  return lost;
}

std::size_t worker_count() {
  if (const char* env = std::getenv("QDNEMS_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

EnsembleResult run_ensemble(const ThermalEnsemble& ensemble, const Scenario& scenario,
                            const SparseHamiltonian& h, const ProductBasis& basis,
                            const ChebyshevPlan& plan, const RelaxationSpec& relaxation) {
  if (ensemble.members.empty()) throw ConfigError("ensemble has no members");
  const std::size_t steps = step_count(scenario.t_final_ns, scenario.dt_ns);
  if (std::abs(scenario.dt_ns - plan.dt_ns) > 1e-12 * plan.dt_ns) {
    throw ConfigError("scenario dt differs from the propagation plan");
  }
  if (scenario.stride == 0 || steps % scenario.stride != 0) {
    throw ConfigError("t_final / dt must be a multiple of the output stride");
  }
  // Check every member up front so a bad one fails before any work.
  for (const auto& m : ensemble.members) {
    if (basis.find({scenario.initial_l, scenario.initial_nu, m.occupations}) == ProductBasis::npos) {
      build_initial_state(scenario.initial_l, scenario.initial_nu, m.occupations, basis);
    }
  }
  const std::size_t points = steps / scenario.stride + 1;
  const auto& electrons = basis.electrons();
  EnsembleAccumulator acc(points, electrons.size(), basis.mode_count());
  EnsembleResult result;
  result.member_count = ensemble.members.size();

  EvolveOptions options;
  options.t_final_ns = scenario.t_final_ns;
  options.stride = scenario.stride;
  options.dissipation = scenario.dissipation;

  struct MemberOutput {
    std::vector<StateObservables> snapshots;
    EvolveStats stats;
  };
  auto run_member = [&](std::size_t m) {
    MemberOutput out;
    out.snapshots.resize(points);
    auto psi = build_initial_state(scenario.initial_l, scenario.initial_nu,
                                   ensemble.members[m].occupations, basis);
    const auto psi0 = psi;
    out.stats = evolve(psi, h, basis, plan, relaxation, options,
                       [&](std::size_t step, double, std::span<const cplx> v) {
                         out.snapshots[step / scenario.stride] = measure(v, psi0, basis);
                       });
    return out;
  };

  const std::size_t requested = scenario.workers > 0 ? scenario.workers : worker_count();
  const std::size_t workers = std::min(requested, ensemble.members.size());
  for (std::size_t first = 0; first < ensemble.members.size(); first += workers) {
    const std::size_t count = std::min(workers, ensemble.members.size() - first);
    std::vector<MemberOutput> batch(count);
    if (count == 1) {
      batch[0] = run_member(first);
    } else {
      std::vector<std::exception_ptr> errors(count);
      {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < count; ++w) {
          pool.emplace_back([&, w] {
            try {
              batch[w] = run_member(first + w);
            } catch (...) {
              errors[w] = std::current_exception();
            }
          });
        }
      }
      for (auto& e : errors)
        if (e) std::rethrow_exception(e);
    }
    for (std::size_t w = 0; w < count; ++w) {
      const double weight = ensemble.members[first + w].weight;
      for (std::size_t t = 0; t < points; ++t) acc.add(t, weight, batch[w].snapshots[t]);
      result.stats.steps += batch[w].stats.steps;
      result.stats.matvecs += batch[w].stats.matvecs;
      result.stats.max_norm_drift = std::max(result.stats.max_norm_drift, batch[w].stats.max_norm_drift);
      result.stats.stuck_mode_events += batch[w].stats.stuck_mode_events;
      if (scenario.keep_members) {
        TrajectoryRecord rec;
        rec.mode_count = basis.mode_count();
        for (std::size_t t = 0; t < points; ++t) {
          rec.rows.push_back(summarize(static_cast<double>(t * scenario.stride) * plan.dt_ns,
                                       batch[w].snapshots[t], electrons));
        }
        result.members.push_back(std::move(rec));
      }
    }
  }

  result.average.mode_count = basis.mode_count();
  const auto avg = acc.averages();
  for (std::size_t t = 0; t < points; ++t) {
    result.average.rows.push_back(
        summarize(static_cast<double>(t * scenario.stride) * plan.dt_ns, avg[t], electrons));
  }
  return result;
}

}  // namespace qdnems
