#include "qdnems/product_basis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "qdnems/errors.hpp"
#include "qdnems/units.hpp"

namespace qdnems {

namespace {

std::string config_key(std::span<const Occupation> n) {
  return {reinterpret_cast<const char*>(n.data()), n.size()};
}

}  // namespace

ProductBasis::ProductBasis(std::vector<ElectronState> electrons, std::vector<double> quanta_meV,
                           int max_occupation)
    : electrons_(std::move(electrons)), quanta_(std::move(quanta_meV)),
      max_occupation_(max_occupation) {
  if (max_occupation < 0 || max_occupation > 255) {
    throw ConfigError("max occupation must be in [0, 255]");
  }
}

std::uint32_t ProductBasis::find_config(std::span<const Occupation> n) const {
  if (n.size() != mode_count()) return npos;
  const auto it = config_index_.find(config_key(n));
  return it == config_index_.end() ? npos : it->second;
}

std::uint32_t ProductBasis::find(const ProductLabel& label) const {
  std::uint32_t k = npos;
  for (std::size_t i = 0; i < electrons_.size(); ++i) {
    if (electrons_[i].l == label.l && electrons_[i].nu == label.nu) k = static_cast<std::uint32_t>(i);
  }
  if (k == npos) return npos;
  if (label.occupations.size() > mode_count()) return npos;
  std::vector<Occupation> n(mode_count(), 0);
  for (std::size_t a = 0; a < label.occupations.size(); ++a) {
    const int v = label.occupations[a];
    if (v < 0 || v > max_occupation_) return npos;
    n[a] = static_cast<Occupation>(v);
  }
  const auto c = find_config(n);
  return c == npos ? npos : member(c, k);
}

void ProductBasis::push_back(std::uint32_t electron, std::span<const Occupation> n, double energy) {
  if (n.size() != mode_count() || electron >= electron_count()) {
    throw std::invalid_argument("ProductBasis::push_back: inconsistent state");
  }
  if (!energy_.empty() && energy < energy_.back()) {
    throw std::invalid_argument("ProductBasis::push_back: states must arrive energy-sorted");
  }
  if (size() >= npos) throw BasisError("product basis exceeds 32-bit indexing");
  auto [it, inserted] =
      config_index_.try_emplace(config_key(n), static_cast<std::uint32_t>(config_energy_.size()));
  const std::uint32_t c = it->second;
  if (inserted) {
    configs_.insert(configs_.end(), n.begin(), n.end());
    double e = 0.0;
    for (std::size_t a = 0; a < n.size(); ++a) e += (n[a] + 0.5) * quanta_[a];
    config_energy_.push_back(e);
    members_.resize(members_.size() + electron_count(), npos);
  }
  auto& slot = members_[c * electron_count() + electron];
  if (slot != npos) throw std::invalid_argument("ProductBasis::push_back: duplicate state");
  slot = static_cast<std::uint32_t>(size());
  electron_of_.push_back(electron);
  config_of_.push_back(c);
  energy_.push_back(energy);
}

std::string ProductBasis::describe(std::size_t i) const {
  std::ostringstream s;
  const auto& e = electrons_[electron_of_[i]];
  s << "(l=" << e.l << ", nu=" << e.nu << "; n=";
  const auto n = occupations(i);
  for (std::size_t a = 0; a < n.size(); ++a) s << (a ? "," : "") << static_cast<int>(n[a]);
  s << ")";
  return s.str();
}

double unperturbed_energy(const ElectronState& e, std::span<const double> quanta,
                          std::span<const Occupation> n) {
  double total = e.energy_meV;
  for (std::size_t a = 0; a < n.size(); ++a) total += (n[a] + 0.5) * quanta[a];
  return total;
}

namespace {

// Visits occupation vectors with phonon energy in [lo, hi] (excluding the
// zero-point part). Stops once `limit` vectors have been reported.
class FockWalker {
 public:
  FockWalker(std::span<const double> quanta, int max_occupation)
      : quanta_(quanta), nmax_(max_occupation), current_(quanta.size(), 0) {}

  template <class Visit>
  std::size_t walk(double lo, double hi, std::size_t limit, Visit&& visit) {
    count_ = 0;
    limit_ = limit;
    if (quanta_.empty()) {
      if (lo <= 0.0 && 0.0 <= hi) {
        ++count_;
        visit(std::span<const Occupation>(current_));
      }
      return count_;
    }
    recurse(0, 0.0, lo, hi, visit);
    return count_;
  }

 private:
  template <class Visit>
  void recurse(std::size_t a, double used, double lo, double hi, Visit& visit) {
    const double hw = quanta_[a];
    if (a + 1 == quanta_.size()) {
      const double top = std::floor((hi - used) / hw + 1e-12);
      const double bottom = std::ceil((lo - used) / hw - 1e-12);
      const int first = static_cast<int>(std::max(0.0, bottom));
      const int last = static_cast<int>(std::min<double>(nmax_, top));
      for (int n = first; n <= last && count_ < limit_; ++n) {
        current_[a] = static_cast<Occupation>(n);
        ++count_;
        visit(std::span<const Occupation>(current_));
      }
      current_[a] = 0;
      return;
    }
    for (int n = 0; n <= nmax_ && used + n * hw <= hi * (1 + 1e-14) + 1e-15 && count_ < limit_; ++n) {
      current_[a] = static_cast<Occupation>(n);
      recurse(a + 1, used + n * hw, lo, hi, visit);
    }
    current_[a] = 0;
  }

  std::span<const double> quanta_;
  int nmax_;
  std::vector<Occupation> current_;
  std::size_t count_ = 0;
  std::size_t limit_ = 0;
};

struct Candidate {
  double energy;
  double rank;  // distance from the window anchor
  std::uint32_t electron;
  std::size_t offset;  // into the flat occupation store
};

}  // namespace

ProductBasis enumerate_basis(const ElectronBasis& electrons, std::span<const double> quanta_meV,
                             const BasisCaps& caps, BasisDiagnostics* diagnostics) {
  if (caps.size_cap == 0) throw ConfigError("basis size_cap must be positive");
  if (!(caps.oversample >= 1.5)) throw ConfigError("basis oversample factor must be >= 1.5");
  if (caps.max_occupation < 0 || caps.max_occupation > 255) {
    throw ConfigError("max occupation must be in [0, 255]");
  }
  for (double hw : quanta_meV) {
    if (!(hw > 0.0)) throw ConfigError("phonon quanta must be positive");
  }
  const auto& states = electrons.states();
  const std::size_t nm = quanta_meV.size();
  const double zero_point = 0.5 * std::accumulate(quanta_meV.begin(), quanta_meV.end(), 0.0);
  FockWalker walker(quanta_meV, caps.max_occupation);

  double anchor = 0.0;
  const bool centered = caps.window == WindowPolicy::centered;
  if (centered) {
    if (caps.required.empty()) throw ConfigError("centered window needs an anchor state");
    const auto& r = caps.required.front();
    const auto k = electrons.index_of(r.l, r.nu);
    if (!k) throw BasisError("anchor electron state is not in the electron basis");
    anchor = states[*k].energy_meV + zero_point;
    for (std::size_t a = 0; a < r.occupations.size() && a < nm; ++a)
      anchor += r.occupations[a] * quanta_meV[a];
  }

  // Count states whose total energy lies in the window of half-width `span`
  // (centered) or below lowest + span (bottom).
  double lowest = std::numeric_limits<double>::infinity();
  for (const auto& s : states) lowest = std::min(lowest, s.energy_meV + zero_point);
  auto window = [&](double span) {
    return centered ? std::pair{anchor - span, anchor + span}
                    : std::pair{-std::numeric_limits<double>::infinity(), lowest + span};
  };
  auto count = [&](double span, std::size_t limit) {
    const auto [lo, hi] = window(span);
    std::size_t total = 0;
    for (const auto& s : states) {
      const double base = s.energy_meV + zero_point;
      if (hi - base < 0.0) continue;
      total += walker.walk(lo - base, hi - base, limit - total, [](auto) {});
      if (total >= limit) break;
    }
    return total;
  };

  const auto target = static_cast<std::size_t>(std::ceil(caps.oversample * caps.size_cap));
  const std::size_t guard = 64 * target + 1024;
  double top_span = 0.0;
  for (const auto& s : states) top_span = std::max(top_span, s.energy_meV + zero_point - lowest);
  for (double hw : quanta_meV) top_span += caps.max_occupation * hw;
  if (centered) top_span += std::abs(anchor - lowest);
  top_span += 1e-9;

  double hi_span = quanta_meV.empty() ? top_span : *std::min_element(quanta_meV.begin(), quanta_meV.end());
  while (hi_span < top_span && count(hi_span, guard) < target) hi_span *= 2.0;
  hi_span = std::min(hi_span, top_span);
  double lo_span = 0.0;
  if (count(hi_span, guard) >= target) {
    for (int iter = 0; iter < 60; ++iter) {
      const double mid = 0.5 * (lo_span + hi_span);
      if (count(mid, guard) >= target) {
        hi_span = mid;
      } else {
        lo_span = mid;
      }
    }
  }

  // Materialize the candidates.
  std::vector<Occupation> store;
  std::vector<Candidate> cands;
  {
    const auto [lo, hi] = window(hi_span);
    for (std::uint32_t k = 0; k < states.size(); ++k) {
      const double base = states[k].energy_meV + zero_point;
      if (hi - base < 0.0) continue;
      walker.walk(lo - base, hi - base, std::numeric_limits<std::size_t>::max(),
                  [&](std::span<const Occupation> n) {
                    const double e = unperturbed_energy(states[k], quanta_meV, n);
                    cands.push_back({e, centered ? std::abs(e - anchor) : e, k, store.size()});
                    store.insert(store.end(), n.begin(), n.end());
                  });
    }
  }

  auto key_less = [&](const Candidate& a, const Candidate& b, bool by_rank) {
    const double ka = by_rank ? a.rank : a.energy;
    const double kb = by_rank ? b.rank : b.energy;
    if (ka != kb) return ka < kb;
    if (by_rank && a.energy != b.energy) return a.energy < b.energy;
    const auto& ea = states[a.electron];
    const auto& eb = states[b.electron];
    if (ea.l != eb.l) return ea.l < eb.l;
    if (ea.nu != eb.nu) return ea.nu < eb.nu;
    return std::lexicographical_compare(store.begin() + static_cast<std::ptrdiff_t>(a.offset),
                                        store.begin() + static_cast<std::ptrdiff_t>(a.offset + nm),
                                        store.begin() + static_cast<std::ptrdiff_t>(b.offset),
                                        store.begin() + static_cast<std::ptrdiff_t>(b.offset + nm));
  };
  std::sort(cands.begin(), cands.end(),
            [&](const Candidate& a, const Candidate& b) { return key_less(a, b, centered); });
  const std::size_t generated = cands.size();
  if (cands.size() > caps.size_cap) cands.resize(caps.size_cap);
  if (centered) {
    std::sort(cands.begin(), cands.end(),
              [&](const Candidate& a, const Candidate& b) { return key_less(a, b, false); });
  }

  ProductBasis basis(states, std::vector<double>(quanta_meV.begin(), quanta_meV.end()),
                     caps.max_occupation);
  for (const auto& c : cands) {
    basis.push_back(c.electron, std::span<const Occupation>(store.data() + c.offset, nm), c.energy);
  }

  for (const auto& r : caps.required) {
    if (basis.find(r) == ProductBasis::npos) {
      std::ostringstream msg;
      msg << "required state (l=" << r.l << ", nu=" << r.nu << ", n=[";
      for (std::size_t a = 0; a < r.occupations.size(); ++a) msg << (a ? "," : "") << r.occupations[a];
      msg << "]) is outside the truncated basis of " << basis.size()
          << " states; raise basis.size_cap or the electron/occupation limits";
      throw BasisError(msg.str());
    }
  }
  if (diagnostics) {
    diagnostics->candidates = generated;
    diagnostics->dimension = basis.size();
    diagnostics->phonon_configs = basis.config_count();
    diagnostics->candidate_cutoff_meV = window(hi_span).second;
    diagnostics->lowest_energy_meV = basis.size() ? basis.energy(0) : 0.0;
    diagnostics->highest_energy_meV = basis.size() ? basis.energy(basis.size() - 1) : 0.0;
  }
  return basis;
}

double bose_einstein(double quantum_meV, double temperature_mK) {
  if (temperature_mK <= 0.0) return 0.0;
  return 1.0 / std::expm1(quantum_meV / units::thermal_energy(temperature_mK));
}

RelaxationSpec make_relaxation(const ModeTable& modes, double temperature_mK) {
  RelaxationSpec r;
  r.enabled = std::isfinite(modes.quality_factor);
  for (const auto& m : modes.modes) {
    r.gamma_meV.push_back(m.gamma_meV);
    r.thermal_target.push_back(bose_einstein(m.quantum_meV, temperature_mK));
  }
  return r;
}

SparseHamiltonian::SparseHamiltonian(std::vector<double> diagonal,
                                     std::vector<std::uint64_t> row_start,
                                     std::vector<std::uint32_t> columns, std::vector<cplx> values)
    : diagonal_(std::move(diagonal)), row_start_(std::move(row_start)),
      columns_(std::move(columns)), values_(std::move(values)) {
  if (row_start_.size() != diagonal_.size() + 1 || columns_.size() != values_.size() ||
      row_start_.back() != values_.size()) {
    throw std::invalid_argument("SparseHamiltonian: inconsistent CSR arrays");
  }
}

void SparseHamiltonian::apply(std::span<const cplx> x, std::span<cplx> y) const {
  apply_shifted(x, y, 1.0, 0.0, {});
}

void SparseHamiltonian::apply_shifted(std::span<const cplx> x, std::span<cplx> y, double a,
                                      double shift, std::span<const cplx> y_prev) const {
  const std::size_t n = diagonal_.size();
  if (x.size() != n || y.size() != n || (!y_prev.empty() && y_prev.size() != n)) {
    throw std::invalid_argument("SparseHamiltonian: vector size mismatch");
  }
  // Plain real arithmetic: std::complex products carry NaN-recovery branches.
  const auto* xr = reinterpret_cast<const double*>(x.data());
  auto* yr = reinterpret_cast<double*>(y.data());
  const auto* pr = reinterpret_cast<const double*>(y_prev.data());
  const auto* vr = reinterpret_cast<const double*>(values_.data());
  const bool has_prev = !y_prev.empty();
  for (std::size_t i = 0; i < n; ++i) {
    const double d = diagonal_[i] - shift;
    double re = d * xr[2 * i];
    double im = d * xr[2 * i + 1];
    for (std::uint64_t p = row_start_[i]; p < row_start_[i + 1]; ++p) {
      const double hr = vr[2 * p];
      const double hi = vr[2 * p + 1];
      const std::uint32_t j = columns_[p];
      const double ar = xr[2 * j];
      const double ai = xr[2 * j + 1];
      re += hr * ar - hi * ai;
      im += hr * ai + hi * ar;
    }
    if (has_prev) {
      yr[2 * i] = a * re - pr[2 * i];
      yr[2 * i + 1] = a * im - pr[2 * i + 1];
    } else {
      yr[2 * i] = a * re;
      yr[2 * i + 1] = a * im;
    }
  }
}

double SparseHamiltonian::hermiticity_defect() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    for (std::uint64_t p = row_start_[i]; p < row_start_[i + 1]; ++p) {
      const std::uint32_t j = columns_[p];
      const auto first = columns_.begin() + static_cast<std::ptrdiff_t>(row_start_[j]);
      const auto last = columns_.begin() + static_cast<std::ptrdiff_t>(row_start_[j + 1]);
      const auto it = std::lower_bound(first, last, static_cast<std::uint32_t>(i));
      if (it == last || *it != i) {
        worst = std::max(worst, std::abs(values_[p]));
      } else {
        const auto q = static_cast<std::size_t>(it - columns_.begin());
        worst = std::max(worst, std::abs(values_[p] - std::conj(values_[q])));
      }
    }
  }
  return worst;
}

std::size_t SparseHamiltonian::max_row_degree() const {
  std::size_t m = 0;
  for (std::size_t i = 0; i < dimension(); ++i) {
    m = std::max<std::size_t>(m, row_start_[i + 1] - row_start_[i]);
  }
  return m;
}

std::size_t SparseHamiltonian::memory_bytes() const {
  return diagonal_.size() * sizeof(double) + row_start_.size() * sizeof(std::uint64_t) +
         columns_.size() * sizeof(std::uint32_t) + values_.size() * sizeof(cplx);
}

SparseHamiltonian assemble_hamiltonian(const ProductBasis& basis, const CouplingTensor& tensor,
                                       double drop_tolerance_meV) {
  const std::size_t ne = basis.electron_count();
  const std::size_t nm = basis.mode_count();
  if (tensor.electron_count() != ne || tensor.mode_count() != nm) {
    throw ConfigError("coupling tensor does not match the product basis");
  }
  for (std::size_t k = 0; k < ne; ++k) {
    if (tensor.electrons()[k].l != basis.electrons()[k].l ||
        tensor.electrons()[k].nu != basis.electrons()[k].nu) {
      throw ConfigError("coupling tensor electron ordering differs from the product basis");
    }
  }
  const std::size_t dim = basis.size();

  // Each raise (i -> j) is visited once; the lowering partner is its mirror.
  auto for_each_raise = [&](auto&& emit) {
    std::vector<Occupation> raised(nm);
    for (std::size_t i = 0; i < dim; ++i) {
      const auto n = basis.occupations(i);
      const std::uint32_t k = basis.electron_of(i);
      std::copy(n.begin(), n.end(), raised.begin());
      for (std::size_t a = 0; a < nm; ++a) {
        if (n[a] >= basis.max_occupation()) continue;
        raised[a] = static_cast<Occupation>(n[a] + 1);
        const std::uint32_t c = basis.find_config(raised);
        raised[a] = n[a];
        if (c == ProductBasis::npos) continue;
        const double ladder = std::sqrt(static_cast<double>(n[a]) + 1.0);
        for (std::size_t kp = 0; kp < ne; ++kp) {
          const std::uint32_t j = basis.member(c, kp);
          if (j == ProductBasis::npos) continue;
          const cplx v = tensor(kp, a, k) * ladder;
          if (std::abs(v) < drop_tolerance_meV) continue;
          emit(i, static_cast<std::size_t>(j), v);
        }
      }
    }
  };

  std::vector<std::uint64_t> row_start(dim + 1, 0);
  for_each_raise([&](std::size_t i, std::size_t j, cplx) {
    ++row_start[i + 1];
    ++row_start[j + 1];
  });
  for (std::size_t i = 0; i < dim; ++i) row_start[i + 1] += row_start[i];
  std::vector<std::uint32_t> cols(row_start.back());
  std::vector<cplx> vals(row_start.back());
  std::vector<std::uint64_t> fill(row_start.begin(), row_start.end() - 1);
  for_each_raise([&](std::size_t i, std::size_t j, cplx v) {
    cols[fill[j]] = static_cast<std::uint32_t>(i);
    vals[fill[j]++] = v;  // <j|H|i>
    cols[fill[i]] = static_cast<std::uint32_t>(j);
    vals[fill[i]++] = std::conj(v);
  });
  // Sort each row by column for deterministic traversal and partner lookup.
  std::vector<std::pair<std::uint32_t, cplx>> row;
  for (std::size_t i = 0; i < dim; ++i) {
    row.clear();
    for (auto p = row_start[i]; p < row_start[i + 1]; ++p) row.emplace_back(cols[p], vals[p]);
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    for (std::size_t q = 0; q < row.size(); ++q) {
      cols[row_start[i] + q] = row[q].first;
      vals[row_start[i] + q] = row[q].second;
    }
  }
  std::vector<double> diag(basis.energies().begin(), basis.energies().end());
  SparseHamiltonian h(std::move(diag), std::move(row_start), std::move(cols), std::move(vals));
  const double defect = h.hermiticity_defect();
  if (defect > 1e-12) {
    std::ostringstream msg;
    msg << "assembled Hamiltonian is not Hermitian: defect " << defect << " meV";
    throw NumericalError(msg.str());
  }
  return h;
}

std::size_t estimate_memory_bytes(std::size_t dimension, std::size_t electrons, std::size_t modes) {
  // Typical degree is far below the ne * 2N bound; budget for a quarter of it.
  const std::size_t degree = std::max<std::size_t>(4, electrons * modes / 2);
  const std::size_t matrix = dimension * (sizeof(double) + sizeof(std::uint64_t)) +
                             dimension * degree * (sizeof(std::uint32_t) + sizeof(cplx));
  const std::size_t basis = dimension * (modes + 3 * sizeof(std::uint32_t) + sizeof(double)) * 2;
  const std::size_t vectors = 8 * dimension * sizeof(cplx);
  return matrix + basis + vectors;
}

}  // namespace qdnems
