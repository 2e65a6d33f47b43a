#include "qdnems/special.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <string>

namespace qdnems::special {

std::vector<double> bessel_j_sequence(double x, int max_order) {
  if (max_order < 0) throw std::domain_error("bessel_j_sequence: negative order");
  if (x < 0.0) throw std::domain_error("bessel_j_sequence: negative argument");

  std::vector<double> j(static_cast<std::size_t>(max_order) + 1, 0.0);
  if (x == 0.0) {
    j[0] = 1.0;
    return j;
  }

  // Start well above both the requested order and the argument; the
  // recurrence then converges to the minimal solution J_k.
  const int reach = std::max(max_order, static_cast<int>(std::ceil(x))) + 1;
  int start = reach + 20 + static_cast<int>(std::sqrt(160.0 * reach));
  if (start % 2 != 0) ++start;

  constexpr double rescale_threshold = 1.0e250;
  double next = 0.0;     // J_{k+1}
  double current = 1.0e-300;  // J_k, arbitrary seed at k = start
  double norm = 0.0;
  for (int k = start; k > 0; --k) {
    const double previous = 2.0 * k / x * current - next;  // J_{k-1}
    next = current;
    current = previous;
    if (k - 1 <= max_order) j[static_cast<std::size_t>(k - 1)] = current;
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * current;
    if (std::abs(current) > rescale_threshold) {
      current /= rescale_threshold;
      next /= rescale_threshold;
      norm /= rescale_threshold;
      for (int m = k - 1; m <= max_order; ++m) j[static_cast<std::size_t>(m)] /= rescale_threshold;
    }
  }
  norm += current;  // J_0
  for (double& v : j) v /= norm;
  return j;
}

double bessel_j(int order, double x) {
  if (order < 0) {
    const double v = bessel_j(-order, x);
    return (order % 2 == 0) ? v : -v;
  }
  return bessel_j_sequence(x, order)[static_cast<std::size_t>(order)];
}

namespace {

struct RootTable {
  // roots[order][index - 1]
  std::array<std::array<double, max_root_index>, max_root_order + 1> roots{};
};

// J_n and its derivative at x.
std::pair<double, double> value_and_slope(int order, double x) {
  const auto seq = bessel_j_sequence(x, order + 1);
  const double value = seq[static_cast<std::size_t>(order)];
  const double slope = order == 0
                           ? -seq[1]
                           : 0.5 * (seq[static_cast<std::size_t>(order - 1)] -
                                    seq[static_cast<std::size_t>(order + 1)]);
  return {value, slope};
}

double refine_root(int order, double lo, double hi) {
  double f_lo = value_and_slope(order, lo).first;
  double x = 0.5 * (lo + hi);
  for (int iter = 0; iter < 200; ++iter) {
    const auto [f, df] = value_and_slope(order, x);
    if (f == 0.0) return x;
    if ((f < 0.0) == (f_lo < 0.0)) {
      lo = x;
      f_lo = f;
    } else {
      hi = x;
    }
    double candidate = x - f / df;
    if (!(candidate > lo && candidate < hi)) candidate = 0.5 * (lo + hi);
    if (std::abs(candidate - x) <= 4.0 * std::numeric_limits<double>::epsilon() * x ||
        hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * x) {
      return candidate;
    }
    x = candidate;
  }
  return x;
}

RootTable build_table() {
  RootTable table;
  // Consecutive zeros of J_n are never closer than ~3.1, so this scan step
  // cannot skip a sign change. The first zero lies above n.
  constexpr double step = 0.5;
  for (int order = 0; order <= max_root_order; ++order) {
    double x = std::max(0.5, static_cast<double>(order));
    double f = value_and_slope(order, x).first;
    int found = 0;
    while (found < max_root_index) {
      const double x_next = x + step;
      const double f_next = value_and_slope(order, x_next).first;
      if (f == 0.0 || (f < 0.0) != (f_next < 0.0)) {
        table.roots[static_cast<std::size_t>(order)][static_cast<std::size_t>(found)] =
            f == 0.0 ? x : refine_root(order, x, x_next);
        ++found;
      }
      x = x_next;
      f = f_next;
    }
  }
  return table;
}

const RootTable& root_table() {
  static std::once_flag once;
  static RootTable table;
  std::call_once(once, [] { table = build_table(); });
  return table;
}

}  // namespace

double bessel_zero(int order, int index) {
  if (order < 0 || order > max_root_order || index < 1 || index > max_root_index) {
    throw std::domain_error("bessel_zero: order must be in [0, 50] and index in [1, 50], got (" +
                            std::to_string(order) + ", " + std::to_string(index) + ")");
  }
  return root_table().roots[static_cast<std::size_t>(order)][static_cast<std::size_t>(index - 1)];
}

}  // namespace qdnems::special
