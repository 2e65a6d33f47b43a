#pragma once

#include <vector>

namespace qdnems::special {

/// J_0(x) .. J_max_order(x) by Miller's backward recurrence, normalized with
/// J_0 + 2 sum_k J_2k = 1. Stable for every order and argument x >= 0,
/// including orders far above x where the values underflow towards zero.
std::vector<double> bessel_j_sequence(double x, int max_order);

double bessel_j(int order, double x);

inline constexpr int max_root_order = 50;
inline constexpr int max_root_index = 50;

/// The index-th positive zero of J_order. Orders 0..50, indices 1..50;
/// anything else throws std::domain_error. Roots are computed once per order
/// (sign-change bracketing, then safeguarded Newton) and cached.
double bessel_zero(int order, int index);

}  // namespace qdnems::special
