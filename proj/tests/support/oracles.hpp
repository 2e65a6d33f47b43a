#pragma once

// Test-only reference implementations. Each one takes a different route from
// the library so agreement means something.

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>

namespace testing_oracle {

inline constexpr double hbar_meV_ns = 6.582119569e-4;

/// J_n(x) from its power series in long double (fine for x below ~20).
inline double bessel_series(int n, double x) {
  long double term = 1.0L;
  for (int k = 1; k <= n; ++k) term *= static_cast<long double>(x) / (2.0L * k);
  long double sum = term;
  const long double q = -static_cast<long double>(x) * x / 4.0L;
  for (int m = 1; m < 400; ++m) {
    term *= q / (static_cast<long double>(m) * (m + n));
    sum += term;
    if (std::fabs(term) < 1e-22L * std::fabs(sum) && m > x) break;
  }
  return static_cast<double>(sum);
}

/// Plain bisection to a bracketed sign change.
inline double bisect(const std::function<double(double)>& f, double lo, double hi) {
  double flo = f(lo);
  for (int i = 0; i < 200 && hi - lo > 1e-15 * hi; ++i) {
    const double mid = 0.5 * (lo + hi);
    const double fm = f(mid);
    if ((fm < 0) == (flo < 0)) {
      lo = mid;
      flo = fm;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

/// index-th zero of J_n by a fine scan plus bisection on the series.
inline double bessel_zero_series(int n, int index) {
  auto f = [n](double x) { return bessel_series(n, x); };
  double x = n > 0 ? static_cast<double>(n) : 0.1;
  double fx = f(x);
  int found = 0;
  for (;;) {
    const double next = x + 0.05;
    const double fn = f(next);
    if ((fx < 0) != (fn < 0)) {
      if (++found == index) return bisect(f, x, next);
    }
    x = next;
    fx = fn;
  }
}

/// Composite Simpson rule on [a, b] with an even number of panels.
inline double simpson(const std::function<double(double)>& f, double a, double b, int panels) {
  if (panels % 2) ++panels;
  const double h = (b - a) / panels;
  double s = f(a) + f(b);
  for (int i = 1; i < panels; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Fundamental of a clamped-free plate strip (beam limit), GHz:
/// (beta^2 / 2 pi) sqrt(D / (rho t)) / l^2 with beta = 1.8751.
inline double cantilever_fundamental_GHz(double length_nm, double thickness_nm, double density,
                                         double youngs_GPa, double poisson) {
  const double t = thickness_nm * 1e-9;
  const double l = length_nm * 1e-9;
  const double d = youngs_GPa * 1e9 * t * t * t / (12.0 * (1.0 - poisson * poisson));
  const double beta = 1.87510406871196;
  return beta * beta / (2.0 * std::numbers::pi) * std::sqrt(d / (density * t)) / (l * l) * 1e-9;
}

/// Relaxation d<n>/dt = -(gamma / hbar)(<n> - target).
inline double relaxed_occupation(double n0, double target, double gamma_meV, double t_ns) {
  return target + (n0 - target) * std::exp(-gamma_meV * t_ns / hbar_meV_ns);
}

/// exp(-i H t / hbar) by Eigen's Pade scaling-and-squaring matrix exponential.
inline Eigen::MatrixXcd dense_propagator(const Eigen::MatrixXcd& h, double t_ns) {
  const Eigen::MatrixXcd a = h * std::complex<double>(0.0, -t_ns / hbar_meV_ns);
  return a.exp();
}

}  // namespace testing_oracle
