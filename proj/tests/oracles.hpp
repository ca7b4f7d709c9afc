// Independent reference computations used by the tests. Nothing here calls
// into the library's numerics.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace oracle {

inline constexpr double pi = std::numbers::pi;

/// erf by its Maclaurin series; accurate to ~1e-15 for |x| <= 3.
inline double erf_series(double x) {
  double term = x, sum = x;
  for (int n = 1; n < 200; ++n) {
    term *= -x * x / n;
    const double add = term / (2 * n + 1);
    sum += add;
    if (std::abs(add) < 1e-18) break;
  }
  return 2.0 / std::sqrt(pi) * sum;
}

inline double Phi(double x) { return 0.5 * (1.0 + erf_series(x / std::sqrt(2.0))); }

namespace detail {
inline double simpson_step(const std::function<double(double)>& f, double a, double b, double fa, double fm,
                           double fb, double whole, double eps, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps) return left + right + (left + right - whole) / 15.0;
  return simpson_step(f, a, m, fa, flm, fm, left, 0.5 * eps, depth - 1) +
         simpson_step(f, m, b, fm, frm, fb, right, 0.5 * eps, depth - 1);
}
}  // namespace detail

/// Adaptive Simpson quadrature.
inline double simpson(const std::function<double(double)>& f, double a, double b, double eps = 1e-12,
                      int depth = 40) {
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_step(f, a, b, fa, fm, fb, whole, eps, depth);
}

/// Composite Simpson on n panels of [a, b]; for integrands with kinks.
inline double simpson_panels(const std::function<double(double)>& f, double a, double b, int n) {
  double s = 0.0;
  const double h = (b - a) / n;
  for (int i = 0; i < n; ++i) {
    const double x = a + i * h;
    s += h / 6.0 * (f(x) + 4.0 * f(x + 0.5 * h) + f(x + h));
  }
  return s;
}

inline double dist_to_pi_z(double a) {
  const double r = std::fmod(std::abs(a), pi);
  return std::min(r, pi - r);
}

inline std::uint64_t binom(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::uint64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * std::uint64_t(n - k + i) / std::uint64_t(i);
  return r;
}

/// All sign patterns of n entries, as ±1 vectors.
inline std::vector<std::vector<int>> sign_patterns(int n) {
  std::vector<std::vector<int>> out;
  for (std::uint64_t m = 0; m < (std::uint64_t(1) << n); ++m) {
    std::vector<int> s(n);
    for (int j = 0; j < n; ++j) s[j] = (m >> j) & 1 ? 1 : -1;
    out.push_back(s);
  }
  return out;
}

}  // namespace oracle
