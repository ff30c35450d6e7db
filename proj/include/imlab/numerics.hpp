#pragma once

// Shared numerical helpers: phi functions for exponential one-step schemes,
// least-squares fits, adaptive quadrature, smooth cutoffs, seeded sampling.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

namespace imlab {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// phi1(z) = (e^z - 1)/z, phi2(z) = (e^z - 1 - z)/z^2. Series branch keeps
// full precision through the cancellation region near z = 0.
inline double phi1(double z) {
  if (std::abs(z) < 1e-5)
    return 1.0 + z * (0.5 + z * (1.0 / 6.0 + z / 24.0));
  return std::expm1(z) / z;
}

inline double phi2(double z) {
  if (std::abs(z) < 1e-4)
    return 0.5 + z * (1.0 / 6.0 + z * (1.0 / 24.0 + z / 120.0));
  return (std::expm1(z) - z) / (z * z);
}

struct FitResult {
  double c0 = 0.0;  // intercept
  double c1 = 0.0;  // slope in t
  double c2 = 0.0;  // coefficient of t^2 (zero for a linear fit)
  double r2 = 0.0;
  int n = 0;
};

namespace detail {
inline FitResult polyfit(const std::vector<double>& t, const std::vector<double>& y,
                         int degree) {
  if (t.size() != y.size() || t.size() < static_cast<size_t>(degree + 1))
    throw std::invalid_argument("polyfit: need more samples than coefficients");
  const int n = static_cast<int>(t.size());
  Mat X(n, degree + 1);
  Vec b(n);
  for (int i = 0; i < n; ++i) {
    double p = 1.0;
    for (int j = 0; j <= degree; ++j) {
      X(i, j) = p;
      p *= t[i];
    }
    b(i) = y[i];
  }
  Vec c = (X.transpose() * X).ldlt().solve(X.transpose() * b);
  double mean = b.mean();
  double ss_tot = (b.array() - mean).square().sum();
  double ss_res = (b - X * c).squaredNorm();
  FitResult f;
  f.c0 = c(0);
  f.c1 = c(1);
  f.c2 = degree >= 2 ? c(2) : 0.0;
  f.r2 = ss_tot > 0 ? 1.0 - ss_res / ss_tot : 1.0;
  f.n = n;
  return f;
}
}  // namespace detail

inline FitResult linear_fit(const std::vector<double>& t, const std::vector<double>& y) {
  return detail::polyfit(t, y, 1);
}

inline FitResult quadratic_fit(const std::vector<double>& t, const std::vector<double>& y) {
  return detail::polyfit(t, y, 2);
}

namespace detail {
inline std::vector<double> to_std(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}
}  // namespace detail

inline FitResult linear_fit(const Vec& t, const Vec& y) {
  return detail::polyfit(detail::to_std(t), detail::to_std(y), 1);
}

inline FitResult quadratic_fit(const Vec& t, const Vec& y) {
  return detail::polyfit(detail::to_std(t), detail::to_std(y), 2);
}

// Adaptive Simpson quadrature. The integrand must be smooth on [a, b].
namespace detail {
inline double simpson(const std::function<double(double)>& f, double a, double fa,
                      double b, double fb, double m, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

inline double adapt(const std::function<double(double)>& f, double a, double fa, double b,
                    double fb, double m, double fm, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(f, a, fa, m, fm, lm, flm);
  double right = simpson(f, m, fm, b, fb, rm, frm);
  if (depth <= 0) return left + right;
  if (std::abs(left + right - whole) <= 15.0 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adapt(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double tol = 1e-12, int max_depth = 40) {
  if (!(b > a)) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fb = f(b), fm = f(m);
  double whole = detail::simpson(f, a, fa, b, fb, m, fm);
  return detail::adapt(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

// C-infinity step: 0 for x <= 0, 1 for x >= 1, strictly monotone between.
inline double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  double g0 = std::exp(-1.0 / x);
  double g1 = std::exp(-1.0 / (1.0 - x));
  return g0 / (g0 + g1);
}

inline double smooth_step_between(double x, double a, double b) {
  return smooth_step((x - a) / (b - a));
}

inline double smooth_step_deriv(double x) {
  if (x <= 0.0 || x >= 1.0) return 0.0;
  double g0 = std::exp(-1.0 / x);
  double g1 = std::exp(-1.0 / (1.0 - x));
  double s = g0 + g1;
  return g0 * g1 * (1.0 / (x * x) + 1.0 / ((1.0 - x) * (1.0 - x))) / (s * s);
}

// max |d/dx smooth_step| on [0,1]; cached dense sample, used when a declared
// Lipschitz constant must account for a cutoff slope.
inline double smooth_step_max_slope() {
  static const double slope = [] {
    double best = 0.0;
    const int n = 200000;
    double prev = smooth_step(0.0);
    for (int i = 1; i <= n; ++i) {
      double x = static_cast<double>(i) / n;
      double cur = smooth_step(x);
      best = std::max(best, std::abs(cur - prev) * n);
      prev = cur;
    }
    return best;
  }();
  return slope;
}

// Radial cutoff in r: 1 on [0, cutoff_radius], 0 on [2*cutoff_radius, inf).
inline double radial_cutoff(double cutoff_radius, double r) {
  if (!(cutoff_radius > 0.0))
    throw std::invalid_argument("radial_cutoff: cutoff_radius must be positive");
  return 1.0 - smooth_step_between(r, cutoff_radius, 2.0 * cutoff_radius);
}

inline double radial_cutoff_deriv(double cutoff_radius, double r) {
  return -smooth_step_deriv((r - cutoff_radius) / cutoff_radius) / cutoff_radius;
}

// Trapezoid rule for samples y on grid t (not necessarily uniform).
inline double trapezoid(const std::vector<double>& t, const std::vector<double>& y) {
  if (t.size() != y.size() || t.size() < 2)
    throw std::invalid_argument("trapezoid: grid/sample mismatch");
  double s = 0.0;
  for (size_t k = 0; k + 1 < t.size(); ++k)
    s += 0.5 * (t[k + 1] - t[k]) * (y[k] + y[k + 1]);
  return s;
}

inline double trapezoid(const Vec& t, const Vec& y) {
  return trapezoid(detail::to_std(t), detail::to_std(y));
}

inline Vec gaussian_vector(int n, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Vec v(n);
  for (int i = 0; i < n; ++i) v(i) = g(rng);
  return v;
}

// Uniform sample from the solid ball of given radius.
inline Vec ball_vector(int n, double radius, std::mt19937_64& rng) {
  Vec v = gaussian_vector(n, rng);
  double nr = v.norm();
  if (nr == 0.0) return Vec::Zero(n);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double r = radius * std::pow(u(rng), 1.0 / n);
  return v * (r / nr);
}

// Normalizes v in place and returns log ||v||; returns -inf for v = 0.
inline double log_renormalize(Vec& v) {
  double nr = v.norm();
  if (nr == 0.0) return -std::numeric_limits<double>::infinity();
  v /= nr;
  return std::log(nr);
}

}  // namespace imlab
