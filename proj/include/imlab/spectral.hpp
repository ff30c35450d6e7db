#pragma once

// Eigenbasis arithmetic for the diagonal operator A: states as coefficient
// vectors, Sobolev-scale norms, low/high projectors at a cut index, shell
// index sets, the indefinite cone form, and the exact linear semigroup.
//
// Convention: the math is 1-based (modes 1..M, cut keeps 1..N); storage is
// 0-based. lambda(n) takes the 1-based mode number.

#include <Eigen/Dense>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "imlab/numerics.hpp"

namespace imlab {

struct Spectrum {
  std::vector<double> values;       // nondecreasing, all > 0, length M >= 2
  std::vector<std::string> labels;  // empty or one label per mode
  std::string source;

  int size() const { return static_cast<int>(values.size()); }

  double lambda(int n) const {  // 1-based
    if (n < 1 || n > size()) throw std::out_of_range("Spectrum::lambda: mode out of range");
    return values[n - 1];
  }

  void validate() const {
    if (size() < 2) throw std::invalid_argument("Spectrum: need at least two modes");
    if (!(values.front() > 0.0)) throw std::invalid_argument("Spectrum: eigenvalues must be positive");
    for (size_t i = 0; i + 1 < values.size(); ++i)
      if (values[i + 1] < values[i])
        throw std::invalid_argument("Spectrum: eigenvalues must be nondecreasing");
    if (!labels.empty() && labels.size() != values.size())
      throw std::invalid_argument("Spectrum: label count mismatch");
  }
};

struct State {
  Vec c;
  const Spectrum* sp = nullptr;

  State() = default;
  State(Vec coeffs, const Spectrum& s) : c(std::move(coeffs)), sp(&s) {
    if (c.size() != s.size()) throw std::invalid_argument("State: length mismatch");
  }

  double norm() const { return c.norm(); }
  double sobolev(double s) const;
};

inline double sobolev_norm(const Spectrum& sp, const Vec& c, double s) {
  if (c.size() != sp.size()) throw std::invalid_argument("sobolev_norm: length mismatch");
  double acc = 0.0;
  for (int i = 0; i < c.size(); ++i) acc += std::pow(sp.values[i], s) * c(i) * c(i);
  return std::sqrt(acc);
}

inline double State::sobolev(double s) const { return sobolev_norm(*sp, c, s); }

inline void check_cut(int N, int M) {
  if (N < 1 || N > M) throw std::out_of_range("cut index N out of range");
}

inline Vec project_low(const Vec& c, int N) {
  check_cut(N, static_cast<int>(c.size()));
  Vec out = Vec::Zero(c.size());
  out.head(N) = c.head(N);
  return out;
}

inline Vec project_high(const Vec& c, int N) {
  check_cut(N, static_cast<int>(c.size()));
  Vec out = Vec::Zero(c.size());
  out.tail(c.size() - N) = c.tail(c.size() - N);
  return out;
}

// V(u) = ||Q_N u||^2 - ||P_N u||^2; u lies in the cone K+ iff V(u) <= 0.
inline double cone_value(const Vec& c, int N) {
  check_cut(N, static_cast<int>(c.size()));
  double lo = c.head(N).squaredNorm();
  return c.squaredNorm() - 2.0 * lo;
}

// Index sets (1-based mode numbers) of the three shell projectors at cut N
// with half-width k: below lambda_N - k, the closed middle band, and above
// lambda_{N+1} + k. Requires k < lambda_N so the low set stays below the cut.
struct ShellSplit {
  std::vector<int> low, shell, high;
};

inline ShellSplit shell_projector(const Spectrum& sp, int N, double k) {
  if (N < 1 || N >= sp.size()) throw std::out_of_range("shell_projector: need 1 <= N < M");
  if (!(k > 0.0) || k >= sp.lambda(N))
    throw std::invalid_argument("shell_projector: need 0 < k < lambda_N");
  double lo_edge = sp.lambda(N) - k;
  double hi_edge = sp.lambda(N + 1) + k;
  ShellSplit out;
  for (int n = 1; n <= sp.size(); ++n) {
    double l = sp.lambda(n);
    if (l < lo_edge)
      out.low.push_back(n);
    else if (l <= hi_edge)
      out.shell.push_back(n);
    else
      out.high.push_back(n);
  }
  return out;
}

inline Vec semigroup_apply(const Spectrum& sp, const Vec& c, double t) {
  if (t < 0.0) throw std::invalid_argument("semigroup_apply: t must be nonnegative");
  if (c.size() != sp.size()) throw std::invalid_argument("semigroup_apply: length mismatch");
  Vec out(c.size());
  for (int i = 0; i < c.size(); ++i) out(i) = std::exp(-sp.values[i] * t) * c(i);
  return out;
}

// Dichotomy constants for the split at N: alpha = (lambda_N + lambda_{N+1})/2,
// theta = (lambda_{N+1} - lambda_N)/2. theta = 0 means no gap.
struct Dichotomy {
  double alpha = 0.0;
  double theta = 0.0;
};

inline Dichotomy dichotomy_constants(const Spectrum& sp, int N) {
  if (N < 1 || N >= sp.size()) throw std::out_of_range("dichotomy_constants: need 1 <= N < M");
  return {0.5 * (sp.lambda(N) + sp.lambda(N + 1)), 0.5 * (sp.lambda(N + 1) - sp.lambda(N))};
}

}  // namespace imlab
