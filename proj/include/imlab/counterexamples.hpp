#pragma once

// Sharp-side constructions: block spectra whose linearizations admit no real
// eigendirections, a time-periodic coupling whose period map is a weighted
// shift with super-exponentially decaying orbit norms, and a planar attractor
// decorated with straight segments along infinitely many coordinate axes.

#include <cmath>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "imlab/numerics.hpp"
#include "imlab/reduction.hpp"
#include "imlab/spectral.hpp"

namespace imlab {

// ---------------------------------------------------------------------------
// Paired-block linearizations

struct C1Block {
  int lo = 0, hi = 0;  // 1-based mode pair
  double alpha = 0.0;  // common real part -(lambda_lo + lambda_hi)/2
  double omega = 0.0;  // imaginary part, positive when 2L > gap
};

struct C1Spectra {
  std::vector<C1Block> minus_blocks;  // pairs (1,2), (3,4), ...
  std::vector<C1Block> plus_blocks;   // pairs (2,3), (4,5), ...
  double unstable = 0.0;              // the single real eigenvalue L - lambda_1
  int real_count_minus = 0;
  int real_count_plus = 0;
};

// Eigenvalue data of the two equilibrium linearizations built from a coupling
// of strength L. Every complete pair rotates (no real roots) exactly when
// 2L exceeds the gap inside the pair; the second family keeps mode 1
// uncoupled, contributing the lone real eigenvalue L - lambda_1. Tangent
// spaces spanned by root spaces therefore have even dimension at the first
// equilibrium and odd dimension at the second, which is the contradiction.
inline C1Spectra c1_obstruction_spectra(const Spectrum& sp, double L) {
  sp.validate();
  const int M = sp.size();
  if (M < 3) throw std::invalid_argument("c1_obstruction_spectra: need at least 3 modes");
  if (L < sp.lambda(1))
    throw std::invalid_argument("c1_obstruction_spectra: L below lambda_1, no unstable direction");
  for (int n = 1; n < M; ++n) {
    double gap = sp.lambda(n + 1) - sp.lambda(n);
    if (2.0 * L <= gap)
      throw std::invalid_argument("c1_obstruction_spectra: 2L <= gap at block (" +
                                  std::to_string(n) + "," + std::to_string(n + 1) + ")");
  }
  auto block = [&](int lo) {
    C1Block b;
    b.lo = lo;
    b.hi = lo + 1;
    double gap = sp.lambda(lo + 1) - sp.lambda(lo);
    b.alpha = -0.5 * (sp.lambda(lo) + sp.lambda(lo + 1));
    b.omega = 0.5 * std::sqrt(4.0 * L * L - gap * gap);
    return b;
  };
  C1Spectra out;
  for (int lo = 1; lo + 1 <= M; lo += 2) out.minus_blocks.push_back(block(lo));
  for (int lo = 2; lo + 1 <= M; lo += 2) out.plus_blocks.push_back(block(lo));
  out.unstable = L - sp.lambda(1);
  out.real_count_minus = 0;
  out.real_count_plus = 1;
  return out;
}

// ---------------------------------------------------------------------------
// Periodic coupling operator

// Coupling Phi(x) driven by the 2T-periodic profile x(t) = amp sin(pi t/T).
// While x > 0 only adjacent pairs (1,2), (3,4), ... interact; while x < 0 only
// (2,3), (4,5), ... do, and mode 1 idles. Inside each active pair the gate
// theta2 equalizes the two decay rates to their mean and the gate theta1
// switches on a rotation whose half-period total angle is exactly pi/2, so
// the period map permutes basis directions with scalar multipliers.
struct PeriodicOperator {
  Spectrum sp;
  double T = 0.0;    // half-period; Phi(x(t)) has period 2T
  double amp = 0.0;  // profile amplitude
  double eps = 0.0;  // rotation amplitude, fixed by quadrature

  double T0 = 0.0;               // first crossing of amp/4 by the profile
  double theta1_integral = 0.0;  // integral of theta1(x(t)) over [T0, T-T0]
  double mirror_integral = 0.0;  // integral of theta1(-x(t)) over [T+T0, 2T-T0]
  double env_lo = 0.0, env_hi = 0.0;  // envelope constants: env_lo*k <= lambda_k <= env_hi*k
  double norm_bound = 0.0;            // sup_x ||Phi(x)|| <= max gap/2 + |eps|

  int modes() const { return sp.size(); }
  double profile(double t) const { return amp * std::sin(M_PI * t / T); }
  double theta1(double s) const { return smooth_step_between(s, 0.25 * amp, 0.5 * amp); }
  double theta2(double s) const { return smooth_step_between(s, 0.0, 0.25 * amp); }

  // out = Phi(x) w
  void apply(double x, const Vec& w, Vec& out) const {
    const int M = sp.size();
    out.setZero();
    double t1p = theta1(x), t2p = theta2(x);
    double t1m = theta1(-x), t2m = theta2(-x);
    if (t1p > 0.0 || t2p > 0.0) {
      for (int a = 0; a + 1 < M; a += 2) {  // pairs (1,2), (3,4), ...
        int b = a + 1;
        double half = 0.5 * (sp.values[a] - sp.values[b]);
        out[a] += half * t2p * w[a] + eps * t1p * w[b];
        out[b] += -half * t2p * w[b] - eps * t1p * w[a];
      }
    }
    if (t1m > 0.0 || t2m > 0.0) {
      for (int a = 1; a + 1 < M; a += 2) {  // pairs (2,3), (4,5), ...; mode 1 idles
        int b = a + 1;
        double half = 0.5 * (sp.values[a] - sp.values[b]);
        out[a] += half * t2m * w[a] + eps * t1m * w[b];
        out[b] += -half * t2m * w[b] - eps * t1m * w[a];
      }
    }
  }

  Mat matrix(double x) const {
    const int M = sp.size();
    Mat out(M, M);
    Vec col(M), basis = Vec::Zero(M);
    for (int j = 0; j < M; ++j) {
      basis[j] = 1.0;
      apply(x, basis, col);
      out.col(j) = col;
      basis[j] = 0.0;
    }
    return out;
  }

  // out = -Lambda w + Phi(x(t)) w
  void rhs(double t, const Vec& w, Vec& out) const {
    apply(profile(t), w, out);
    for (int i = 0; i < sp.size(); ++i) out[i] -= sp.values[i] * w[i];
  }
};

inline PeriodicOperator build_periodic_operator(Spectrum sp, double T, double amp = 1.0,
                                                double L_target = 0.0,
                                                double quad_tol = 1e-12) {
  sp.validate();
  if (sp.size() < 3)
    throw std::invalid_argument("build_periodic_operator: need at least 3 modes");
  if (!(T > 0.0)) throw std::invalid_argument("build_periodic_operator: T must be positive");
  if (!(amp > 0.0)) throw std::invalid_argument("build_periodic_operator: amp must be positive");
  if (!(quad_tol > 0.0))
    throw std::invalid_argument("build_periodic_operator: quad_tol must be positive");

  PeriodicOperator op;
  op.sp = std::move(sp);
  op.T = T;
  op.amp = amp;
  op.T0 = (T / M_PI) * std::asin(0.25);

  auto gate_fwd = [&op](double t) { return op.theta1(op.profile(t)); };
  auto gate_rev = [&op](double t) { return op.theta1(-op.profile(t)); };
  // two resolutions; a fixed recursion budget keeps the failure path cheap,
  // and tolerances below the roundoff floor of the interval are uncertifiable
  double coarse = integrate_adaptive(gate_fwd, op.T0, T - op.T0, quad_tol, 20);
  double fine = integrate_adaptive(gate_fwd, op.T0, T - op.T0, quad_tol / 16.0, 22);
  double floor = 16.0 * std::numeric_limits<double>::epsilon() * (T - 2.0 * op.T0);
  if (std::abs(coarse - fine) > 50.0 * quad_tol || quad_tol < floor)
    throw std::runtime_error("build_periodic_operator: quadrature did not converge");
  op.theta1_integral = fine;
  op.mirror_integral = integrate_adaptive(gate_rev, T + op.T0, 2.0 * T - op.T0, quad_tol / 16.0, 22);
  op.eps = -M_PI / (2.0 * op.theta1_integral);

  const int M = op.sp.size();
  double max_gap = 0.0;
  for (int n = 1; n < M; ++n)
    max_gap = std::max(max_gap, op.sp.lambda(n + 1) - op.sp.lambda(n));
  op.norm_bound = 0.5 * max_gap + std::abs(op.eps);
  op.env_lo = std::numeric_limits<double>::infinity();
  op.env_hi = 0.0;
  for (int n = 1; n <= M; ++n) {
    op.env_lo = std::min(op.env_lo, op.sp.lambda(n) / n);
    op.env_hi = std::max(op.env_hi, op.sp.lambda(n) / n);
  }
  if (L_target > 0.0 && op.norm_bound > L_target)
    throw std::runtime_error("build_periodic_operator: norm bound " +
                             std::to_string(op.norm_bound) + " exceeds target L " +
                             std::to_string(L_target));
  return op;
}

// ---------------------------------------------------------------------------
// Period map

struct PoincareEntry {
  int source = 0, target = 0;  // 1-based modes
  double mu_log = 0.0;         // predicted log multiplier
  double rel_err = 0.0;        // |measured/predicted - 1| on the magnitude
  double off_target = 0.0;     // mass of the unit column outside the target mode
};

struct PoincareReport {
  Mat unit;       // column j-1 holds the direction of P e_j (empty: predictions only)
  Vec log_scale;  // log magnitude of each column
  std::vector<double> mu_log;  // [0]: e2 -> e1 step, [k]: shift step from mode k
  double T = 0.0;
  int modes = 0;
  double dt = 0.0;
  std::vector<PoincareEntry> entries;
  double max_rel_err = 0.0;
  double max_off_target = 0.0;

  bool has_map() const { return unit.size() > 0; }
};

// Predicted log multipliers. The shift step from mode k accumulates the mean
// decay of pairs (k, k+1) and (k+1, k+2) over one half-period each; the
// e2 -> e1 step pairs (1,2) with a bare half-period of mode 1, which idles
// while x < 0.
inline PoincareReport multiplier_table(const PeriodicOperator& op) {
  PoincareReport rep;
  rep.T = op.T;
  rep.modes = op.modes();
  const int M = rep.modes;
  rep.mu_log.assign(std::max(M - 1, 0), 0.0);
  if (M >= 2) rep.mu_log[0] = -op.T * (3.0 * op.sp.lambda(1) + op.sp.lambda(2)) / 2.0;
  for (int k = 1; k + 2 <= M; ++k)
    rep.mu_log[k] =
        -op.T * (op.sp.lambda(k) + 2.0 * op.sp.lambda(k + 1) + op.sp.lambda(k + 2)) / 2.0;
  return rep;
}

namespace detail {

// one RK4 step of op.rhs, renormalized; returns the log of the factor removed
inline double poincare_step(const PeriodicOperator& op, double t, double h, Vec& w, Vec& k1,
                            Vec& k2, Vec& k3, Vec& k4, Vec& tmp) {
  op.rhs(t, w, k1);
  tmp = w + 0.5 * h * k1;
  op.rhs(t + 0.5 * h, tmp, k2);
  tmp = w + 0.5 * h * k2;
  op.rhs(t + 0.5 * h, tmp, k3);
  tmp = w + h * k3;
  op.rhs(t + h, tmp, k4);
  w += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  double n = w.norm();
  if (!(n > 0.0) || !std::isfinite(n))
    throw std::runtime_error("poincare_map: integration lost the column");
  w /= n;
  return std::log(n);
}

}  // namespace detail

// Integrates w' = -Lambda w + Phi(x(t)) w over one full period per basis
// vector, renormalizing every step so only logarithms of magnitudes are
// carried. Columns whose predicted images stay inside the truncation are
// compared against the multiplier table.
inline PoincareReport poincare_map(const PeriodicOperator& op, double dt) {
  if (!(dt > 0.0) || dt > op.T / 1000.0)
    throw std::invalid_argument("poincare_map: dt must lie in (0, T/1000]");
  PoincareReport rep = multiplier_table(op);
  rep.dt = dt;
  const int M = rep.modes;
  long steps = static_cast<long>(std::ceil(2.0 * op.T / dt));
  double h = 2.0 * op.T / double(steps);

  rep.unit.resize(M, M);
  rep.log_scale.resize(M);
  Vec w(M), k1(M), k2(M), k3(M), k4(M), tmp(M);
  for (int j = 0; j < M; ++j) {
    w.setZero();
    w[j] = 1.0;
    double lg = 0.0;
    for (long s = 0; s < steps; ++s)
      lg += detail::poincare_step(op, h * double(s), h, w, k1, k2, k3, k4, tmp);
    rep.unit.col(j) = w;
    rep.log_scale[j] = lg;
  }

  auto record = [&rep](int source, int target, double pred) {
    PoincareEntry e;
    e.source = source;
    e.target = target;
    e.mu_log = pred;
    double meas = rep.log_scale[source - 1] +
                  std::log(std::abs(rep.unit(target - 1, source - 1)));
    e.rel_err = std::abs(std::expm1(meas - pred));
    double off2 = 0.0;
    for (int i = 0; i < rep.modes; ++i)
      if (i != target - 1) off2 += rep.unit(i, source - 1) * rep.unit(i, source - 1);
    e.off_target = std::sqrt(off2);
    rep.entries.push_back(e);
    rep.max_rel_err = std::max(rep.max_rel_err, e.rel_err);
    rep.max_off_target = std::max(rep.max_off_target, e.off_target);
  };
  for (int j = 1; j <= M; j += 2)
    if (j + 2 <= M) record(j, j + 2, rep.mu_log[j]);
  if (M >= 2) record(2, 1, rep.mu_log[0]);
  for (int j = 4; j <= M; j += 2) record(j, j - 2, rep.mu_log[j - 2]);
  return rep;
}

// log ||P^N e_start|| by walking the shift chain through the multiplier table:
// odd modes step up by two, even modes step down, e2 hands off to e1.
inline double shift_chain_log(const PoincareReport& rep, int start, int N) {
  if (start < 1 || start > rep.modes)
    throw std::invalid_argument("shift_chain_log: start mode out of range");
  double acc = 0.0;
  int m = start;
  for (int it = 0; it < N; ++it) {
    if (m % 2 == 1) {
      if (m + 2 > rep.modes)
        throw std::invalid_argument("shift_chain_log: chain leaves the truncation");
      acc += rep.mu_log[m];
      m += 2;
    } else if (m == 2) {
      acc += rep.mu_log[0];
      m = 1;
    } else {
      acc += rep.mu_log[m - 2];
      m -= 2;
    }
  }
  return acc;
}

// log ||P^N e_start|| by repeated application of the measured map, factoring
// the largest column exponent out of every product so no magnitude ever
// leaves the representable range.
inline double log_power_norm(const PoincareReport& rep, int start, int N) {
  if (!rep.has_map()) throw std::invalid_argument("log_power_norm: report carries no map");
  if (start < 1 || start > rep.modes)
    throw std::invalid_argument("log_power_norm: start mode out of range");
  const int M = rep.modes;
  Vec u = Vec::Zero(M);
  u[start - 1] = 1.0;
  double lg = 0.0;
  Vec w(M);
  for (int it = 0; it < N; ++it) {
    double shift = -std::numeric_limits<double>::infinity();
    for (int k = 0; k < M; ++k)
      if (u[k] != 0.0) shift = std::max(shift, rep.log_scale[k]);
    w.setZero();
    for (int k = 0; k < M; ++k) {
      if (u[k] == 0.0) continue;
      double f = std::exp(rep.log_scale[k] - shift);
      if (f > 0.0) w += (u[k] * f) * rep.unit.col(k);
    }
    double n = w.norm();
    if (!(n > 0.0) || !std::isfinite(n))
      throw std::runtime_error("log_power_norm: iterate vanished");
    u = w / n;
    lg += shift + std::log(n);
  }
  return lg;
}

// ---------------------------------------------------------------------------
// Orbit-norm decay of the e2 chain

struct SuperexpReport {
  std::vector<double> log_map;      // log ||P^N e2|| by repeated map application
  std::vector<double> log_product;  // same thing through the multiplier chain
  double max_abs_diff = 0.0;
  FitResult fit;  // quadratic fit of log_map against N
  double env_rate_min = 0.0, env_rate_max = 0.0;  // per-mode multiplier rates
  double bracket_lo = 0.0, bracket_hi = 0.0;
  bool coeff_in_bracket = false;
};

inline SuperexpReport superexp_decay(const PoincareReport& rep, int N_iter) {
  if (!rep.has_map()) throw std::invalid_argument("superexp_decay: report carries no map");
  if (N_iter < 3) throw std::invalid_argument("superexp_decay: need N_iter >= 3");
  if (2 * N_iter - 1 > rep.modes)
    throw std::invalid_argument("superexp_decay: chain leaves the truncation");
  SuperexpReport out;
  std::vector<double> ns;
  for (int N = 1; N <= N_iter; ++N) {
    out.log_map.push_back(log_power_norm(rep, 2, N));
    out.log_product.push_back(shift_chain_log(rep, 2, N));
    out.max_abs_diff =
        std::max(out.max_abs_diff, std::abs(out.log_map.back() - out.log_product.back()));
    ns.push_back(double(N));
  }
  out.fit = quadratic_fit(ns, out.log_map);
  out.env_rate_min = std::numeric_limits<double>::infinity();
  out.env_rate_max = 0.0;
  for (int k = 1; k + 2 <= rep.modes; ++k) {
    double rate = -rep.mu_log[k] / (rep.T * double(k));
    out.env_rate_min = std::min(out.env_rate_min, rate);
    out.env_rate_max = std::max(out.env_rate_max, rate);
  }
  out.bracket_lo = -out.env_rate_max * rep.T;
  out.bracket_hi = -0.5 * out.env_rate_min * rep.T;
  out.coeff_in_bracket = out.fit.c2 >= out.bracket_lo && out.fit.c2 <= out.bracket_hi;
  return out;
}

// ---------------------------------------------------------------------------
// Non-uniform chain ratios

struct RatioReport {
  int n = 0, k = 0, N = 0;
  double first_log_max = 0.0;   // max over s of log(||P^N e1|| / ||P^N e_{2s}||)
  double beta = 0.0;            // -first_log_max / n^2
  double middle_max_abs = 0.0;  // max over s1, s2 of |log(||P^N e_{2s1}|| / ||P^N e_{2s2}||)|
  double gamma = 0.0;           // middle_max_abs / n^{3/2}
  double map_product_diff = -1.0;  // measured-map cross-check, -1 when skipped
};

// Compares the straight ascending chain from e1 against the chains from
// e_{2s}, n <= s <= n+k, k = floor(sqrt(n)), over N = 2n+k applications. The
// descending prefix of the e_{2s} chains retains far more mass, so the first
// ratio collapses at rate n^2 while the chains inside the window stay within
// an n^{3/2} band of each other.
inline RatioReport nonuniform_ratios(const PoincareReport& rep, int n, bool map_check = false) {
  if (n < 1) throw std::invalid_argument("nonuniform_ratios: n >= 1");
  RatioReport out;
  out.n = n;
  out.k = static_cast<int>(std::floor(std::sqrt(double(n))));
  out.N = 2 * n + out.k;
  if (2 * out.N + 1 > rep.modes)
    throw std::invalid_argument("nonuniform_ratios: need at least " +
                                std::to_string(2 * out.N + 1) + " modes");
  double first = shift_chain_log(rep, 1, out.N);
  std::vector<double> window;
  for (int s = n; s <= n + out.k; ++s) window.push_back(shift_chain_log(rep, 2 * s, out.N));
  out.first_log_max = -std::numeric_limits<double>::infinity();
  for (double w : window) out.first_log_max = std::max(out.first_log_max, first - w);
  out.beta = -out.first_log_max / (double(n) * n);
  for (double a : window)
    for (double b : window) out.middle_max_abs = std::max(out.middle_max_abs, std::abs(a - b));
  out.gamma = out.middle_max_abs / std::pow(double(n), 1.5);
  if (map_check) {
    out.map_product_diff = std::abs(log_power_norm(rep, 1, out.N) - first);
    for (int s : {n, n + out.k}) {
      double diff = std::abs(log_power_norm(rep, 2 * s, out.N) - shift_chain_log(rep, 2 * s, out.N));
      out.map_product_diff = std::max(out.map_product_diff, diff);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segments attractor

struct SegmentsParams {
  std::vector<double> E;    // angular widths of the kick intervals
  std::vector<double> B;    // kick amplitudes, strictly decreasing
  std::vector<double> lam;  // decay rates of the driven modes
  double horizon = 16.0;    // simulated e-foldings per segment check
  int pts_per_seg = 6;      // uniform samples per segment, clip values extra
};

// Planar circle of equilibria R = 1 with one driven mode per kick interval.
// On the kick centers the planar point is fixed and its mode relaxes to
// B_n / lam_n, tracing a straight segment along e_n; the union of segments
// over all n is the projection of the attractor onto the driven modes.
struct SegmentsAttractor {
  SegmentsParams prm;
  std::vector<double> phi;  // kick centers, packed with uniform spacing
  std::vector<double> eps;  // segment lengths B_n / lam_n
  PointCloud cloud;         // segment samples in the driven-mode coordinates
  double sim_error = 0.0;   // worst deviation of the simulated flow from closed form

  int count() const { return static_cast<int>(prm.E.size()); }

  double bump(int n, double angle) const {  // n is 1-based
    double d = std::remainder(angle - phi[n - 1], 2.0 * M_PI);
    double half = 0.5 * prm.E[n - 1];
    if (std::abs(d) >= half) return 0.0;
    double s = d / half;
    return std::exp(-s * s / (1.0 - s * s));
  }

  double radial_gate(double R) const { return smooth_step_between(R, 0.25, 0.5); }

  // state = (x, y, w_1, ..., w_count)
  Vec rhs(const Vec& state) const {
    Vec out(state.size());
    double x = state[0], y = state[1];
    double R2 = x * x + y * y;
    out[0] = -x * (R2 - 1.0);
    out[1] = -y * (R2 - 1.0);
    double gate = radial_gate(std::sqrt(R2));
    double angle = std::atan2(y, x);
    for (int n = 1; n <= count(); ++n)
      out[1 + n] = -prm.lam[n - 1] * state[1 + n] + prm.B[n - 1] * gate * bump(n, angle);
    return out;
  }

  Vec flow(Vec state, double t_end, double dt) const {
    double t = 0.0;
    while (t < t_end) {
      double h = std::min(dt, t_end - t);
      Vec k1 = rhs(state);
      Vec k2 = rhs(state + 0.5 * h * k1);
      Vec k3 = rhs(state + 0.5 * h * k2);
      Vec k4 = rhs(state + h * k3);
      state += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
      t += h;
    }
    return state;
  }

  Vec equilibrium(int n) const {  // 1-based
    Vec p = Vec::Zero(2 + count());
    p[0] = std::cos(phi[n - 1]);
    p[1] = std::sin(phi[n - 1]);
    p[1 + n] = eps[n - 1];
    return p;
  }
};

inline SegmentsAttractor segments_attractor(const SegmentsParams& prm) {
  const int n_max = static_cast<int>(prm.E.size());
  if (n_max < 1) throw std::invalid_argument("segments_attractor: no segments");
  if (prm.B.size() != prm.E.size() || prm.lam.size() != prm.E.size())
    throw std::invalid_argument("segments_attractor: E, B, lam sizes differ");
  if (prm.pts_per_seg < 2) throw std::invalid_argument("segments_attractor: pts_per_seg >= 2");
  if (!(prm.horizon > 0.0)) throw std::invalid_argument("segments_attractor: horizon > 0");
  double total = 0.0;
  for (double e : prm.E) {
    if (!(e > 0.0)) throw std::invalid_argument("segments_attractor: widths must be positive");
    total += e;
  }
  if (total >= 2.0 * M_PI)
    throw std::invalid_argument("segments_attractor: kick intervals do not fit on the circle");
  for (int i = 0; i < n_max; ++i) {
    if (!(prm.B[i] > 0.0)) throw std::invalid_argument("segments_attractor: B must be positive");
    if (i > 0 && prm.B[i] >= prm.B[i - 1])
      throw std::invalid_argument("segments_attractor: B must be strictly decreasing");
    if (!(prm.lam[i] > 0.0))
      throw std::invalid_argument("segments_attractor: lam must be positive");
    if (i > 0 && prm.lam[i] <= prm.lam[i - 1])
      throw std::invalid_argument("segments_attractor: lam must be strictly increasing");
  }

  SegmentsAttractor out;
  out.prm = prm;
  double gap = (2.0 * M_PI - total) / double(n_max + 1);
  double cursor = 0.0;
  for (int i = 0; i < n_max; ++i) {
    cursor += gap + 0.5 * prm.E[i];
    out.phi.push_back(cursor);
    cursor += 0.5 * prm.E[i];
    out.eps.push_back(prm.B[i] / prm.lam[i]);
  }

  // segment samples: uniform fractions plus every shorter segment's full
  // length, so each ball of radius eps_m around the origin holds the points
  // eps_m e_n for all n <= m
  std::vector<Vec> pts;
  pts.push_back(Vec::Zero(n_max));
  for (int n = 1; n <= n_max; ++n) {
    std::vector<double> vals;
    for (int j = 1; j < prm.pts_per_seg; ++j)
      vals.push_back(out.eps[n - 1] * double(j) / double(prm.pts_per_seg));
    for (int k = n; k <= n_max; ++k) vals.push_back(out.eps[k - 1]);
    std::sort(vals.begin(), vals.end());
    vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
    for (double v : vals) {
      Vec p = Vec::Zero(n_max);
      p[n - 1] = v;
      pts.push_back(p);
    }
  }
  out.cloud.points = std::move(pts);

  // verify the simulated flow against the closed-form relaxation on each kick
  // center; the planar point is an exact equilibrium, so only mode n moves
  for (int n = 1; n <= n_max; ++n) {
    double lam = prm.lam[n - 1];
    double t_end = prm.horizon / lam;
    double dt = 0.05 / lam;
    Vec start = Vec::Zero(2 + n_max);
    start[0] = std::cos(out.phi[n - 1]);
    start[1] = std::sin(out.phi[n - 1]);
    Vec state = out.flow(start, t_end, dt);
    for (int i = 0; i < n_max; ++i) {
      double want = (i == n - 1) ? out.eps[i] * -std::expm1(-lam * t_end) : 0.0;
      out.sim_error = std::max(out.sim_error, std::abs(state[2 + i] - want));
    }
    out.sim_error = std::max(out.sim_error, std::abs(state[0] - start[0]));
    out.sim_error = std::max(out.sim_error, std::abs(state[1] - start[1]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Smoothness budget

struct SmoothnessBudget {
  double sup_log = 0.0;  // largest sampled log of B(n) lam(n)^s E(n)^{-k}
  bool finite = false;   // tail stopped growing within the probe range
};

// Probes sup_n B_n lam_n^s E_n^{-k}; the graph is C^k in H^s exactly when the
// supremum is finite. Sub-polynomial amplitudes beat every polynomial weight,
// polynomial amplitudes lose once s or k is large enough.
inline SmoothnessBudget smoothness_budget(const std::function<double(int)>& B,
                                          const std::function<double(int)>& E,
                                          const std::function<double(int)>& lam, double s,
                                          int k, int n_probe = 100000) {
  if (n_probe < 100) throw std::invalid_argument("smoothness_budget: n_probe >= 100");
  SmoothnessBudget out;
  double head = -std::numeric_limits<double>::infinity();
  double tail = head;
  out.sup_log = head;
  int split = n_probe / 10;
  for (int n = 1; n <= n_probe; ++n) {
    double b = B(n), e = E(n), l = lam(n);
    if (!(b > 0.0) || !(e > 0.0) || !(l > 0.0))
      throw std::invalid_argument("smoothness_budget: B, E, lam must stay positive");
    double v = std::log(b) + s * std::log(l) - double(k) * std::log(e);
    out.sup_log = std::max(out.sup_log, v);
    (n <= split ? head : tail) = std::max(n <= split ? head : tail, v);
  }
  out.finite = tail <= head;
  return out;
}

}  // namespace imlab
