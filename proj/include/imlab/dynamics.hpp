#pragma once

// Time integration by exponential midpoint, the bounded-solution saddle
// solver on a finite window, dissipativity probes, attractor sampling, and
// the backward log-convexity check.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imlab/models.hpp"
#include "imlab/numerics.hpp"
#include "imlab/spectral.hpp"

namespace imlab {

struct TrajectorySegment {
  std::vector<double> times;  // strictly increasing
  std::vector<Vec> states;    // coefficient vectors, one per node
  const Spectrum* sp = nullptr;
  const Model* model = nullptr;

  int nodes() const { return static_cast<int>(times.size()); }

  // linear interpolation between recorded nodes
  Vec interpolate(double t) const {
    if (times.empty()) throw std::runtime_error("interpolate: empty segment");
    double tol = 1e-9 * (1.0 + std::abs(times.back()));
    if (t < times.front() - tol || t > times.back() + tol)
      throw std::out_of_range("interpolate: time outside segment");
    auto it = std::lower_bound(times.begin(), times.end(), t);
    if (it == times.end()) return states.back();
    size_t j = static_cast<size_t>(it - times.begin());
    if (j == 0) return states.front();
    double w = (t - times[j - 1]) / (times[j] - times[j - 1]);
    return (1.0 - w) * states[j - 1] + w * states[j];
  }

  std::vector<double> norm_series() const {
    std::vector<double> out(states.size());
    for (size_t k = 0; k < states.size(); ++k) out[k] = states[k].norm();
    return out;
  }
};

inline TrajectorySegment segment_from_nodes(const Spectrum& sp, std::vector<double> times,
                                            std::vector<Vec> states) {
  if (times.size() != states.size() || times.size() < 2)
    throw std::invalid_argument("segment_from_nodes: need matching times/states, >= 2 nodes");
  for (size_t k = 1; k < times.size(); ++k)
    if (!(times[k] > times[k - 1]))
      throw std::invalid_argument("segment_from_nodes: times must increase");
  TrajectorySegment tr;
  tr.times = std::move(times);
  tr.states = std::move(states);
  tr.sp = &sp;
  return tr;
}

// One step of the exponential midpoint rule. The linear flow is exact; the
// Duhamel integral is approximated at the half step, which keeps the scheme
// exact for constant forcing and second order otherwise.
namespace detail {

struct StepTables {
  Vec E, P1, Emid, P1mid;
  double h = 0;
};

inline StepTables step_tables(const Spectrum& sp, double h) {
  int M = sp.size();
  StepTables st;
  st.h = h;
  st.E.resize(M);
  st.P1.resize(M);
  st.Emid.resize(M);
  st.P1mid.resize(M);
  for (int n = 1; n <= M; ++n) {
    double z = -sp.lambda(n) * h;
    st.E[n - 1] = std::exp(z);
    st.P1[n - 1] = phi1(z);
    st.Emid[n - 1] = std::exp(0.5 * z);
    st.P1mid[n - 1] = phi1(0.5 * z);
  }
  return st;
}

inline void exp_midpoint_step(const Model& model, const StepTables& st, Vec& u) {
  Vec f = model.F.evaluate(u);
  Vec um = st.Emid.cwiseProduct(u) + (0.5 * st.h) * st.P1mid.cwiseProduct(f);
  Vec fm = model.F.evaluate(um);
  u = st.E.cwiseProduct(u) + st.h * st.P1.cwiseProduct(fm);
}

}  // namespace detail

inline TrajectorySegment integrate(const Model& model, const Vec& u0, double T, double dt,
                                   long record_stride = 1) {
  const Spectrum& sp = model.spectrum;
  if (u0.size() != sp.size()) throw std::invalid_argument("integrate: state/spectrum mismatch");
  if (!(T > 0.0) || !(dt > 0.0)) throw std::invalid_argument("integrate: T, dt must be positive");
  if (dt * model.F.lipschitz_L > 0.5)
    throw std::invalid_argument("integrate: dt * L exceeds the stability budget 0.5");
  if (!u0.allFinite()) throw std::invalid_argument("integrate: non-finite initial state");
  if (record_stride < 1) record_stride = 1;

  long nfull = static_cast<long>(std::floor(T / dt + 1e-9));
  double rem = T - double(nfull) * dt;
  if (rem < 1e-12 * std::max(1.0, T)) rem = 0.0;

  detail::StepTables st = detail::step_tables(sp, dt);
  TrajectorySegment tr;
  tr.sp = &sp;
  tr.model = &model;
  tr.times.push_back(0.0);
  tr.states.push_back(u0);

  Vec u = u0;
  for (long k = 0; k < nfull; ++k) {
    detail::exp_midpoint_step(model, st, u);
    if (!u.allFinite()) {
      std::ostringstream os;
      os << "integrate: non-finite state at t=" << double(k + 1) * dt;
      throw std::runtime_error(os.str());
    }
    if ((k + 1) % record_stride == 0 || (k + 1 == nfull && rem == 0.0)) {
      tr.times.push_back(double(k + 1) * dt);
      tr.states.push_back(u);
    }
  }
  if (rem > 0.0) {
    detail::StepTables last = detail::step_tables(sp, rem);
    detail::exp_midpoint_step(model, last, u);
    if (!u.allFinite()) throw std::runtime_error("integrate: non-finite state at final step");
    tr.times.push_back(T);
    tr.states.push_back(u);
  }
  return tr;
}

// Linear problem u' + (A - alpha) u = h on a uniform window, h piecewise
// linear between nodes and zero-extended outside. alpha and theta come from
// the cut; the unique bounded solution integrates the stable directions
// forward from the left edge and the unstable ones backward from the right.
struct SaddleProblem {
  const Spectrum* sp = nullptr;
  int N = 0;
  std::vector<double> times;
  std::vector<Vec> forcing;
  double eps = 0.0;  // weight exponent, |eps| < theta
  double tau = 0.0;  // weight center
};

inline TrajectorySegment solve_saddle(const SaddleProblem& p) {
  if (p.sp == nullptr) throw std::invalid_argument("solve_saddle: missing spectrum");
  const Spectrum& sp = *p.sp;
  check_cut(p.N, sp.size());
  auto [alpha, theta] = dichotomy_constants(sp, p.N);
  if (!(theta > 0.0)) throw std::runtime_error("solve_saddle: no spectral gap at this cut");
  if (!(std::abs(p.eps) < theta)) throw std::invalid_argument("solve_saddle: |eps| < theta");
  size_t K = p.times.size();
  if (K < 2 || p.forcing.size() != K)
    throw std::invalid_argument("solve_saddle: need matching times/forcing, >= 2 nodes");
  double dt = p.times[1] - p.times[0];
  for (size_t k = 1; k < K; ++k)
    if (std::abs(p.times[k] - p.times[k - 1] - dt) > 1e-9 * std::max(1.0, std::abs(dt)))
      throw std::invalid_argument("solve_saddle: grid must be uniform");
  int M = sp.size();
  for (const Vec& h : p.forcing)
    if (h.size() != M) throw std::invalid_argument("solve_saddle: forcing size mismatch");

  std::vector<Vec> u(K, Vec::Zero(M));
  for (int n = 1; n <= M; ++n) {
    double nu = sp.lambda(n) - alpha;
    int i = n - 1;
    if (nu > 0.0) {  // decays forward; bounded solution starts at zero on the left
      double z = -nu * dt, e = std::exp(z), w1 = phi1(z), w2 = phi2(z);
      double a = 0.0;
      for (size_t k = 0; k + 1 < K; ++k) {
        double hk = p.forcing[k][i], hk1 = p.forcing[k + 1][i];
        a = e * a + dt * (hk * w1 + (hk1 - hk) * w2);
        u[k + 1][i] = a;
      }
    } else {  // decays backward; starts at zero on the right
      double z = nu * dt, e = std::exp(z), w1 = phi1(z), w2 = phi2(z);
      double a = 0.0;
      for (size_t k = K - 1; k-- > 0;) {
        double hk = p.forcing[k][i], hk1 = p.forcing[k + 1][i];
        a = e * a - dt * (hk * w1 + (hk1 - hk) * (w1 - w2));
        u[k][i] = a;
      }
    }
  }
  TrajectorySegment tr;
  tr.sp = &sp;
  tr.times = p.times;
  tr.states = std::move(u);
  return tr;
}

// discrete ( integral of exp(-2 eps |t - tau|) |u(t)|^2 dt )^{1/2}
inline double weighted_norm(const TrajectorySegment& tr, double eps, double tau) {
  std::vector<double> y(tr.times.size());
  for (size_t k = 0; k < tr.times.size(); ++k)
    y[k] = std::exp(-2.0 * eps * std::abs(tr.times[k] - tau)) * tr.states[k].squaredNorm();
  return std::sqrt(trapezoid(tr.times, y));
}

inline double l2_norm(const TrajectorySegment& tr) { return weighted_norm(tr, 0.0, 0.0); }

struct DissipativityReport {
  double alpha = 0.0, C = 1.0, C_star = 0.0;
  double alpha_h2 = 0.0, C_h2 = 1.0, C_star_h2 = 0.0;
  double R_star = 0.0;
  bool dissipative = false;
};

namespace detail {

// fit y_k <= C e^{-alpha t} y_0 + C_star given the plateau level
inline void envelope_fit(const std::vector<double>& t, const std::vector<double>& y,
                         double plateau, double& alpha, double& C) {
  alpha = 0.0;
  C = 1.0;
  if (y.empty()) return;
  double y0 = y.front();
  double e0 = y0 - plateau;
  if (!(e0 > 0.0)) return;  // started inside the absorbing level
  std::vector<double> ft, fy;
  for (size_t k = 0; k < y.size(); ++k) {
    double e = y[k] - plateau;
    if (e > std::max(1e-3 * e0, 1e-14 * y0)) {
      ft.push_back(t[k]);
      fy.push_back(std::log(e));
    }
  }
  if (ft.size() < 4) return;
  FitResult f = linear_fit(ft, fy);
  alpha = -f.c1;
  C = std::exp(f.c0) / y0;
}

}  // namespace detail

inline DissipativityReport dissipativity_probe(const Model& model,
                                               const std::vector<Vec>& starts, double horizon,
                                               double dt_in = 0.0) {
  if (starts.empty()) throw std::invalid_argument("dissipativity_probe: need starts");
  if (!(horizon > 0.0)) throw std::invalid_argument("dissipativity_probe: horizon > 0");
  double L = model.F.lipschitz_L;
  double dt = dt_in > 0.0 ? dt_in : std::min(0.45 / std::max(L, 1.0), horizon / 400.0);
  long stride = std::max(1L, static_cast<long>(horizon / dt / 2000.0));

  struct Series {
    std::vector<double> t, y, y2;
    double y0 = 0.0;
  };
  std::vector<Series> series;
  bool finite = true;
  for (const Vec& u0 : starts) {
    Series s;
    s.y0 = u0.squaredNorm();
    try {
      TrajectorySegment tr = integrate(model, u0, horizon, dt, stride);
      for (int k = 0; k < tr.nodes(); ++k) {
        s.t.push_back(tr.times[k]);
        s.y.push_back(tr.states[k].squaredNorm());
        double h2 = sobolev_norm(model.spectrum, tr.states[k], 2.0);
        s.y2.push_back(h2 * h2);
      }
    } catch (const std::runtime_error&) {
      finite = false;
    }
    series.push_back(std::move(s));
  }

  DissipativityReport rep;
  double tail_from = 0.75 * horizon;
  auto tail_max = [&](const std::vector<double>& t, const std::vector<double>& y) {
    double m = 0.0;
    for (size_t k = 0; k < t.size(); ++k)
      if (t[k] >= tail_from) m = std::max(m, y[k]);
    return m;
  };
  for (const Series& s : series) {
    rep.C_star = std::max(rep.C_star, tail_max(s.t, s.y));
    rep.C_star_h2 = std::max(rep.C_star_h2, tail_max(s.t, s.y2));
  }

  // decay constants from the trajectory launched farthest out
  size_t big = 0;
  for (size_t i = 1; i < series.size(); ++i)
    if (series[i].y0 > series[big].y0) big = i;
  if (!series[big].t.empty()) {
    detail::envelope_fit(series[big].t, series[big].y, rep.C_star, rep.alpha, rep.C);
    detail::envelope_fit(series[big].t, series[big].y2, rep.C_star_h2, rep.alpha_h2, rep.C_h2);
  }
  rep.R_star = std::sqrt(2.0 * rep.C_star);

  rep.dissipative = finite;
  if (finite && series.size() >= 2) {
    size_t small = 0;
    for (size_t i = 1; i < series.size(); ++i)
      if (series[i].y0 < series[small].y0) small = i;
    if (small != big) {
      double ts = tail_max(series[small].t, series[small].y);
      double tl = tail_max(series[big].t, series[big].y);
      // a dissipative system forgets the launch scale
      rep.dissipative = tl <= std::max({4.0 * ts, 1e-6 * series[big].y0, 1e-12});
    }
  }
  return rep;
}

inline std::vector<Vec> attractor_sample(const Model& model, int n_traj, double burn_in,
                                         int keep, std::uint64_t seed) {
  const Spectrum& sp = model.spectrum;
  if (n_traj < 1 || keep < 1 || !(burn_in > 0.0))
    throw std::invalid_argument("attractor_sample: bad sampling parameters");
  if (!std::isfinite(model.F.bound_C))
    throw std::invalid_argument("attractor_sample: model must declare a global bound");
  int M = sp.size();
  double lam1 = sp.lambda(1);
  double r0 = model.F.bound_C / lam1 + 1.0;

  std::mt19937_64 probe_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<Vec> probe_starts = {ball_vector(M, 0.05 * r0, probe_rng),
                                   ball_vector(M, r0, probe_rng)};
  double horizon = std::max(burn_in, 10.0 / lam1);
  DissipativityReport probe = dissipativity_probe(model, probe_starts, horizon);
  if (!probe.dissipative)
    throw std::runtime_error("attractor_sample: dissipativity probe failed at this truncation");

  double dt = std::min(0.25 / std::max(model.F.lipschitz_L, 1.0), 0.05);
  double snap_dt = std::max(4.0 * dt, 0.12);

  std::mt19937_64 rng(seed);
  std::vector<Vec> cloud;
  cloud.reserve(static_cast<size_t>(n_traj) * keep);
  for (int j = 0; j < n_traj; ++j) {
    Vec u = ball_vector(M, r0, rng);
    TrajectorySegment burn = integrate(model, u, burn_in, dt, 1L << 30);
    u = burn.states.back();
    for (int s = 0; s < keep; ++s) {
      TrajectorySegment hop = integrate(model, u, snap_dt, dt, 1L << 30);
      u = hop.states.back();
      cloud.push_back(u);
    }
  }
  return cloud;
}

// Backward log-convexity of |u1 - u2| over the final T of shared history:
// the value t back from the end is controlled by the geometric mean of the
// endpoint values times an explicit Lipschitz factor.
struct LogConvexityReport {
  double lhs = 0.0, rhs = 0.0, slack = 0.0;
  bool ok = false, degenerate = false;
};

inline LogConvexityReport log_convexity_check(const TrajectorySegment& a,
                                              const TrajectorySegment& b, double t, double T) {
  if (!(t > 0.0) || !(t < T)) throw std::invalid_argument("log_convexity_check: 0 < t < T");
  if (a.model == nullptr || a.model != b.model)
    throw std::invalid_argument("log_convexity_check: trajectories must share a model");
  double t_end = std::min(a.times.back(), b.times.back());
  double t_begin = std::max(a.times.front(), b.times.front());
  if (T > t_end - t_begin + 1e-9)
    throw std::invalid_argument("log_convexity_check: T exceeds shared history");
  double L = a.model->F.lipschitz_L;
  double n0 = (a.interpolate(t_end) - b.interpolate(t_end)).norm();
  double nt = (a.interpolate(t_end - t) - b.interpolate(t_end - t)).norm();
  double nT = (a.interpolate(t_end - T) - b.interpolate(t_end - T)).norm();
  LogConvexityReport rep;
  rep.lhs = nt;
  rep.rhs = std::exp(2.0 * L * t + L * L * t * (T - t) / 4.0) *
            std::pow(nT, t / T) * std::pow(n0, (T - t) / T);
  rep.slack = rep.rhs - rep.lhs;
  rep.degenerate = (n0 == 0.0 && nT == 0.0);
  rep.ok = rep.lhs <= rep.rhs || rep.degenerate;
  return rep;
}

struct DecayFit {
  double exp_rate = 0.0, quad_coeff = 0.0, r2 = 0.0;
  bool floored = false;
  int n_used = 0;
};

// least squares of log |v| against (1, t, t^2); values under the double
// precision floor relative to the initial one are excluded and flagged
inline DecayFit decay_rate_fit(const std::vector<double>& times,
                               const std::vector<double>& norms) {
  if (times.size() != norms.size() || times.size() < 4)
    throw std::invalid_argument("decay_rate_fit: need >= 4 samples");
  if (!(norms.front() > 0.0))
    throw std::invalid_argument("decay_rate_fit: series must start positive");
  double floor = 1e-14 * norms.front();
  std::vector<double> ft, fy;
  DecayFit out;
  for (size_t k = 0; k < norms.size(); ++k) {
    if (norms[k] > floor)
      ft.push_back(times[k]), fy.push_back(std::log(norms[k]));
    else
      out.floored = true;
  }
  out.n_used = static_cast<int>(ft.size());
  if (out.n_used < 4) throw std::runtime_error("decay_rate_fit: series under truncation floor");
  FitResult f = quadratic_fit(ft, fy);
  out.exp_rate = f.c1;
  out.quad_coeff = f.c2;
  out.r2 = f.r2;
  return out;
}

inline std::string trajectory_csv(const TrajectorySegment& tr) {
  std::ostringstream os;
  os << std::setprecision(17);
  int M = tr.states.empty() ? 0 : static_cast<int>(tr.states.front().size());
  os << "t";
  for (int n = 1; n <= M; ++n) os << ",c" << n;
  os << "\n";
  for (size_t k = 0; k < tr.times.size(); ++k) {
    os << tr.times[k];
    for (int i = 0; i < M; ++i) os << ',' << tr.states[k][i];
    os << "\n";
  }
  return os.str();
}

}  // namespace imlab
