#pragma once

// Invariant graph construction over the low-mode box, by backward shooting
// (bvp) or by the contraction on histories (lp), plus the consumers of the
// graph: tracking verification, cone and squeezing checks, and the reduced
// vector field on the graph.

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imlab/dynamics.hpp"
#include "imlab/models.hpp"
#include "imlab/numerics.hpp"
#include "imlab/spectral.hpp"

namespace imlab {

struct GraphGridSpec {
  Vec lo, hi;               // box in low-mode coordinates
  std::vector<int> counts;  // nodes per axis, >= 2
};

struct GraphPointResult {
  Vec value;  // full-length coefficient vector, low part zero
  bool converged = false;
  int iterations = 0;
  std::vector<double> ratios;          // lp contraction quotients
  std::vector<double> t_used, diffs;   // bvp schedule diagnostics
};

struct ManifoldGraph {
  int N = 0;
  GraphGridSpec spec;
  std::vector<Vec> nodes;   // low coordinates, length N each
  std::vector<Vec> values;  // full-length, low part zero
  double lipschitz_est = 0.0;
  std::string method;  // "bvp" or "lp"
  std::vector<std::string> log;
  const Spectrum* sp = nullptr;

  int node_count() const { return static_cast<int>(nodes.size()); }

  // multilinear interpolation; outside the box the edge cell extrapolates
  // linearly and the flag reports it
  Vec value_at(const Vec& p, bool* extrapolated = nullptr) const {
    if (p.size() != N) throw std::invalid_argument("value_at: wrong dimension");
    if (nodes.empty()) throw std::runtime_error("value_at: empty graph");
    bool outside = false;
    std::vector<int> cell(N);
    std::vector<double> frac(N);
    std::vector<long> stride(N);
    long s = 1;
    for (int d = 0; d < N; ++d) {
      stride[d] = s;
      s *= spec.counts[d];
      double h = (spec.hi[d] - spec.lo[d]) / double(spec.counts[d] - 1);
      double x = (p[d] - spec.lo[d]) / h;
      if (x < -1e-12 || x > double(spec.counts[d] - 1) + 1e-12) outside = true;
      int c = static_cast<int>(std::floor(x));
      c = std::clamp(c, 0, spec.counts[d] - 2);
      cell[d] = c;
      frac[d] = x - double(c);
    }
    if (extrapolated) *extrapolated = outside;
    Vec out = Vec::Zero(values.front().size());
    for (long corner = 0; corner < (1L << N); ++corner) {
      double w = 1.0;
      long idx = 0;
      for (int d = 0; d < N; ++d) {
        int bit = static_cast<int>((corner >> d) & 1);
        w *= bit ? frac[d] : (1.0 - frac[d]);
        idx += stride[d] * (cell[d] + bit);
      }
      if (w != 0.0) out += w * values[static_cast<size_t>(idx)];
    }
    return out;
  }

  Vec lift(const Vec& p, bool* extrapolated = nullptr) const {
    Vec u = value_at(p, extrapolated);
    u.head(N) = p;
    return u;
  }
};

namespace detail {

inline Vec embed_low(const Vec& z, int M) {
  Vec u = Vec::Zero(M);
  u.head(z.size()) = z;
  return u;
}

}  // namespace detail

// Fixed-point construction in the shifted variables: the free low-mode
// history v(t) = exp((alpha - Lambda) t) u_plus carries the boundary value,
// and w picks up the nonlinearity through the saddle solver. Each sweep
// contracts by L / theta.
inline GraphPointResult build_graph_lp(const Model& model, int N, const Vec& u_plus,
                                       double tol, double window = 23.03,
                                       double dt = 2e-3) {
  const Spectrum& sp = model.spectrum;
  check_cut(N, sp.size());
  if (u_plus.size() != N) throw std::invalid_argument("build_graph_lp: u_plus has length N");
  auto [alpha, theta] = dichotomy_constants(sp, N);
  if (!(theta > 0.0)) throw std::runtime_error("build_graph_lp: no spectral gap at this cut");
  int M = sp.size();

  double T_w = window / theta;
  long K = std::max(2L, static_cast<long>(std::ceil(T_w / dt)));
  double h = T_w / double(K);
  std::vector<double> times(K + 1);
  for (long k = 0; k <= K; ++k) times[k] = -T_w + double(k) * h;

  // free history in shifted variables, decaying toward the far end
  std::vector<Vec> v(K + 1, Vec::Zero(M));
  for (long k = 0; k <= K; ++k)
    for (int n = 1; n <= N; ++n)
      v[k][n - 1] = std::exp((alpha - sp.lambda(n)) * times[k]) * u_plus[n - 1];

  SaddleProblem prob;
  prob.sp = &sp;
  prob.N = N;
  prob.times = times;

  std::vector<Vec> w(K + 1, Vec::Zero(M));
  GraphPointResult res;
  double prev_delta = -1.0;
  const int max_iter = 200;
  for (int m = 1; m <= max_iter; ++m) {
    // shifted nonlinearity, evaluated in physical variables and shifted back;
    // far in the past the shift factor defeats any bounded nonlinearity
    std::vector<Vec> g(K + 1);
    for (long k = 0; k <= K; ++k) {
      double s = -alpha * times[k];
      if (s > 500.0) {
        g[k] = Vec::Zero(M);
        continue;
      }
      Vec phys = std::exp(s) * (w[k] + v[k]);
      g[k] = std::exp(-s) * model.F.evaluate(phys);
    }
    prob.forcing = std::move(g);
    TrajectorySegment sol = solve_saddle(prob);

    std::vector<double> dsq(K + 1);
    for (long k = 0; k <= K; ++k) dsq[k] = (sol.states[k] - w[k]).squaredNorm();
    double delta = std::sqrt(trapezoid(times, dsq));
    if (prev_delta > 0.0) {
      double ratio = delta / prev_delta;
      res.ratios.push_back(ratio);
      if (ratio >= 1.0)
        throw std::runtime_error("build_graph_lp: iteration is not contracting (ratio " +
                                 std::to_string(ratio) + ")");
    }
    w = std::move(sol.states);
    res.iterations = m;
    if (delta <= tol * std::max(1.0, u_plus.norm())) {
      res.converged = true;
      break;
    }
    prev_delta = delta;
  }
  if (!res.converged)
    throw std::runtime_error("build_graph_lp: no convergence in 200 sweeps");
  res.value = w[K];
  res.value.head(N).setZero();  // saddle boundary makes this exact; tidy roundoff
  return res;
}

// Backward shooting: find the low-mode value at -T whose forward orbit lands
// on u_plus, then read the graph off the tail at time zero. Deepening T
// converges geometrically; stop when successive tails agree to tol.
inline GraphPointResult build_graph_bvp(const Model& model, int N, const Vec& u_plus,
                                        std::vector<double> T_schedule, double tol,
                                        double dt = 1e-3) {
  const Spectrum& sp = model.spectrum;
  check_cut(N, sp.size());
  if (u_plus.size() != N) throw std::invalid_argument("build_graph_bvp: u_plus has length N");
  auto [alpha, theta] = dichotomy_constants(sp, N);
  if (T_schedule.empty()) {
    if (!(theta > 0.0))
      throw std::runtime_error("build_graph_bvp: no spectral gap for default schedule");
    T_schedule = {6.0 / theta, 12.0 / theta, 24.0 / theta, 40.1 / theta};
  }
  int M = sp.size();
  double step = std::min(dt, 0.45 / std::max(model.F.lipschitz_L, 1e-12));

  auto shoot = [&](const Vec& z, double T) -> Vec {  // full state at time 0
    TrajectorySegment tr = integrate(model, detail::embed_low(z, M), T, step, 1L << 40);
    return tr.states.back();
  };

  GraphPointResult res;
  Vec z;  // current backward seed
  double T_prev = 0.0;
  bool have_val = false;
  Vec val_prev;
  for (double T : T_schedule) {
    for (int n = 1; n <= N; ++n)
      if (sp.lambda(n) * T > 600.0)
        throw std::invalid_argument("build_graph_bvp: schedule too deep for this cut");
    if (z.size() == 0) {
      z = u_plus;
      for (int n = 1; n <= N; ++n) z[n - 1] *= std::exp(sp.lambda(n) * T);
    } else {
      for (int n = 1; n <= N; ++n) z[n - 1] *= std::exp(sp.lambda(n) * (T - T_prev));
    }
    T_prev = T;

    double rtol = 1e-9 * std::max(1.0, u_plus.norm());
    Vec u_final = shoot(z, T);
    Vec r = u_final.head(N) - u_plus;
    bool ok = false;
    for (int it = 0; it < 30; ++it) {
      ++res.iterations;
      if (r.norm() <= rtol) {
        ok = true;
        break;
      }
      Mat J(N, N);
      for (int j = 0; j < N; ++j) {
        Vec zp = z;
        double hj = 1e-6 * std::max(1.0, std::abs(z[j]));
        zp[j] += hj;
        J.col(j) = (shoot(zp, T).head(N) - u_final.head(N)) / hj;
      }
      Vec delta = J.fullPivLu().solve(-r);
      double lam = 1.0;
      bool improved = false;
      for (int half = 0; half < 8; ++half) {
        Vec z_try = z + lam * delta;
        Vec u_try = shoot(z_try, T);
        Vec r_try = u_try.head(N) - u_plus;
        if (r_try.norm() < r.norm()) {
          z = z_try;
          u_final = u_try;
          r = r_try;
          improved = true;
          break;
        }
        lam *= 0.5;
      }
      if (!improved) break;
    }
    if (!ok) {
      std::ostringstream os;
      os << "build_graph_bvp: shooting failed at T=" << T << " (residual " << r.norm()
         << ")";
      throw std::runtime_error(os.str());
    }

    Vec val = u_final;
    val.head(N).setZero();
    res.t_used.push_back(T);
    if (have_val) {
      double d = (val - val_prev).norm();
      res.diffs.push_back(d);
      if (d < tol) {
        res.value = val;
        res.converged = true;
        return res;
      }
    }
    val_prev = val;
    have_val = true;
  }
  std::ostringstream os;
  os << "build_graph_bvp: schedule exhausted";
  if (!res.diffs.empty()) os << " (last diff " << res.diffs.back() << ")";
  throw std::runtime_error(os.str());
}

inline ManifoldGraph build_manifold(const Model& model, int N, const GraphGridSpec& spec,
                                    const std::string& method, double tol) {
  const Spectrum& sp = model.spectrum;
  check_cut(N, sp.size());
  if (spec.lo.size() != N || spec.hi.size() != N ||
      static_cast<int>(spec.counts.size()) != N)
    throw std::invalid_argument("build_manifold: grid spec dimension mismatch");
  long total = 1;
  for (int d = 0; d < N; ++d) {
    if (spec.counts[d] < 2 || !(spec.hi[d] > spec.lo[d]))
      throw std::invalid_argument("build_manifold: each axis needs >= 2 nodes, hi > lo");
    total *= spec.counts[d];
  }
  if (method != "bvp" && method != "lp")
    throw std::invalid_argument("build_manifold: method is 'bvp' or 'lp'");

  ManifoldGraph g;
  g.N = N;
  g.spec = spec;
  g.method = method;
  g.sp = &sp;

  std::vector<long> failures;
  std::string first_error;
  for (long flat = 0; flat < total; ++flat) {
    Vec p(N);
    long rest = flat;
    for (int d = 0; d < N; ++d) {
      int i = static_cast<int>(rest % spec.counts[d]);
      rest /= spec.counts[d];
      p[d] = spec.lo[d] + double(i) * (spec.hi[d] - spec.lo[d]) / double(spec.counts[d] - 1);
    }
    g.nodes.push_back(p);
    try {
      GraphPointResult r = (method == "lp") ? build_graph_lp(model, N, p, tol)
                                            : build_graph_bvp(model, N, p, {}, tol);
      g.values.push_back(r.value);
      std::ostringstream os;
      os << "node " << flat << ": iters=" << r.iterations;
      if (!r.ratios.empty()) os << " ratio=" << r.ratios.back();
      if (!r.diffs.empty()) os << " diff=" << r.diffs.back();
      g.log.push_back(os.str());
    } catch (const std::exception& e) {
      failures.push_back(flat);
      if (first_error.empty()) first_error = e.what();
      g.values.push_back(Vec::Zero(sp.size()));
      g.log.push_back("node " + std::to_string(flat) + ": FAILED");
    }
  }
  if (!failures.empty()) {
    std::ostringstream os;
    os << "build_manifold: failures at nodes";
    for (long f : failures) os << ' ' << f;
    os << "; first: " << first_error;
    throw std::runtime_error(os.str());
  }

  for (size_t i = 0; i < g.nodes.size(); ++i)
    for (size_t j = i + 1; j < g.nodes.size(); ++j) {
      double dx = (g.nodes[i] - g.nodes[j]).norm();
      if (dx > 0.0)
        g.lipschitz_est = std::max(g.lipschitz_est, (g.values[i] - g.values[j]).norm() / dx);
    }
  return g;
}

// Reduced vector field on the graph. The sticky flag records whether any
// evaluation had to extrapolate outside the grid box.
struct InertialForm {
  const Model* model = nullptr;
  const ManifoldGraph* graph = nullptr;
  mutable bool extrapolated = false;

  Vec lift(const Vec& p) const {
    bool out = false;
    Vec u = graph->lift(p, &out);
    if (out) extrapolated = true;
    return u;
  }

  Vec rhs(const Vec& p) const {
    const Spectrum& sp = *graph->sp;
    Vec u = lift(p);
    Vec f = model->F.evaluate(u);
    Vec out(graph->N);
    for (int n = 1; n <= graph->N; ++n) out[n - 1] = -sp.lambda(n) * p[n - 1] + f[n - 1];
    return out;
  }
};

inline InertialForm inertial_form(const Model& model, const ManifoldGraph& graph) {
  if (graph.sp == nullptr || graph.sp->size() != model.spectrum.size())
    throw std::invalid_argument("inertial_form: graph/model mismatch");
  InertialForm f;
  f.model = &model;
  f.graph = &graph;
  return f;
}

namespace detail {

template <class F>
Vec rk4_step(F&& f, const Vec& x, double h) {
  Vec k1 = f(x);
  Vec k2 = f(x + 0.5 * h * k1);
  Vec k3 = f(x + 0.5 * h * k2);
  Vec k4 = f(x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

inline TrajectorySegment integrate_reduced(const InertialForm& form, const Vec& p0, double T,
                                           double dt) {
  if (!(T > 0.0) || !(dt > 0.0))
    throw std::invalid_argument("integrate_reduced: T, dt must be positive");
  auto f = [&form](const Vec& p) { return form.rhs(p); };
  long K = std::max(1L, static_cast<long>(std::llround(T / dt)));
  double h = T / double(K);
  TrajectorySegment tr;
  tr.times.push_back(0.0);
  tr.states.push_back(p0);
  Vec p = p0;
  for (long k = 0; k < K; ++k) {
    p = detail::rk4_step(f, p, h);
    if (!p.allFinite()) throw std::runtime_error("integrate_reduced: non-finite state");
    tr.times.push_back(double(k + 1) * h);
    tr.states.push_back(p);
  }
  return tr;
}

struct TrackingReport {
  double rate = 0.0, quad = 0.0, r2 = 0.0;
  double dist0 = 0.0, max_dist = 0.0, final_dist = 0.0;
  bool fit_done = false;
  std::vector<double> times, dists;
};

// Match the low modes at the far end, pull the matched graph orbit back to
// time zero through the reduced field, and fit the decay of the gap.
inline TrackingReport tracking_verify(const Model& model, const ManifoldGraph& graph,
                                      const Vec& u0, double T_fit, double dt = 1e-3) {
  if (!(T_fit > 0.0)) throw std::invalid_argument("tracking_verify: T_fit > 0");
  InertialForm form = inertial_form(model, graph);
  double step = std::min(dt, 0.45 / std::max(model.F.lipschitz_L, 1e-12));
  long stride = std::max(1L, static_cast<long>(std::llround(T_fit / step / 200.0)));
  TrajectorySegment fwd = integrate(model, u0, T_fit, step, stride);

  Vec pT = fwd.states.back().head(graph.N);
  double guard = 1e6 * (1.0 + pT.norm());
  auto back_rhs = [&form](const Vec& q) { return Vec(-form.rhs(q)); };

  // march backward and store the reduced state at each recorded forward node
  std::vector<Vec> red(fwd.nodes());
  red.back() = pT;
  Vec q = pT;
  for (int k = fwd.nodes() - 1; k > 0; --k) {
    double span = fwd.times[k] - fwd.times[k - 1];
    long sub = std::max(1L, static_cast<long>(std::llround(span / step)));
    double h = span / double(sub);
    for (long s = 0; s < sub; ++s) {
      q = detail::rk4_step(back_rhs, q, h);
      if (!q.allFinite() || q.norm() > guard)
        throw std::runtime_error("tracking_verify: backward blowup in the reduced field");
    }
    red[k - 1] = q;
  }

  TrackingReport rep;
  rep.times = fwd.times;
  rep.dists.resize(fwd.nodes());
  for (int k = 0; k < fwd.nodes(); ++k) {
    Vec v = form.lift(red[k]);
    rep.dists[k] = (fwd.states[k] - v).norm();
  }
  rep.dist0 = rep.dists.front();
  rep.final_dist = rep.dists.back();
  rep.max_dist = *std::max_element(rep.dists.begin(), rep.dists.end());

  if (rep.dist0 > 1e-10 * (1.0 + u0.norm())) {
    DecayFit fit = decay_rate_fit(rep.times, rep.dists);
    rep.rate = -fit.exp_rate;
    rep.quad = fit.quad_coeff;
    rep.r2 = fit.r2;
    rep.fit_done = true;
  }
  return rep;
}

struct ConeReport {
  double alpha = 0.0, theta = 0.0, mu = 0.0;
  int checked = 0, violations = 0;
  std::vector<double> violation_times;
  double worst_slack = std::numeric_limits<double>::infinity();
  bool invariant_ok = true;
};

// Differential form of the cone estimate along difference trajectories,
// with the time derivative taken from the equation itself (finite
// differencing the stiff tail would swamp the estimate). mu is the
// certificate rate theta - L when the gap wins, else zero; violations of the
// degenerate case are data, not errors.
inline ConeReport cone_check(const Model& model, const std::vector<std::pair<Vec, Vec>>& pairs,
                             int N, double T = 1.0, double dt = 1e-3) {
  const Spectrum& sp = model.spectrum;
  check_cut(N, sp.size());
  auto [alpha, theta] = dichotomy_constants(sp, N);
  ConeReport rep;
  rep.alpha = alpha;
  rep.theta = theta;
  rep.mu = std::max(theta - model.F.lipschitz_L, 0.0);
  const double tol_rel = 1e-4 * (alpha + rep.mu + 1.0);
  double step = std::min(dt, 0.45 / std::max(model.F.lipschitz_L, 1e-12));
  long stride = std::max(1L, static_cast<long>(std::llround(T / step / 200.0)));

  for (const auto& [a0, b0] : pairs) {
    TrajectorySegment ta = integrate(model, a0, T, step, stride);
    TrajectorySegment tb = integrate(model, b0, T, step, stride);
    bool entered = false;
    for (int k = 0; k < ta.nodes(); ++k) {
      Vec v = ta.states[k] - tb.states[k];
      double n2 = v.squaredNorm();
      if (n2 < 1e-28) continue;
      Vec dv = model.F.evaluate(ta.states[k]) - model.F.evaluate(tb.states[k]);
      for (int n = 1; n <= sp.size(); ++n) dv[n - 1] -= sp.lambda(n) * v[n - 1];
      Vec qv = project_high(v, N), pv = project_low(v, N);
      double V = qv.squaredNorm() - pv.squaredNorm();
      double dV2 = qv.dot(dv) - pv.dot(dv);  // half the time derivative of V
      double lhs = dV2 + alpha * V + rep.mu * n2;
      ++rep.checked;
      double slack = -lhs / n2;
      rep.worst_slack = std::min(rep.worst_slack, slack);
      if (lhs > tol_rel * n2) {
        ++rep.violations;
        rep.violation_times.push_back(ta.times[k]);
      }
      // once inside the cone, stay inside
      if (entered && V > tol_rel * n2) rep.invariant_ok = false;
      if (V <= 0.0) entered = true;
    }
  }
  return rep;
}

struct SqueezeReport {
  int in_cone = 0, fitted = 0;
  std::vector<double> gammas;
  double min_gamma = std::numeric_limits<double>::infinity();
  bool target_met = false;
};

// Pairs whose difference never enters the cone must contract in norm; fit
// the rate and compare with the requested floor.
inline SqueezeReport squeezing_check(const Model& model,
                                     const std::vector<std::pair<Vec, Vec>>& pairs, int N,
                                     double gamma_target, double T = 1.0, double dt = 1e-3) {
  const Spectrum& sp = model.spectrum;
  check_cut(N, sp.size());
  double step = std::min(dt, 0.45 / std::max(model.F.lipschitz_L, 1e-12));
  long stride = std::max(1L, static_cast<long>(std::llround(T / step / 200.0)));
  SqueezeReport rep;
  for (const auto& [a0, b0] : pairs) {
    TrajectorySegment ta = integrate(model, a0, T, step, stride);
    TrajectorySegment tb = integrate(model, b0, T, step, stride);
    bool cone = false;
    std::vector<double> t, nrm;
    for (int k = 0; k < ta.nodes(); ++k) {
      Vec v = ta.states[k] - tb.states[k];
      if (cone_value(v, N) <= 0.0) {
        cone = true;
        break;
      }
      t.push_back(ta.times[k]);
      nrm.push_back(v.norm());
    }
    if (cone) {
      ++rep.in_cone;
      continue;
    }
    if (t.size() < 4 || !(nrm.front() > 0.0)) continue;
    DecayFit fit = decay_rate_fit(t, nrm);
    double gamma = -fit.exp_rate;
    rep.gammas.push_back(gamma);
    rep.min_gamma = std::min(rep.min_gamma, gamma);
    ++rep.fitted;
  }
  rep.target_met = rep.fitted > 0 && rep.min_gamma >= gamma_target;
  return rep;
}

inline std::string manifold_csv(const ManifoldGraph& g) {
  std::ostringstream os;
  os << std::setprecision(17);
  int M = g.values.empty() ? 0 : static_cast<int>(g.values.front().size());
  for (int d = 0; d < g.N; ++d) os << 'p' << d + 1 << ',';
  for (int n = 1; n <= M; ++n) os << 'q' << n << (n < M ? ',' : '\n');
  for (int i = 0; i < g.node_count(); ++i) {
    for (int d = 0; d < g.N; ++d) os << g.nodes[i][d] << ',';
    for (int n = 0; n < M; ++n) os << g.values[i][n] << (n + 1 < M ? ',' : '\n');
  }
  return os.str();
}

}  // namespace imlab
