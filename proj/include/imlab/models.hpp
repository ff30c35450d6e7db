#pragma once

// Concrete model families: spectra with number-theoretic structure (interval,
// torus, sphere, and fourth-order surrogates), collocation grids for
// pseudospectral nonlinearities, cut-off wrappers that make declared global
// Lipschitz/bound constants honest, and the spatial-averaging quantities.

#include <algorithm>
#include <array>
#include <cmath>
#include <functional>
#include <iomanip>
#include <memory>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "imlab/numerics.hpp"
#include "imlab/spectral.hpp"

namespace imlab {

// ---------------------------------------------------------------------------
// Spectrum generators

// Dirichlet eigenvalues of -a d^2/dx^2 + alpha on (0, pi): a n^2 + alpha.
inline Spectrum spectrum_interval(int M, double a, double alpha) {
  if (M < 2) throw std::invalid_argument("spectrum_interval: M >= 2");
  if (!(a > 0.0)) throw std::invalid_argument("spectrum_interval: a must be positive");
  if (alpha < 0.0) throw std::invalid_argument("spectrum_interval: alpha must be nonnegative");
  Spectrum sp;
  sp.source = "interval";
  for (int n = 1; n <= M; ++n) {
    sp.values.push_back(a * double(n) * n + alpha);
    sp.labels.push_back(std::to_string(n));
  }
  return sp;
}

// Monomial spectrum a n^p.  p = 1 gives the equispaced ladder used by the
// weighted-shift constructions; p = 3/2 gives gaps that grow like sqrt(n).
inline Spectrum spectrum_power(int M, double p, double a = 1.0) {
  if (M < 2) throw std::invalid_argument("spectrum_power: M >= 2");
  if (!(a > 0.0)) throw std::invalid_argument("spectrum_power: a must be positive");
  if (!(p > 0.0)) throw std::invalid_argument("spectrum_power: p must be positive");
  Spectrum sp;
  sp.source = "power";
  for (int n = 1; n <= M; ++n) {
    sp.values.push_back(a * std::pow(double(n), p));
    sp.labels.push_back(std::to_string(n));
  }
  return sp;
}

// Nonzero Laplace eigenvalues on the square 2-torus: integers a^2 + b^2 with
// one entry per lattice point (a, b) != (0, 0), so multiplicities are the
// lattice representation counts.
inline Spectrum spectrum_torus2d(double lambda_max, bool with_labels = true) {
  if (lambda_max < 2.0) throw std::invalid_argument("spectrum_torus2d: lambda_max >= 2");
  long B = static_cast<long>(std::floor(std::sqrt(lambda_max)));
  struct Entry {
    long v;
    int a, b;
  };
  std::vector<Entry> entries;
  for (long a = -B; a <= B; ++a)
    for (long b = -B; b <= B; ++b) {
      long v = a * a + b * b;
      if (v >= 1 && v <= static_cast<long>(lambda_max))
        entries.push_back({v, static_cast<int>(a), static_cast<int>(b)});
    }
  std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
    return std::tie(x.v, x.a, x.b) < std::tie(y.v, y.a, y.b);
  });
  Spectrum sp;
  sp.source = "torus2d";
  sp.values.reserve(entries.size());
  for (const Entry& e : entries) {
    sp.values.push_back(static_cast<double>(e.v));
    if (with_labels)
      sp.labels.push_back("(" + std::to_string(e.a) + "," + std::to_string(e.b) + ")");
  }
  return sp;
}

// Laplace eigenvalues on the 2-sphere: n(n+1) with multiplicity 2n+1.
inline Spectrum spectrum_sphere2(int n_max) {
  if (n_max < 1) throw std::invalid_argument("spectrum_sphere2: n_max >= 1");
  Spectrum sp;
  sp.source = "sphere2";
  for (int n = 1; n <= n_max; ++n)
    for (int m = -n; m <= n; ++m) {
      sp.values.push_back(double(n) * (n + 1));
      sp.labels.push_back("(" + std::to_string(n) + "," + std::to_string(m) + ")");
    }
  return sp;
}

// Nonzero Laplace eigenvalues on the cubic 3-torus: integers a^2 + b^2 + c^2
// with lattice multiplicities. Label strings are skipped by default because
// the lattice count grows like the ball volume.
inline Spectrum spectrum_torus3d(double lambda_max, bool with_labels = false) {
  if (lambda_max < 2.0) throw std::invalid_argument("spectrum_torus3d: lambda_max >= 2");
  long B = static_cast<long>(std::floor(std::sqrt(lambda_max)));
  long lmax = static_cast<long>(lambda_max);
  std::vector<long> counts(static_cast<size_t>(lmax) + 1, 0);
  for (long a = -B; a <= B; ++a)
    for (long b = -B; b <= B; ++b) {
      long ab = a * a + b * b;
      if (ab > lmax) continue;
      for (long c = -B; c <= B; ++c) {
        long v = ab + c * c;
        if (v >= 1 && v <= lmax) ++counts[v];
      }
    }
  Spectrum sp;
  sp.source = "torus3d";
  long total = 0;
  for (long v = 1; v <= lmax; ++v) total += counts[v];
  sp.values.reserve(total);
  for (long v = 1; v <= lmax; ++v)
    for (long i = 0; i < counts[v]; ++i) sp.values.push_back(static_cast<double>(v));
  if (with_labels) {
    struct Entry {
      long v;
      int a, b, c;
    };
    std::vector<Entry> entries;
    for (long a = -B; a <= B; ++a)
      for (long b = -B; b <= B; ++b)
        for (long c = -B; c <= B; ++c) {
          long v = a * a + b * b + c * c;
          if (v >= 1 && v <= lmax)
            entries.push_back({v, int(a), int(b), int(c)});
        }
    std::sort(entries.begin(), entries.end(), [](const Entry& x, const Entry& y) {
      return std::tie(x.v, x.a, x.b, x.c) < std::tie(y.v, y.a, y.b, y.c);
    });
    for (const Entry& e : entries)
      sp.labels.push_back("(" + std::to_string(e.a) + "," + std::to_string(e.b) + "," +
                          std::to_string(e.c) + ")");
  }
  return sp;
}

// Kuramoto-Sivashinsky-type fourth order sequence (N^2 + a)^2 + 1, sorted.
inline Spectrum spectrum_ks(int M, double a) {
  if (M < 2) throw std::invalid_argument("spectrum_ks: M >= 2");
  std::vector<std::pair<double, int>> vals;
  for (int n = 1; n <= M; ++n) {
    double q = double(n) * n + a;
    vals.push_back({q * q + 1.0, n});
  }
  std::sort(vals.begin(), vals.end());
  Spectrum sp;
  sp.source = "ks";
  for (auto& [v, n] : vals) {
    sp.values.push_back(v);
    sp.labels.push_back(std::to_string(n));
  }
  return sp;
}

// Swift-Hohenberg-type synthetic growth C N^{4/3}.
inline Spectrum spectrum_sh(int M, double C = 1.0) {
  if (M < 2) throw std::invalid_argument("spectrum_sh: M >= 2");
  if (!(C > 0.0)) throw std::invalid_argument("spectrum_sh: C must be positive");
  Spectrum sp;
  sp.source = "sh";
  for (int n = 1; n <= M; ++n) {
    sp.values.push_back(C * std::pow(double(n), 4.0 / 3.0));
    sp.labels.push_back(std::to_string(n));
  }
  return sp;
}

// Cahn-Hilliard-type squares of a given Laplacian spectrum.
inline Spectrum spectrum_ch(const Spectrum& base) {
  base.validate();
  Spectrum sp;
  sp.source = "ch(" + base.source + ")";
  sp.labels = base.labels;
  for (double v : base.values) sp.values.push_back(v * v);
  return sp;
}

inline std::string spectrum_csv(const Spectrum& sp) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "index,eigenvalue,label\n";
  for (int n = 1; n <= sp.size(); ++n)
    os << n << ',' << sp.lambda(n) << ',' << (sp.labels.empty() ? "" : sp.labels[n - 1])
       << '\n';
  return os.str();
}

// ---------------------------------------------------------------------------
// Collocation grids

// Synthesis/analysis pair between eigen-coefficients and values on a
// 2x-oversampled grid, stored per axis and applied tensorized so 3D grids
// stay cheap. Modes are sorted by Laplace eigenvalue; the oversampling makes
// cubic products alias-free.
struct CollocationGrid {
  int dim = 1;
  bool periodic = false;
  int modes_axis = 0;   // K: basis size per axis
  int points_axis = 0;  // P = 2K
  Mat axis_synth;       // P x K, identical on every axis
  Mat axis_anal;        // K x P, axis_anal * axis_synth = I
  Mat pts;              // n_points x dim physical coordinates
  std::vector<int> perm;             // sorted mode -> natural tensor index
  std::vector<double> laplace_eigs;  // per sorted mode
  std::vector<std::string> mode_labels;
  double measure = 0.0;

  int n_modes() const { return static_cast<int>(perm.size()); }
  int n_points() const { return static_cast<int>(pts.rows()); }

  // contracts the leading axis and cycles dimensions; after dim rounds every
  // axis has been transformed once and the layout is back in original order
  static Vec tensor_apply(const Mat& B, Vec v, int d) {
    const int K = static_cast<int>(B.cols());
    for (int a = 0; a < d; ++a) {
      const int rest = static_cast<int>(v.size()) / K;
      Mat M = B * Eigen::Map<const Mat>(v.data(), K, rest);
      Mat T = M.transpose();
      v = Eigen::Map<const Vec>(T.data(), T.size());
    }
    return v;
  }

  Vec to_grid(const Vec& c) const {
    if (c.size() != n_modes()) throw std::invalid_argument("to_grid: coefficient length");
    Vec nat(c.size());
    for (int i = 0; i < c.size(); ++i) nat(perm[i]) = c(i);
    return tensor_apply(axis_synth, nat, dim);
  }
  Vec to_coeffs(const Vec& v) const {
    if (v.size() != n_points()) throw std::invalid_argument("to_coeffs: value length");
    Vec nat = tensor_apply(axis_anal, v, dim);
    Vec out(n_modes());
    for (int i = 0; i < out.size(); ++i) out(i) = nat(perm[i]);
    return out;
  }
  Vec point(int flat) const { return pts.row(flat).transpose(); }

  // max over grid points of the basis row norm; bounds |u(x_j)| <= amp * ||u||.
  // The tensor row norm factorizes across axes.
  double max_point_amplitude() const {
    double axis_max = axis_synth.rowwise().norm().maxCoeff();
    return std::pow(axis_max, dim);
  }

  // sine basis sqrt(2/pi) sin(n x) on (0, pi), n = 1..M, P = 2M interior nodes
  static CollocationGrid dirichlet_1d(int M) {
    if (M < 1) throw std::invalid_argument("dirichlet_1d: M >= 1");
    CollocationGrid g;
    g.dim = 1;
    g.periodic = false;
    g.modes_axis = M;
    g.points_axis = 2 * M;
    const int P = g.points_axis;
    g.axis_synth.resize(P, M);
    g.pts.resize(P, 1);
    const double amp = std::sqrt(2.0 / M_PI);
    for (int j = 0; j < P; ++j) {
      double x = M_PI * (j + 1) / (P + 1);
      g.pts(j, 0) = x;
      for (int n = 1; n <= M; ++n) g.axis_synth(j, n - 1) = amp * std::sin(n * x);
    }
    g.axis_anal = (M_PI / (P + 1)) * g.axis_synth.transpose();
    g.measure = M_PI;
    for (int n = 1; n <= M; ++n) {
      g.perm.push_back(n - 1);
      g.laplace_eigs.push_back(double(n) * n);
      g.mode_labels.push_back(std::to_string(n));
    }
    return g;
  }

  // real trigonometric tensor basis on the d-torus, frequencies |m| <= B per
  // axis, P = 2(2B+1) points per axis
  static CollocationGrid torus(int dim, int B) {
    if (dim < 1 || dim > 3) throw std::invalid_argument("torus: dim in {1,2,3}");
    if (B < 1) throw std::invalid_argument("torus: B >= 1");
    const int K = 2 * B + 1;
    const int P = 2 * K;
    CollocationGrid g;
    g.dim = dim;
    g.periodic = true;
    g.modes_axis = K;
    g.points_axis = P;
    g.axis_synth.resize(P, K);
    std::vector<int> freq(K);
    std::vector<std::string> tok(K);
    for (int j = 0; j < P; ++j) {
      double x = 2.0 * M_PI * j / P;
      g.axis_synth(j, 0) = 1.0 / std::sqrt(2.0 * M_PI);
      for (int m = 1; m <= B; ++m) {
        g.axis_synth(j, 2 * m - 1) = std::cos(m * x) / std::sqrt(M_PI);
        g.axis_synth(j, 2 * m) = std::sin(m * x) / std::sqrt(M_PI);
      }
    }
    freq[0] = 0;
    tok[0] = "0";
    for (int m = 1; m <= B; ++m) {
      freq[2 * m - 1] = m;
      tok[2 * m - 1] = "c" + std::to_string(m);
      freq[2 * m] = m;
      tok[2 * m] = "s" + std::to_string(m);
    }
    g.axis_anal = (2.0 * M_PI / P) * g.axis_synth.transpose();

    int n_modes = 1, n_points = 1;
    for (int d = 0; d < dim; ++d) {
      n_modes *= K;
      n_points *= P;
    }
    // natural tensor order has axis 0 fastest; sort modes by eigenvalue
    std::vector<int> order(n_modes);
    std::vector<long> eig(n_modes);
    for (int I = 0; I < n_modes; ++I) {
      order[I] = I;
      int r = I;
      long e = 0;
      for (int d = 0; d < dim; ++d) {
        int a = r % K;
        r /= K;
        e += long(freq[a]) * freq[a];
      }
      eig[I] = e;
    }
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return eig[a] < eig[b]; });
    g.perm = order;
    for (int I : order) {
      g.laplace_eigs.push_back(static_cast<double>(eig[I]));
      int r = I;
      std::string lbl;
      for (int d = 0; d < dim; ++d) {
        lbl += (d ? "," : "") + tok[r % K];
        r /= K;
      }
      g.mode_labels.push_back(lbl);
    }

    g.pts.resize(n_points, dim);
    g.measure = std::pow(2.0 * M_PI, dim);
    for (int J = 0; J < n_points; ++J) {
      int r = J;
      for (int d = 0; d < dim; ++d) {
        g.pts(J, d) = 2.0 * M_PI * (r % P) / P;
        r /= P;
      }
    }
    return g;
  }
};

// ---------------------------------------------------------------------------
// Nonlinearities

struct NonlinearityModel {
  std::function<Vec(const Vec&)> evaluate;
  std::function<Vec(const Vec&, const Vec&)> derivative_action;  // F'(u)v, may be null
  double lipschitz_L = 0.0;   // declared global bound on ||F(u)-F(v)|| / ||u-v||
  double smoothing_beta = 0.0;
  double bound_C = std::numeric_limits<double>::infinity();  // sup ||F(u)||
};

struct Model {
  Spectrum spectrum;
  NonlinearityModel F;
  std::shared_ptr<const CollocationGrid> grid;  // set for collocation-based models
  std::string name;
};

// Pointwise scalar nonlinearity f(x, s) with derivative in s. The sup fields
// are analytic global bounds when the caller knows them; they tighten the
// declared constants.
struct ScalarField {
  std::function<double(const Vec&, double)> f;
  std::function<double(const Vec&, double)> f_u;
  double sup_f = std::numeric_limits<double>::infinity();
  double sup_fu = std::numeric_limits<double>::infinity();
};

// F(u) = eigen-transform of -f(x, u(x)), optionally damped by a smooth radial
// cutoff beyond ||u|| = cutoff_radius (pass +inf for none; then f itself must
// be globally Lipschitz in s). Declared constants are honest upper bounds:
// the analysis map is a quadrature partial isometry, so the multiplication
// estimate sup|f_u| controls the coefficient-space Lipschitz constant, and
// the cutoff adds at most max|chi'| * sup||F_raw||.
inline NonlinearityModel rde_nonlinearity(const ScalarField& field,
                                          std::shared_ptr<const CollocationGrid> grid,
                                          double cutoff_radius) {
  if (!grid) throw std::invalid_argument("rde_nonlinearity: null grid");
  const bool has_cut = std::isfinite(cutoff_radius);
  if (has_cut && !(cutoff_radius > 0.0))
    throw std::invalid_argument("rde_nonlinearity: cutoff_radius must be positive");
  if (!field.f || !field.f_u) throw std::invalid_argument("rde_nonlinearity: f and f_u required");

  auto raw = [grid, f = field.f](const Vec& c) -> Vec {
    if (c.size() != grid->n_modes())
      throw std::invalid_argument("rde_nonlinearity: grid/spectrum mismatch");
    Vec vals = grid->to_grid(c);
    Vec out(grid->n_points());
    for (int j = 0; j < grid->n_points(); ++j) out(j) = -f(grid->point(j), vals(j));
    return grid->to_coeffs(out);
  };

  double loc_f = field.sup_f, loc_fu = field.sup_fu;
  if (has_cut) {
    // states never leave ||u|| <= 2R, so scalar sups over the reachable
    // pointwise range suffice
    double s_max = 2.0 * cutoff_radius * grid->max_point_amplitude();
    double mf = 0.0, mfu = 0.0;
    const int ns = 201;
    for (int j = 0; j < grid->n_points(); ++j) {
      Vec x = grid->point(j);
      for (int i = 0; i < ns; ++i) {
        double s = s_max * (2.0 * i / (ns - 1) - 1.0);
        mf = std::max(mf, std::abs(field.f(x, s)));
        mfu = std::max(mfu, std::abs(field.f_u(x, s)));
      }
    }
    loc_f = std::min(loc_f, mf * 1.02);
    loc_fu = std::min(loc_fu, mfu * 1.02);
  } else if (!std::isfinite(field.sup_fu)) {
    throw std::invalid_argument("rde_nonlinearity: no cutoff requires a finite sup |f_u|");
  }

  NonlinearityModel nm;
  double root_measure = std::sqrt(grid->measure);
  nm.bound_C = root_measure * loc_f;
  nm.lipschitz_L =
      has_cut ? loc_fu + smooth_step_max_slope() / cutoff_radius * root_measure * loc_f
              : loc_fu;
  nm.smoothing_beta = 0.0;

  nm.evaluate = [grid, raw, has_cut, R = cutoff_radius](const Vec& c) -> Vec {
    if (c.size() != grid->n_modes())
      throw std::invalid_argument("rde_nonlinearity: grid/spectrum mismatch");
    if (!has_cut) return raw(c);
    double r = c.norm();
    if (r >= 2.0 * R) return Vec::Zero(c.size());
    return radial_cutoff(R, r) * raw(c);
  };

  nm.derivative_action = [grid, raw, fu = field.f_u, has_cut,
                          R = cutoff_radius](const Vec& c, const Vec& v) -> Vec {
    if (c.size() != grid->n_modes() || v.size() != grid->n_modes())
      throw std::invalid_argument("rde_nonlinearity: grid/spectrum mismatch");
    double chi = 1.0, dchi = 0.0;
    if (has_cut) {
      double r = c.norm();
      if (r >= 2.0 * R) return Vec::Zero(c.size());
      chi = radial_cutoff(R, r);
      dchi = radial_cutoff_deriv(R, r);
      if (dchi != 0.0 && r > 0.0) {
        Vec uvals = grid->to_grid(c), vvals = grid->to_grid(v);
        Vec prod(grid->n_points());
        for (int j = 0; j < grid->n_points(); ++j)
          prod(j) = -fu(grid->point(j), uvals(j)) * vvals(j);
        return chi * grid->to_coeffs(prod) + (dchi * c.dot(v) / r) * raw(c);
      }
    }
    Vec uvals = grid->to_grid(c), vvals = grid->to_grid(v);
    Vec prod(grid->n_points());
    for (int j = 0; j < grid->n_points(); ++j)
      prod(j) = -fu(grid->point(j), uvals(j)) * vvals(j);
    return chi * grid->to_coeffs(prod);
  };
  return nm;
}

// ---------------------------------------------------------------------------
// Spatial averaging

// Mean of f_u(x, u(x)) over the domain (the zeroth Fourier coefficient).
inline double spatial_average_multiplier(const Vec& u,
                                         const std::function<double(const Vec&, double)>& f_prime,
                                         const CollocationGrid& grid) {
  if (u.size() != grid.n_modes())
    throw std::invalid_argument("spatial_average_multiplier: length mismatch");
  Vec vals = grid.to_grid(u);
  double acc = 0.0;
  for (int j = 0; j < grid.n_points(); ++j) acc += f_prime(grid.point(j), vals(j));
  return acc / grid.n_points();
}

inline double spatial_average_multiplier(const State& u,
                                         const std::function<double(const Vec&, double)>& f_prime,
                                         const CollocationGrid& grid) {
  return spatial_average_multiplier(u.c, f_prime, grid);
}

// || Pshell( f_u(x,u(x)) * (Pshell v) ) - a(u) * Pshell v || in coefficient
// space: how far the multiplier operator is from the scalar a(u) on the
// spectral shell at cut N with half-width k.
inline double spatial_averaging_defect(const Spectrum& sp, const Vec& u, const Vec& v, int N,
                                       double k,
                                       const std::function<double(const Vec&, double)>& f_prime,
                                       const CollocationGrid& grid) {
  if (u.size() != grid.n_modes() || v.size() != grid.n_modes() || sp.size() != grid.n_modes())
    throw std::invalid_argument("spatial_averaging_defect: size mismatch");
  auto split = shell_projector(sp, N, k);
  Vec w = Vec::Zero(v.size());
  for (int n : split.shell) w(n - 1) = v(n - 1);
  Vec uvals = grid.to_grid(u), wvals = grid.to_grid(w);
  Vec prod(grid.n_points());
  for (int j = 0; j < grid.n_points(); ++j) prod(j) = f_prime(grid.point(j), uvals(j)) * wvals(j);
  Vec coeffs = grid.to_coeffs(prod);
  double a = spatial_average_multiplier(u, f_prime, grid);
  double acc = 0.0;
  for (int n : split.shell) {
    double d = coeffs(n - 1) - a * w(n - 1);
    acc += d * d;
  }
  return std::sqrt(acc);
}

inline double spatial_averaging_defect(const State& u, const State& v, int N, double k,
                                       const std::function<double(const Vec&, double)>& f_prime,
                                       const CollocationGrid& grid) {
  if (!u.sp) throw std::invalid_argument("spatial_averaging_defect: state without spectrum");
  return spatial_averaging_defect(*u.sp, u.c, v.c, N, k, f_prime, grid);
}

// ---------------------------------------------------------------------------
// Ready-made models

inline Model model_zero(Spectrum sp) {
  Model m;
  m.spectrum = std::move(sp);
  m.name = "zero";
  m.F.evaluate = [](const Vec& u) { return Vec(Vec::Zero(u.size())); };
  m.F.derivative_action = [](const Vec& u, const Vec&) { return Vec(Vec::Zero(u.size())); };
  m.F.lipschitz_L = 0.0;
  m.F.bound_C = 0.0;
  return m;
}

inline Model model_constant(Spectrum sp, Vec g) {
  if (g.size() != sp.size()) throw std::invalid_argument("model_constant: length mismatch");
  Model m;
  m.spectrum = std::move(sp);
  m.name = "constant";
  m.F.bound_C = g.norm();
  m.F.lipschitz_L = 0.0;
  m.F.evaluate = [g](const Vec&) { return g; };
  m.F.derivative_action = [](const Vec& u, const Vec&) { return Vec(Vec::Zero(u.size())); };
  return m;
}

// F(u) = eps * u_from * e_to (1-based mode indices). The invariant graph over
// mode `from` is linear with slope eps / (lambda_to - lambda_from).
inline Model model_linear_coupling(Spectrum sp, int from, int to, double eps) {
  sp.validate();
  if (from < 1 || from > sp.size() || to < 1 || to > sp.size() || from == to)
    throw std::invalid_argument("model_linear_coupling: bad mode indices");
  Model m;
  m.spectrum = std::move(sp);
  m.name = "linear-coupling";
  int i = from - 1, j = to - 1;
  auto lin = [i, j, eps](const Vec& u) {
    Vec F = Vec::Zero(u.size());
    F(j) = eps * u(i);
    return F;
  };
  m.F.evaluate = lin;
  m.F.derivative_action = [lin](const Vec&, const Vec& v) { return lin(v); };
  m.F.lipschitz_L = std::abs(eps);
  return m;
}

// Linear rotation of strength L inside each listed mode pair; exact operator
// norm L, so the gap condition at a cut through a pair fails iff gap < 2L.
inline Model model_block_rotation(Spectrum sp, std::vector<std::pair<int, int>> pairs,
                                  double L) {
  sp.validate();
  for (auto& [i, j] : pairs)
    if (i < 1 || j < 1 || i > sp.size() || j > sp.size() || i == j)
      throw std::invalid_argument("model_block_rotation: bad pair");
  Model m;
  m.spectrum = std::move(sp);
  m.name = "block-rotation";
  auto lin = [pairs, L](const Vec& u) {
    Vec F = Vec::Zero(u.size());
    for (auto& [i, j] : pairs) {
      F(i - 1) += L * u(j - 1);
      F(j - 1) -= L * u(i - 1);
    }
    return F;
  };
  m.F.evaluate = lin;
  m.F.derivative_action = [lin](const Vec&, const Vec& v) { return lin(v); };
  m.F.lipschitz_L = L;
  return m;
}

// Wraps a locally Lipschitz field in the radial cutoff at R. raw_L_ball and
// raw_sup_ball must bound ||DF|| and ||F|| on ||u|| <= 2R.
inline NonlinearityModel cutoff_wrap(std::function<Vec(const Vec&)> raw,
                                     std::function<Vec(const Vec&, const Vec&)> raw_deriv,
                                     double R, double raw_L_ball, double raw_sup_ball) {
  NonlinearityModel nm;
  nm.lipschitz_L = raw_L_ball + smooth_step_max_slope() / R * raw_sup_ball;
  nm.bound_C = raw_sup_ball;
  nm.evaluate = [raw, R](const Vec& u) -> Vec {
    double r = u.norm();
    if (r >= 2.0 * R) return Vec::Zero(u.size());
    return radial_cutoff(R, r) * raw(u);
  };
  nm.derivative_action = [raw, raw_deriv, R](const Vec& u, const Vec& v) -> Vec {
    double r = u.norm();
    if (r >= 2.0 * R) return Vec::Zero(u.size());
    Vec out = radial_cutoff(R, r) * raw_deriv(u, v);
    double d = radial_cutoff_deriv(R, r);
    if (d != 0.0 && r > 0.0) out += (d * u.dot(v) / r) * raw(u);
    return out;
  };
  return nm;
}

// Planar limit-cycle normal form embedded in the first two modes; remaining
// modes are pure decay. Circle attractor of radius sqrt(mu/nu) traversed at
// angular speed omega; cutoff far outside the attractor keeps declared
// constants finite without touching the dynamics near it.
inline Model model_hopf(int M = 8, double mu = 1.0, double omega = 2.0, double nu = 1.0) {
  if (M < 2) throw std::invalid_argument("model_hopf: M >= 2");
  Model m;
  m.spectrum = spectrum_interval(M, 1.0, 0.0);
  m.name = "hopf";
  double l1 = m.spectrum.lambda(1), l2 = m.spectrum.lambda(2);
  auto raw = [l1, l2, mu, omega, nu](const Vec& u) {
    Vec F = Vec::Zero(u.size());
    double r2 = u(0) * u(0) + u(1) * u(1);
    F(0) = (l1 + mu) * u(0) - omega * u(1) - nu * u(0) * r2;
    F(1) = omega * u(0) + (l2 + mu) * u(1) - nu * u(1) * r2;
    return F;
  };
  auto draw = [l1, l2, mu, omega, nu](const Vec& u, const Vec& v) {
    Vec F = Vec::Zero(u.size());
    double r2 = u(0) * u(0) + u(1) * u(1);
    double dr2 = 2.0 * (u(0) * v(0) + u(1) * v(1));
    F(0) = (l1 + mu) * v(0) - omega * v(1) - nu * (v(0) * r2 + u(0) * dr2);
    F(1) = omega * v(0) + (l2 + mu) * v(1) - nu * (v(1) * r2 + u(1) * dr2);
    return F;
  };
  const double R = 3.0;
  double lin = std::max(l1, l2) + mu + omega;
  double sup_ball = lin * 2.0 * R + nu * std::pow(2.0 * R, 3);
  double L_ball = lin + 3.0 * nu * std::pow(2.0 * R, 2);
  m.F = cutoff_wrap(raw, draw, R, L_ball, sup_ball);
  return m;
}

// Odd, globally Lipschitz, globally bounded scalar nonlinearity: a cubic in
// the saturated variable s0 tanh(s/s0). sup |f| = gamma s0^3 and
// sup |f'| = (3/4) gamma s0^2 are exact, so no cutoff is needed.
inline ScalarField saturated_cubic_field(double gamma, double s0) {
  if (!(gamma > 0.0) || !(s0 > 0.0))
    throw std::invalid_argument("saturated_cubic_field: positive parameters");
  ScalarField f;
  f.f = [gamma, s0](const Vec&, double s) {
    double c = s0 * std::tanh(s / s0);
    return gamma * c * c * c;
  };
  f.f_u = [gamma, s0](const Vec&, double s) {
    double t = std::tanh(s / s0);
    return 3.0 * gamma * s0 * s0 * t * t * (1.0 - t * t);
  };
  f.sup_f = gamma * s0 * s0 * s0;
  f.sup_fu = 0.75 * gamma * s0 * s0;
  return f;
}

inline Model model_saturated_cubic(int M = 32, double gamma = 0.9, double s0 = 1.2) {
  Model m;
  m.spectrum = spectrum_interval(M, 1.0, 0.0);
  m.grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(M));
  m.F = rde_nonlinearity(saturated_cubic_field(gamma, s0), m.grid,
                         std::numeric_limits<double>::infinity());
  m.name = "saturated-cubic";
  return m;
}

inline Model model_interval_rde(const ScalarField& field, int M, double a, double alpha,
                                double cutoff_radius) {
  Model m;
  m.spectrum = spectrum_interval(M, a, alpha);
  m.grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(M));
  m.F = rde_nonlinearity(field, m.grid, cutoff_radius);
  m.name = "interval-rde";
  return m;
}

// Torus model: A = -a Laplace + alpha on the box-truncated trigonometric
// basis. alpha > 0 keeps the constant mode positive.
inline Model model_torus_rde(const ScalarField& field, int dim, int B, double a, double alpha,
                             double cutoff_radius) {
  if (!(a > 0.0) || !(alpha > 0.0))
    throw std::invalid_argument("model_torus_rde: a, alpha must be positive");
  Model m;
  m.grid = std::make_shared<CollocationGrid>(CollocationGrid::torus(dim, B));
  m.spectrum.source = "torus-box";
  for (size_t i = 0; i < m.grid->laplace_eigs.size(); ++i) {
    m.spectrum.values.push_back(a * m.grid->laplace_eigs[i] + alpha);
    m.spectrum.labels.push_back(m.grid->mode_labels[i]);
  }
  m.F = rde_nonlinearity(field, m.grid, cutoff_radius);
  m.name = "torus-rde";
  return m;
}

}  // namespace imlab
