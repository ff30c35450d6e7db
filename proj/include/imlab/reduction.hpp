#pragma once

// Finite-sample dimension estimators (box counting, doubling factors), random
// projection experiments with Holder fits, and the bi-Lipschitz projector
// test on paired attractor samples.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "imlab/numerics.hpp"
#include "imlab/spectral.hpp"

namespace imlab {

struct PointCloud {
  std::vector<Vec> points;
  const Spectrum* sp = nullptr;  // when set, distances use the H^s metric
  double sobolev_s = 0.0;

  int size() const { return static_cast<int>(points.size()); }

  void validate() const {
    if (points.empty()) throw std::invalid_argument("PointCloud: empty");
    for (const Vec& p : points)
      if (p.size() != points.front().size())
        throw std::invalid_argument("PointCloud: mixed dimensions");
    if (sp != nullptr && points.front().size() != sp->size())
      throw std::invalid_argument("PointCloud: dimension does not match the spectrum");
  }

  double dist(int i, int j) const {
    Vec d = points[i] - points[j];
    if (sp == nullptr) return d.norm();
    return sobolev_norm(*sp, d, sobolev_s);
  }
};

namespace detail {

// first-fit net: every point ends within eps of some retained center
inline long greedy_net_count(const PointCloud& cloud, const std::vector<int>& subset,
                             double eps) {
  std::vector<int> centers;
  for (int i : subset) {
    bool covered = false;
    for (int c : centers)
      if (cloud.dist(i, c) <= eps) {
        covered = true;
        break;
      }
    if (!covered) centers.push_back(i);
  }
  return static_cast<long>(centers.size());
}

// distinct occupied cells of an axis-aligned grid of side eps, anchored at the
// bounding box corner so coordinates hugging a hyperplane do not straddle a
// cell boundary
inline long grid_cell_count(const std::vector<Vec>& pts, double eps) {
  Vec lo = pts.front();
  for (const Vec& p : pts) lo = lo.cwiseMin(p);
  std::set<std::vector<long long>> cells;
  std::vector<long long> idx;
  for (const Vec& p : pts) {
    idx.resize(p.size());
    for (int d = 0; d < p.size(); ++d)
      idx[d] = static_cast<long long>(std::floor((p[d] - lo[d]) / eps));
    cells.insert(idx);
  }
  return static_cast<long>(cells.size());
}

}  // namespace detail

struct BoxCountReport {
  double dim = 0.0, r2 = 0.0;
  std::vector<double> eps;
  std::vector<long> counts;
};

inline BoxCountReport box_counting_dim(const PointCloud& cloud,
                                       std::vector<double> eps_range) {
  cloud.validate();
  if (eps_range.size() < 2) throw std::invalid_argument("box_counting_dim: degenerate range");
  for (double e : eps_range)
    if (!(e > 0.0)) throw std::invalid_argument("box_counting_dim: degenerate range");
  std::sort(eps_range.begin(), eps_range.end(), std::greater<>());
  if (eps_range.front() / eps_range.back() < std::pow(10.0, 1.5) - 1e-9)
    throw std::invalid_argument("box_counting_dim: range spans less than 1.5 decades");

  // quantize in coordinates scaled so the grid metric matches dist()
  std::vector<Vec> scaled = cloud.points;
  if (cloud.sp != nullptr && cloud.sobolev_s != 0.0)
    for (Vec& p : scaled)
      for (int d = 0; d < p.size(); ++d)
        p[d] *= std::pow(cloud.sp->values[d], cloud.sobolev_s / 2.0);

  BoxCountReport rep;
  std::vector<double> x, y;
  for (double e : eps_range) {
    long n = detail::grid_cell_count(scaled, e);
    rep.eps.push_back(e);
    rep.counts.push_back(n);
    x.push_back(std::log(1.0 / e));
    y.push_back(std::log(double(n)));
  }
  FitResult fit = linear_fit(x, y);
  rep.dim = fit.c1;
  rep.r2 = fit.r2;
  return rep;
}

// largest eps/2 covering count of the cloud restricted to a ball of radius
// eps around one of its own points
inline long doubling_factor(const PointCloud& cloud, double eps) {
  cloud.validate();
  if (!(eps > 0.0)) throw std::invalid_argument("doubling_factor: eps > 0");
  long best = 0;
  for (int c = 0; c < cloud.size(); ++c) {
    std::vector<int> inside;
    for (int i = 0; i < cloud.size(); ++i)
      if (cloud.dist(i, c) <= eps) inside.push_back(i);
    best = std::max(best, detail::greedy_net_count(cloud, inside, eps / 2.0));
  }
  return best;
}

inline double log_doubling_factor(const PointCloud& cloud,
                                  const std::vector<double>& eps_range) {
  cloud.validate();
  double best = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (double e : eps_range) {
    if (!(e > 0.0) || std::log(1.0 / e) <= 1.0) continue;  // needs log log(1/e) > 0
    any = true;
    double d = double(doubling_factor(cloud, e));
    best = std::max(best, std::log(d) / std::log(std::log(1.0 / e)));
  }
  if (!any) throw std::invalid_argument("log_doubling_factor: no usable eps in range");
  return best;
}

// one segment of length eps_n along each coordinate axis; besides a uniform
// sample each segment carries the finer clip radii eps_k (k >= m) so the
// counting argument for the doubling factor is realized exactly on the sample
inline PointCloud orthogonal_segments_set(const std::vector<double>& eps, int pts_per_seg) {
  int n_max = static_cast<int>(eps.size());
  if (n_max < 1) throw std::invalid_argument("orthogonal_segments_set: empty eps");
  if (pts_per_seg < 2) throw std::invalid_argument("orthogonal_segments_set: pts_per_seg >= 2");
  for (int i = 0; i < n_max; ++i) {
    if (!(eps[i] > 0.0)) throw std::invalid_argument("orthogonal_segments_set: eps positive");
    if (i > 0 && eps[i] > eps[i - 1])
      throw std::invalid_argument("orthogonal_segments_set: eps nonincreasing");
  }
  PointCloud cloud;
  cloud.points.push_back(Vec::Zero(n_max));
  for (int m = 0; m < n_max; ++m) {
    for (int j = 1; j < pts_per_seg; ++j) {
      Vec p = Vec::Zero(n_max);
      p[m] = eps[m] * double(j) / double(pts_per_seg - 1);
      cloud.points.push_back(p);
    }
    for (int k = m; k < n_max; ++k) {
      Vec p = Vec::Zero(n_max);
      p[m] = eps[k];
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

// vertices of an n-cube of side eps_n per requested n, each cube in its own
// coordinate block
inline PointCloud cube_vertices_set(const std::vector<double>& eps,
                                    const std::vector<int>& ns) {
  if (ns.empty()) throw std::invalid_argument("cube_vertices_set: empty n list");
  long total_pts = 0, ambient = 0;
  for (int n : ns) {
    if (n < 1 || n > 20) throw std::invalid_argument("cube_vertices_set: n in [1, 20]");
    if (n > static_cast<int>(eps.size()))
      throw std::invalid_argument("cube_vertices_set: eps shorter than max n");
    total_pts += 1L << n;
    ambient += n;
  }
  if (total_pts > 1000000) throw std::invalid_argument("cube_vertices_set: too many vertices");
  PointCloud cloud;
  long offset = 0;
  for (int n : ns) {
    double e = eps[n - 1];
    for (long mask = 0; mask < (1L << n); ++mask) {
      Vec p = Vec::Zero(ambient);
      for (int b = 0; b < n; ++b)
        if ((mask >> b) & 1) p[offset + b] = e;
      cloud.points.push_back(p);
    }
    offset += n;
  }
  return cloud;
}

inline Mat random_projector(int M, int N, std::uint64_t seed) {
  if (N < 1 || N > M) throw std::invalid_argument("random_projector: need 1 <= N <= M");
  std::mt19937_64 rng(seed);
  Mat P(N, M);
  for (int r = 0; r < N; ++r) {
    Vec row = gaussian_vector(M, rng);
    for (int attempt = 0;; ++attempt) {
      for (int q = 0; q < r; ++q) row -= row.dot(P.row(q)) * P.row(q).transpose();
      double nrm = row.norm();
      if (nrm > 1e-12) {
        P.row(r) = row.transpose() / nrm;
        break;
      }
      if (attempt > 16) throw std::runtime_error("random_projector: degenerate draw");
      row = gaussian_vector(M, rng);
    }
  }
  return P;
}

struct ProjectionExperiment {
  int N = 0;
  Mat basis;  // orthonormal rows
  std::uint64_t seed = 0;
  double margin = 0.0;  // min over pairs of |P(x-y)| / |x-y|
  double holder_exponent = 0.0, holder_constant = 0.0, holder_r2 = 0.0;
};

// margin and Holder fit of one projector against every pair of the cloud;
// the fit uses only pairs below the median separation (asymptotic regime)
inline ProjectionExperiment projection_experiment(const PointCloud& cloud, const Mat& basis,
                                                  std::uint64_t seed = 0) {
  cloud.validate();
  if (basis.cols() != cloud.points.front().size())
    throw std::invalid_argument("projection_experiment: basis/cloud mismatch");
  ProjectionExperiment ex;
  ex.N = static_cast<int>(basis.rows());
  ex.basis = basis;
  ex.seed = seed;

  std::vector<double> dists;
  for (int i = 0; i < cloud.size(); ++i)
    for (int j = i + 1; j < cloud.size(); ++j) {
      double d = (cloud.points[i] - cloud.points[j]).norm();
      if (d > 0.0) dists.push_back(d);
    }
  if (dists.empty()) throw std::invalid_argument("projection_experiment: no distinct pairs");
  std::vector<double> sorted = dists;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
  double median = sorted[sorted.size() / 2];

  ex.margin = std::numeric_limits<double>::infinity();
  std::vector<double> lx, ly;
  for (int i = 0; i < cloud.size(); ++i)
    for (int j = i + 1; j < cloud.size(); ++j) {
      Vec d = cloud.points[i] - cloud.points[j];
      double full = d.norm();
      if (full == 0.0) continue;
      double proj = (basis * d).norm();
      ex.margin = std::min(ex.margin, proj / full);
      if (full <= median && proj > 0.0) {
        lx.push_back(std::log(full));
        ly.push_back(std::log(proj));
      }
    }
  // regress the projected separation on the full one (the full separation is
  // the noise-free variable) and invert; regressing the other way round
  // attenuates the slope whenever the projector is anisotropic on the cloud
  if (lx.size() >= 4) {
    FitResult fit = linear_fit(lx, ly);
    if (fit.c1 > 1e-12) {
      ex.holder_exponent = 1.0 / fit.c1;
      ex.holder_constant = std::exp(-fit.c0 / fit.c1);
    }
    ex.holder_r2 = fit.r2;
  }
  return ex;
}

struct ManeReport {
  std::vector<ProjectionExperiment> runs;
  double injective_fraction = 0.0;
};

inline ManeReport mane_experiment(const PointCloud& cloud, int N, int n_seeds,
                                  std::uint64_t base_seed = 1234) {
  cloud.validate();
  if (n_seeds < 1) throw std::invalid_argument("mane_experiment: n_seeds >= 1");
  int M = static_cast<int>(cloud.points.front().size());
  ManeReport rep;
  int injective = 0;
  for (int s = 0; s < n_seeds; ++s) {
    std::uint64_t seed = base_seed + std::uint64_t(s);
    ProjectionExperiment ex =
        projection_experiment(cloud, random_projector(M, N, seed), seed);
    if (ex.margin > 0.0) ++injective;
    rep.runs.push_back(std::move(ex));
  }
  rep.injective_fraction = double(injective) / double(n_seeds);
  return rep;
}

struct RomanovReport {
  double ratio_min = 0.0, ratio_max = 0.0;  // H^2 over H pairwise quotients
  int N_star = -1;                          // smallest qualifying cut, -1 if none
  double L_star = 0.0;                      // smallest candidate that works there
  std::vector<double> L_required;           // per cut, the max tail/head quotient
};

// evidence for the bi-Lipschitz projector property on a finite paired sample:
// tail differences controlled by head differences at some cut
inline RomanovReport romanov_check(const PointCloud& cloud_H, const PointCloud& cloud_H2,
                                   const Spectrum& sp,
                                   const std::vector<double>& L_candidates) {
  cloud_H.validate();
  cloud_H2.validate();
  if (cloud_H.size() != cloud_H2.size())
    throw std::invalid_argument("romanov_check: clouds must be paired");
  if (cloud_H.points.front().size() != sp.size() ||
      cloud_H2.points.front().size() != sp.size())
    throw std::invalid_argument("romanov_check: cloud dimension must match the spectrum");
  if (L_candidates.empty()) throw std::invalid_argument("romanov_check: no L candidates");

  RomanovReport rep;
  rep.ratio_min = std::numeric_limits<double>::infinity();
  rep.ratio_max = 0.0;
  int M = sp.size();
  rep.L_required.assign(M - 1, 0.0);
  bool any_pair = false;
  for (int i = 0; i < cloud_H.size(); ++i)
    for (int j = i + 1; j < cloud_H.size(); ++j) {
      Vec d = cloud_H.points[i] - cloud_H.points[j];
      double dh = d.norm();
      if (dh == 0.0) continue;
      any_pair = true;
      Vec d2 = cloud_H2.points[i] - cloud_H2.points[j];
      double ratio = sobolev_norm(sp, d2, 2.0) / dh;
      rep.ratio_min = std::min(rep.ratio_min, ratio);
      rep.ratio_max = std::max(rep.ratio_max, ratio);

      double head2 = 0.0, tail2 = d.squaredNorm();
      for (int n = 0; n + 1 < M; ++n) {
        head2 += d[n] * d[n];
        tail2 -= d[n] * d[n];
        double q = tail2 <= 0.0 ? 0.0 : std::sqrt(std::max(tail2, 0.0) / head2);
        if (head2 == 0.0) q = tail2 > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        rep.L_required[n] = std::max(rep.L_required[n], q);
      }
    }
  if (!any_pair) throw std::invalid_argument("romanov_check: all points coincide");

  double Lmax = *std::max_element(L_candidates.begin(), L_candidates.end());
  for (int n = 0; n + 1 < M; ++n) {
    if (rep.L_required[n] <= Lmax) {
      rep.N_star = n + 1;
      rep.L_star = Lmax;
      for (double L : L_candidates)
        if (L >= rep.L_required[n]) rep.L_star = std::min(rep.L_star, L);
      break;
    }
  }
  return rep;
}

inline std::string box_count_csv(const BoxCountReport& rep) {
  std::ostringstream os;
  os << std::setprecision(17) << "eps,count\n";
  for (size_t i = 0; i < rep.eps.size(); ++i) os << rep.eps[i] << ',' << rep.counts[i] << '\n';
  return os.str();
}

inline std::vector<double> log_spaced(double lo, double hi, int k) {
  if (!(lo > 0.0) || !(hi > lo) || k < 2) throw std::invalid_argument("log_spaced: bad range");
  std::vector<double> out(k);
  for (int i = 0; i < k; ++i)
    out[i] = std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * double(i) / double(k - 1));
  return out;
}

}  // namespace imlab
