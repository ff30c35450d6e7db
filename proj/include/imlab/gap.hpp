#pragma once

// Spectral gap predicates: the plain 2L condition, its generalization for
// nonlinearities losing beta derivatives, the C^k smoothness variant, gap
// search over a spectrum, the 3D lattice shell search, and the admissibility
// check for the spatial averaging constants.

#include <array>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <utility>
#include <vector>

#include "imlab/spectral.hpp"

namespace imlab {

struct GapReport {
  int N = 0;
  double lambda_lo = 0.0;  // lambda_N
  double lambda_hi = 0.0;  // lambda_{N+1}
  double gap = 0.0;
  double theta = 0.0;  // gap / 2
  double alpha = 0.0;  // shifted dichotomy exponent, in (lambda_N, lambda_{N+1})
  double ratio = 0.0;  // gap / (lambda_{N+1}^{-beta/2} + lambda_N^{-beta/2})
  double L = 0.0;
  double beta = 0.0;
  bool satisfied = false;
  bool boundary = false;  // ratio exactly equal to the threshold
};

// General form: the cut at N admits a Lipschitz-L nonlinearity losing beta
// derivatives iff ratio > L, with the exponent alpha chosen so the weighted
// resolvent bound is equal on both sides of the cut.
inline std::pair<bool, GapReport> gap_condition_beta(const Spectrum& sp, int N, double L,
                                                     double beta) {
  if (!(beta > -2.0) || beta > 0.0)
    throw std::invalid_argument("gap_condition_beta: beta in (-2, 0]");
  if (N < 1 || N >= sp.size()) throw std::out_of_range("gap_condition_beta: need 1 <= N < M");
  GapReport r;
  r.N = N;
  r.lambda_lo = sp.lambda(N);
  r.lambda_hi = sp.lambda(N + 1);
  r.gap = r.lambda_hi - r.lambda_lo;
  r.theta = 0.5 * r.gap;
  r.L = L;
  r.beta = beta;
  double wlo = std::pow(r.lambda_lo, -beta / 2.0);
  double whi = std::pow(r.lambda_hi, -beta / 2.0);
  r.ratio = r.gap / (whi + wlo);
  r.alpha = (r.lambda_hi * wlo + r.lambda_lo * whi) / (wlo + whi);
  r.satisfied = r.ratio > L;
  r.boundary = r.ratio == L;
  return {r.satisfied, r};
}

// Plain condition lambda_{N+1} - lambda_N > 2L; beta = 0 specialization.
inline std::pair<bool, GapReport> gap_condition(const Spectrum& sp, int N, double L) {
  return gap_condition_beta(sp, N, L, 0.0);
}

// C^k smoothness condition: lambda_{N+1} - k lambda_N must clear the gap
// threshold with the k-fold weight on the low side.
inline bool gap_condition_ck(const Spectrum& sp, int N, int k, double L, double beta) {
  if (k < 1) throw std::invalid_argument("gap_condition_ck: k >= 1");
  if (!(beta > -2.0) || beta > 0.0)
    throw std::invalid_argument("gap_condition_ck: beta in (-2, 0]");
  if (N < 1 || N >= sp.size()) throw std::out_of_range("gap_condition_ck: need 1 <= N < M");
  double lo = sp.lambda(N), hi = sp.lambda(N + 1);
  double wlo = std::pow(lo, -beta / 2.0), whi = std::pow(hi, -beta / 2.0);
  return hi - double(k) * lo > std::sqrt(2.0) * L * (whi + double(k) * wlo);
}

// All satisfying cuts, at distinct-eigenvalue boundaries only (cutting inside
// a multiplicity class gives gap 0).
inline std::vector<GapReport> find_gaps(const Spectrum& sp, double L, double beta,
                                        int count) {
  std::vector<GapReport> out;
  for (int N = 1; N < sp.size() && static_cast<int>(out.size()) < count; ++N) {
    if (sp.lambda(N + 1) <= sp.lambda(N)) continue;
    auto [ok, rep] = gap_condition_beta(sp, N, L, beta);
    if (ok) out.push_back(rep);
  }
  return out;
}

// Cuts N <= N_max of the cubic-lattice spectrum whose shell
// { p : N + 1/2 - k <= |p|^2 <= N + 1/2 + k } contains no two distinct points
// with |p - q|^2 <= rho. Both the shell half-width k and the exclusion radius
// rho are in squared-norm units. Exhaustive: every shell point is probed
// against every lattice offset inside the exclusion ball.
inline std::vector<long> shell_search(double k, double rho, long N_max) {
  if (!(k > 0.0) || !(rho > 0.0))
    throw std::invalid_argument("shell_search: k, rho must be positive");
  if (N_max < 1) throw std::invalid_argument("shell_search: N_max >= 1");

  // offsets 0 < |d|^2 <= rho
  struct Off {
    int x, y, z;
    long n2;
  };
  std::vector<Off> offs;
  int orad = static_cast<int>(std::floor(std::sqrt(rho)));
  for (int x = -orad; x <= orad; ++x)
    for (int y = -orad; y <= orad; ++y)
      for (int z = -orad; z <= orad; ++z) {
        long n2 = long(x) * x + long(y) * y + long(z) * z;
        if (n2 > 0 && double(n2) <= rho) offs.push_back({x, y, z, n2});
      }

  // lattice points bucketed by |p|^2 up to the largest shell ceiling
  long top = static_cast<long>(std::floor(double(N_max) + 0.5 + k));
  int prad = static_cast<int>(std::ceil(std::sqrt(double(N_max) + 0.5 + k)));
  std::vector<std::vector<std::array<int, 3>>> bucket(top + 1);
  for (int x = -prad; x <= prad; ++x)
    for (int y = -prad; y <= prad; ++y)
      for (int z = -prad; z <= prad; ++z) {
        long n2 = long(x) * x + long(y) * y + long(z) * z;
        if (n2 <= top) bucket[n2].push_back({x, y, z});
      }

  std::vector<long> result;
  for (long N = 1; N <= N_max; ++N) {
    double lo = double(N) + 0.5 - k, hi = double(N) + 0.5 + k;
    long ilo = std::max(0L, static_cast<long>(std::ceil(lo)));
    long ihi = std::min(top, static_cast<long>(std::floor(hi)));
    bool ok = true;
    for (long n2 = ilo; n2 <= ihi && ok; ++n2)
      for (const auto& p : bucket[n2]) {
        for (const Off& d : offs) {
          // |p + d|^2 without forming the point
          long q2 = n2 + 2L * (long(p[0]) * d.x + long(p[1]) * d.y + long(p[2]) * d.z) + d.n2;
          if (double(q2) >= lo && double(q2) <= hi) {
            ok = false;
            break;
          }
        }
        if (!ok) break;
      }
    if (ok) result.push_back(N);
  }
  return result;
}

// Admissibility of the spatial-averaging constants: requires the shell width
// to dominate the Lipschitz constant (k > 4L) and both smallness conditions.
inline bool spatial_averaging_constants(double theta, double L, double k, double delta,
                                        double alpha) {
  if (!(k > 4.0 * L)) throw std::invalid_argument("spatial_averaging_constants: need k > 4L");
  return (2.0 * L * L / (k - 4.0 * L) + delta < theta / 2.0) && (alpha - 2.0 * L > 0.0);
}

inline std::string gap_report_csv_header() {
  return "N,lambda_N,lambda_N1,gap,ratio,theta,alpha,L,beta,satisfied,boundary";
}

inline std::string gap_report_csv_row(const GapReport& r) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << r.N << ',' << r.lambda_lo << ',' << r.lambda_hi << ',' << r.gap << ',' << r.ratio
     << ',' << r.theta << ',' << r.alpha << ',' << r.L << ',' << r.beta << ','
     << (r.satisfied ? 1 : 0) << ',' << (r.boundary ? 1 : 0);
  return os.str();
}

}  // namespace imlab
