#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <set>

#include "imlab/gap.hpp"
#include "imlab/models.hpp"

using namespace imlab;

namespace {

// Independent shell enumeration for re-verifying shell_search hits: triple
// loop, explicit pairwise distances.
struct ShellOracle {
  std::vector<std::array<int, 3>> pts;
  ShellOracle(long N, double k) {
    double lo = double(N) + 0.5 - k, hi = double(N) + 0.5 + k;
    int rad = static_cast<int>(std::ceil(std::sqrt(hi)));
    for (int x = -rad; x <= rad; ++x)
      for (int y = -rad; y <= rad; ++y)
        for (int z = -rad; z <= rad; ++z) {
          long n2 = long(x) * x + long(y) * y + long(z) * z;
          if (double(n2) >= lo && double(n2) <= hi) pts.push_back({x, y, z});
        }
  }
  // smallest squared distance between distinct shell points, -1 if < 2 points
  long min_pair_dist2() const {
    long best = -1;
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j) {
        long dx = pts[i][0] - pts[j][0], dy = pts[i][1] - pts[j][1],
             dz = pts[i][2] - pts[j][2];
        long d2 = dx * dx + dy * dy + dz * dz;
        if (best < 0 || d2 < best) best = d2;
      }
    return best;
  }
};

}  // namespace

TEST_CASE("plain gap condition on the first interval eigenvalues") {
  Spectrum sp = spectrum_interval(4, 1.0, 0.0);  // 1, 4, 9, 16

  auto [ok1, r1] = gap_condition(sp, 1, 1.0);
  REQUIRE(ok1);
  CHECK(r1.gap == 3.0);
  CHECK(r1.theta == 1.5);
  CHECK(r1.alpha == 2.5);
  CHECK(r1.ratio == 1.5);
  CHECK_FALSE(r1.boundary);

  auto [ok2, r2] = gap_condition(sp, 1, 1.5);
  CHECK_FALSE(ok2);  // strict inequality
  CHECK(r2.boundary);

  auto [ok3, r3] = gap_condition(sp, 2, 2.0);
  CHECK(ok3);  // gap 5 > 4
  CHECK(r3.alpha == 6.5);

  CHECK_THROWS_AS(gap_condition(sp, 0, 1.0), std::out_of_range);
  CHECK_THROWS_AS(gap_condition(sp, 4, 1.0), std::out_of_range);
}

TEST_CASE("beta parameter domain") {
  Spectrum sp = spectrum_interval(4, 1.0, 0.0);
  CHECK_THROWS_AS(gap_condition_beta(sp, 1, 1.0, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(gap_condition_beta(sp, 1, 1.0, -2.0), std::invalid_argument);
  CHECK_THROWS_AS(gap_condition_beta(sp, 1, 1.0, -2.5), std::invalid_argument);
  CHECK_NOTHROW(gap_condition_beta(sp, 1, 1.0, 0.0));
  CHECK_NOTHROW(gap_condition_beta(sp, 1, 1.0, -1.99));
}

TEST_CASE("beta = 0 reproduces the plain condition bit for bit") {
  Spectrum sp = spectrum_sphere2(6);
  for (int N = 1; N < sp.size(); ++N) {
    for (double L : {0.5, 1.0, 2.0, 3.0}) {
      auto [ok0, r0] = gap_condition(sp, N, L);
      auto [okb, rb] = gap_condition_beta(sp, N, L, 0.0);
      CHECK(ok0 == okb);
      CHECK(r0.gap == rb.gap);
      CHECK(r0.theta == rb.theta);
      CHECK(r0.alpha == rb.alpha);
      CHECK(r0.ratio == rb.ratio);
      CHECK(r0.boundary == rb.boundary);
    }
  }
}

TEST_CASE("fourth-order spectrum with half a derivative lost") {
  Spectrum sp = spectrum_ks(8, 0.0);  // N^4 + 1
  auto [ok, r] = gap_condition_beta(sp, 3, 18.0, -0.5);
  double expect = 175.0 / (std::pow(257.0, 0.25) + std::pow(82.0, 0.25));
  CHECK(r.ratio == Catch::Approx(expect).epsilon(1e-15));
  // ratio grows like 2 N^2; at N = 3 it is within a factor two of 18
  CHECK(r.ratio > 18.0);
  CHECK(r.ratio < 36.0);
  CHECK(ok);  // 24.95... > 18
  auto [ok2, r2] = gap_condition_beta(sp, 3, 30.0, -0.5);
  CHECK_FALSE(ok2);
}

TEST_CASE("full derivative loss on the quadratic spectrum flattens the ratio") {
  Spectrum sp = spectrum_interval(30, 1.0, 0.0);  // n^2
  for (int N = 1; N < sp.size(); ++N) {
    auto [ok, r] = gap_condition_beta(sp, N, 1.0, -1.0);
    // (2N+1) / ((N+1) + N) is exactly one for every cut
    CHECK(r.ratio == 1.0);
    CHECK_FALSE(ok);
    CHECK(r.boundary);
  }
}

TEST_CASE("squared spectrum at full derivative loss reduces to base gaps") {
  Spectrum base = spectrum_torus2d(50.0);
  Spectrum sq = spectrum_ch(base);
  for (int N = 1; N < sq.size(); ++N) {
    if (sq.lambda(N + 1) <= sq.lambda(N)) continue;
    auto [ok, r] = gap_condition_beta(sq, N, 0.1, -1.0);
    double mu_gap = base.lambda(N + 1) - base.lambda(N);
    CHECK(r.ratio == Catch::Approx(mu_gap).epsilon(1e-12));
  }
}

TEST_CASE("shifted exponent sits strictly inside the gap and balances the weight") {
  std::vector<Spectrum> spectra = {spectrum_interval(12, 1.0, 0.0), spectrum_ks(8, 0.0),
                                   spectrum_sphere2(7)};
  for (const auto& sp : spectra) {
    for (double beta : {0.0, -0.5, -1.0, -1.9}) {
      for (int N = 1; N < sp.size(); ++N) {
        if (sp.lambda(N + 1) <= sp.lambda(N)) continue;
        auto [ok, r] = gap_condition_beta(sp, N, 1.0, beta);
        CHECK(r.alpha > sp.lambda(N));
        CHECK(r.alpha < sp.lambda(N + 1));
        CHECK(r.theta == Catch::Approx(0.5 * r.gap));
        CHECK(r.theta > 0.0);
        // equal weighted resolvent bound on both sides of the cut
        double flo = std::pow(sp.lambda(N), -beta) / std::pow(sp.lambda(N) - r.alpha, 2);
        double fhi =
            std::pow(sp.lambda(N + 1), -beta) / std::pow(sp.lambda(N + 1) - r.alpha, 2);
        CHECK(flo == Catch::Approx(fhi).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("weight profile is unimodal around the shifted exponent") {
  Spectrum sp = spectrum_interval(2, 1.0, 0.0);  // 1, 4
  for (double beta : {0.0, -0.5, -1.0, -1.9}) {
    auto [ok, r] = gap_condition_beta(sp, 1, 0.1, beta);
    auto f = [&](double x) { return std::pow(x, -beta) / std::pow(x - r.alpha, 2); };
    double prev = f(0.05);
    for (double x = 0.10; x < r.alpha - 1e-3; x += 0.05) {
      CHECK(f(x) > prev);
      prev = f(x);
    }
    prev = f(r.alpha + 1e-3);
    for (double x = r.alpha + 0.05; x < 25.0; x += 0.05) {
      CHECK(f(x) < prev);
      prev = f(x);
    }
  }
}

TEST_CASE("k-th order condition is stricter and dies on quadratic growth") {
  Spectrum quad = spectrum_interval(20, 1.0, 0.0);
  // second order never holds here: lambda_{N+1} - 2 lambda_N = 2N + 1 - N^2
  for (int N = 1; N < quad.size(); ++N) CHECK_FALSE(gap_condition_ck(quad, N, 2, 1.0, 0.0));

  // first order carries the sqrt(2) penalty over the plain condition
  Spectrum two = spectrum_interval(2, 1.0, 0.0);
  CHECK(gap_condition(two, 1, 1.2).first);            // 3 > 2.4
  CHECK_FALSE(gap_condition_ck(two, 1, 1, 1.2, 0.0));  // 3 < 2 sqrt(2) 1.2

  CHECK_THROWS_AS(gap_condition_ck(two, 1, 0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(gap_condition_ck(two, 1, 1, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("second-order cut on the sphere agrees with an exhaustive scan") {
  Spectrum sp = spectrum_sphere2(20);
  double L = 0.3;

  int smallest = -1;
  for (int N = 1; N < sp.size(); ++N)
    if (gap_condition_ck(sp, N, 2, L, 0.0)) {
      smallest = N;
      break;
    }

  // oracle on distinct levels: cut after level n sits at index n(n+2)
  int oracle = -1;
  for (int n = 1; n < 20; ++n) {
    double lo = double(n) * (n + 1), hi = double(n + 1) * (n + 2);
    if (hi - 2.0 * lo > std::sqrt(2.0) * L * 3.0) {
      oracle = n * (n + 2);
      break;
    }
  }
  REQUIRE(oracle > 0);
  CHECK(smallest == oracle);
  CHECK(smallest == 3);  // after the first level (multiplicity three)

  // interior cuts have gap zero, so the left side is negative there
  CHECK_FALSE(gap_condition_ck(sp, 1, 2, L, 0.0));
  CHECK_FALSE(gap_condition_ck(sp, 2, 2, L, 0.0));

  // at L = 1 quadratic level growth never clears the doubled low side
  for (int N = 1; N < sp.size(); ++N) CHECK_FALSE(gap_condition_ck(sp, N, 2, 1.0, 0.0));
}

TEST_CASE("gap search lists every qualifying cut in order") {
  Spectrum quad = spectrum_interval(40, 1.0, 0.0);
  auto hits = find_gaps(quad, 3.0, 0.0, 5);
  REQUIRE(hits.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(hits[i].N == 3 + i);  // gap 2N+1 > 6 iff N >= 3

  auto all = find_gaps(quad, 3.0, 0.0, 1000);
  CHECK(all.size() == 37);  // N = 3 .. 39

  // exact tie is excluded: gap at N = 1 is 3 = 2 L
  auto tie = find_gaps(quad, 1.5, 0.0, 1000);
  CHECK(tie.front().N == 2);
}

TEST_CASE("gap search on lattice spectra against a brute-force table") {
  Spectrum t2 = spectrum_torus2d(200.0);
  double L = 1.4;
  std::vector<int> expect;
  for (int N = 1; N < t2.size(); ++N) {
    double g = t2.lambda(N + 1) - t2.lambda(N);
    if (g > 2.0 * L) expect.push_back(N);
  }
  REQUIRE(!expect.empty());
  auto hits = find_gaps(t2, L, 0.0, 100000);
  REQUIRE(hits.size() == expect.size());
  for (size_t i = 0; i < hits.size(); ++i) {
    CHECK(hits[i].N == expect[i]);
    CHECK(hits[i].gap > 2.8);
  }

  // three-square spectrum never opens a gap beyond three
  Spectrum t3 = spectrum_torus3d(2000.0);
  CHECK(find_gaps(t3, 2.0, 0.0, 10).empty());
  CHECK_FALSE(find_gaps(t3, 1.0, 0.0, 10).empty());
}

TEST_CASE("shell search trivial regimes") {
  // probe radius below one: no nonzero lattice offsets, everything qualifies
  auto all = shell_search(2.0, 0.9, 50);
  REQUIRE(all.size() == 50);
  for (long i = 0; i < 50; ++i) CHECK(all[i] == i + 1);

  // shells wide enough to contain neighbours at distance one: nothing qualifies
  CHECK(shell_search(50.0, 1.5, 30).empty());

  CHECK_THROWS_AS(shell_search(0.0, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(shell_search(1.0, -1.0, 10), std::invalid_argument);
}

TEST_CASE("separated shells of width two exist and survive re-verification") {
  auto hits = shell_search(2.0, 3.0, 2000);
  REQUIRE(!hits.empty());

  CHECK(std::find(hits.begin(), hits.end(), 669) != hits.end());

  for (long N : hits) {
    ShellOracle sh(N, 2.0);
    INFO("N = " << N << ", shell size " << sh.pts.size());
    long d2 = sh.min_pair_dist2();
    if (d2 >= 0) CHECK(double(d2) > 3.0);
  }

  // the first few rejected cuts really do contain a close pair
  std::set<long> hit_set(hits.begin(), hits.end());
  int checked = 0;
  for (long N = 1; N <= 2000 && checked < 5; ++N) {
    if (hit_set.count(N)) continue;
    ShellOracle sh(N, 2.0);
    long d2 = sh.min_pair_dist2();
    REQUIRE(d2 >= 0);
    CHECK(double(d2) <= 3.0);
    ++checked;
  }
}

TEST_CASE("averaging constants admissibility") {
  CHECK(spatial_averaging_constants(2.0, 0.1, 1.0, 0.5, 1.0));
  CHECK_FALSE(spatial_averaging_constants(2.0, 0.1, 1.0, 1.0, 1.0));   // delta >= theta/2
  CHECK_FALSE(spatial_averaging_constants(2.0, 0.1, 1.0, 0.5, 0.15));  // alpha too small
  CHECK_THROWS_AS(spatial_averaging_constants(2.0, 0.1, 0.4, 0.5, 1.0),
                  std::invalid_argument);
  // L = 0 degenerates to delta < theta/2 and alpha > 0
  CHECK(spatial_averaging_constants(1.0, 0.0, 0.5, 0.3, 0.1));
  CHECK_FALSE(spatial_averaging_constants(1.0, 0.0, 0.5, 0.6, 0.1));
}

TEST_CASE("gap report serializes to csv") {
  Spectrum sp = spectrum_interval(4, 1.0, 0.0);
  auto [ok, r] = gap_condition(sp, 1, 1.0);
  CHECK(gap_report_csv_header() ==
        "N,lambda_N,lambda_N1,gap,ratio,theta,alpha,L,beta,satisfied,boundary");
  std::string row = gap_report_csv_row(r);
  CHECK(row.substr(0, 6) == "1,1,4,");
  CHECK(row.ends_with(",1,0"));  // satisfied, not boundary
}
