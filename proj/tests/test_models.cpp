#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <functional>
#include <random>
#include <set>

#include "imlab/models.hpp"

using namespace imlab;

// ---------------------------------------------------------------------------
// Oracles, independent of the implementations under test.

namespace {

// sum of two squares iff every prime factor p = 3 (mod 4) has even exponent
bool two_square_rep(long n) {
  for (long p = 2; p * p <= n; ++p) {
    if (n % p) continue;
    int e = 0;
    while (n % p == 0) {
      n /= p;
      ++e;
    }
    if (p % 4 == 3 && e % 2) return false;
  }
  if (n > 1 && n % 4 == 3) return false;
  return true;
}

// sum of three squares iff not of the form 4^l (8m + 7)
bool three_square_rep(long n) {
  while (n % 4 == 0) n /= 4;
  return n % 8 != 7;
}

// sine-basis transform of -f(x, u(x)) on a dense independent grid
Vec dense_sine_transform(const Vec& c, const std::function<double(double, double)>& f, int P) {
  const int M = static_cast<int>(c.size());
  const double amp = std::sqrt(2.0 / M_PI);
  Vec out = Vec::Zero(M);
  for (int j = 1; j <= P; ++j) {
    double x = M_PI * j / (P + 1);
    double u = 0.0;
    for (int n = 1; n <= M; ++n) u += c(n - 1) * amp * std::sin(n * x);
    double g = -f(x, u);
    for (int n = 1; n <= M; ++n) out(n - 1) += (M_PI / (P + 1)) * amp * std::sin(n * x) * g;
  }
  return out;
}

// 1D torus basis value in the eigen-sorted order 0, c1, s1, c2, s2, ...
double torus1d_basis(int idx, double x) {
  if (idx == 0) return 1.0 / std::sqrt(2.0 * M_PI);
  int m = (idx + 1) / 2;
  if (idx % 2 == 1) return std::cos(m * x) / std::sqrt(M_PI);
  return std::sin(m * x) / std::sqrt(M_PI);
}

double torus1d_eval(const Vec& c, double x) {
  double v = 0.0;
  for (int i = 0; i < c.size(); ++i) v += c(i) * torus1d_basis(i, x);
  return v;
}

// uniform periodic quadrature, spectrally accurate for smooth integrands
double torus_mean(const std::function<double(double)>& g, int P = 4096) {
  double acc = 0.0;
  for (int j = 0; j < P; ++j) acc += g(2.0 * M_PI * j / P);
  return acc / P;
}

Vec random_coeffs(int n, double scale, std::mt19937_64& rng) {
  Vec v = gaussian_vector(n, rng);
  return v * (scale / v.norm());
}

}  // namespace

// ---------------------------------------------------------------------------

TEST_CASE("interval spectrum") {
  Spectrum sp = spectrum_interval(4, 1.0, 0.0);
  REQUIRE(sp.size() == 4);
  CHECK(sp.values == std::vector<double>{1, 4, 9, 16});
  sp.validate();

  Spectrum big = spectrum_interval(10, 1.0, 0.0);
  for (int N = 1; N < 10; ++N)
    CHECK(big.lambda(N + 1) - big.lambda(N) == Catch::Approx(2.0 * N + 1.0));

  Spectrum shifted = spectrum_interval(10, 1.0, 5.0);
  for (int n = 1; n <= 10; ++n) CHECK(shifted.lambda(n) == big.lambda(n) + 5.0);

  CHECK_THROWS_AS(spectrum_interval(1, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(spectrum_interval(4, 0.0, 0.0), std::invalid_argument);
}

TEST_CASE("square torus spectrum: representable integers with multiplicity") {
  Spectrum sp = spectrum_torus2d(50.0);
  sp.validate();
  std::vector<double> distinct;
  for (double v : sp.values)
    if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
  std::vector<double> expect{1, 2, 4, 5, 8, 9, 10, 13};
  REQUIRE(distinct.size() >= expect.size());
  for (size_t i = 0; i < expect.size(); ++i) CHECK(distinct[i] == expect[i]);

  for (double v : sp.values) CHECK(v != 3.0);
  // gap of length 3: 6 and 7 are absent between 5 and 8
  auto it = std::find(distinct.begin(), distinct.end(), 5.0);
  REQUIRE(it != distinct.end());
  CHECK(*(it + 1) == 8.0);

  CHECK(std::count(sp.values.begin(), sp.values.end(), 1.0) == 4);

  // labels are actual lattice points
  REQUIRE(sp.labels.size() == sp.values.size());
  for (int n = 1; n <= sp.size(); ++n) {
    int a = 0, b = 0;
    REQUIRE(std::sscanf(sp.labels[n - 1].c_str(), "(%d,%d)", &a, &b) == 2);
    CHECK(double(a) * a + double(b) * b == sp.lambda(n));
  }
}

TEST_CASE("square torus membership matches the factorization criterion") {
  Spectrum sp = spectrum_torus2d(2000.0, false);
  std::set<long> present;
  for (double v : sp.values) present.insert(static_cast<long>(v));
  for (long n = 1; n <= 2000; ++n) CHECK(present.count(n) == (two_square_rep(n) ? 1u : 0u));
}

TEST_CASE("sphere spectrum levels and multiplicities") {
  Spectrum sp = spectrum_sphere2(3);
  sp.validate();
  REQUIRE(sp.size() == 3 * 5);  // n_max (n_max + 2)
  CHECK(std::count(sp.values.begin(), sp.values.end(), 2.0) == 3);
  CHECK(std::count(sp.values.begin(), sp.values.end(), 6.0) == 5);
  CHECK(std::count(sp.values.begin(), sp.values.end(), 12.0) == 7);

  Spectrum big = spectrum_sphere2(10);
  CHECK(big.size() == 10 * 12);
  std::vector<double> distinct;
  for (double v : big.values)
    if (distinct.empty() || distinct.back() != v) distinct.push_back(v);
  for (size_t n = 1; n < distinct.size(); ++n)
    CHECK(distinct[n] - distinct[n - 1] == Catch::Approx(2.0 * (n + 1)));
}

TEST_CASE("cubic torus spectrum: three-squares structure") {
  Spectrum sp = spectrum_torus3d(2000.0);
  sp.validate();
  std::set<long> present;
  for (double v : sp.values) present.insert(static_cast<long>(v));
  for (long n = 1; n <= 6; ++n) CHECK(present.count(n) == 1u);
  CHECK(present.count(7) == 0u);
  for (long n = 1; n <= 2000; ++n) CHECK(present.count(n) == (three_square_rep(n) ? 1u : 0u));

  // no gap between consecutive representable integers exceeds 3
  long prev = 0;
  long worst = 0;
  for (long n : present) {
    if (prev) worst = std::max(worst, n - prev);
    prev = n;
  }
  CHECK(worst <= 3);

  Spectrum lab = spectrum_torus3d(30.0, true);
  REQUIRE(lab.labels.size() == lab.values.size());
  for (int n = 1; n <= lab.size(); ++n) {
    int a, b, c;
    REQUIRE(std::sscanf(lab.labels[n - 1].c_str(), "(%d,%d,%d)", &a, &b, &c) == 3);
    CHECK(double(a) * a + double(b) * b + double(c) * c == lab.lambda(n));
  }
}

TEST_CASE("fourth-order spectra") {
  Spectrum ks = spectrum_ks(4, 0.0);
  CHECK(ks.values == std::vector<double>{2, 17, 82, 257});
  Spectrum ks_shift = spectrum_ks(5, -4.0);
  ks_shift.validate();  // sorted even when the parabola dips

  Spectrum sh = spectrum_sh(5);
  for (int n = 1; n <= 5; ++n)
    CHECK(sh.lambda(n) == Catch::Approx(std::pow(double(n), 4.0 / 3.0)));

  Spectrum ch = spectrum_ch(spectrum_interval(4, 1.0, 0.0));
  CHECK(ch.values == std::vector<double>{1, 16, 81, 256});

  std::string csv = spectrum_csv(ks);
  CHECK(csv.rfind("index,eigenvalue,label\n", 0) == 0);
  CHECK(csv.find("\n1,2,1\n") != std::string::npos);
}

TEST_CASE("collocation grid round trips") {
  std::mt19937_64 rng(7);

  CollocationGrid g1 = CollocationGrid::dirichlet_1d(16);
  CHECK(g1.n_points() == 32);
  CHECK(g1.pts(0, 0) == Catch::Approx(M_PI / 33.0));
  CHECK(g1.measure == Catch::Approx(M_PI));
  Vec c = gaussian_vector(16, rng);
  CHECK((g1.to_coeffs(g1.to_grid(c)) - c).norm() < 1e-10 * c.norm());
  Mat id1 = g1.axis_anal * g1.axis_synth;
  CHECK((id1 - Mat::Identity(16, 16)).norm() < 1e-12);

  for (int dim = 1; dim <= 3; ++dim) {
    int B = dim == 3 ? 2 : 3;
    CollocationGrid g = CollocationGrid::torus(dim, B);
    int K = 2 * B + 1;
    int n_modes = 1;
    for (int d = 0; d < dim; ++d) n_modes *= K;
    REQUIRE(g.n_modes() == n_modes);
    CHECK(g.n_points() == n_modes * (1 << dim));
    Vec cc = gaussian_vector(n_modes, rng);
    CHECK((g.to_coeffs(g.to_grid(cc)) - cc).norm() < 1e-10 * cc.norm());
    Mat idax = g.axis_anal * g.axis_synth;
    CHECK((idax - Mat::Identity(K, K)).norm() < 1e-12);
    // eigen-sorted mode order
    for (size_t i = 0; i + 1 < g.laplace_eigs.size(); ++i)
      CHECK(g.laplace_eigs[i] <= g.laplace_eigs[i + 1]);
    CHECK(g.laplace_eigs[0] == 0.0);
    CHECK(g.measure == Catch::Approx(std::pow(2.0 * M_PI, dim)));
  }
}

TEST_CASE("pseudospectral nonlinearity: trivial and linear cases") {
  auto grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(8));
  std::mt19937_64 rng(3);

  ScalarField zero;
  zero.f = [](const Vec&, double) { return 0.0; };
  zero.f_u = [](const Vec&, double) { return 0.0; };
  zero.sup_f = 0.0;
  zero.sup_fu = 0.0;
  NonlinearityModel Fz = rde_nonlinearity(zero, grid, std::numeric_limits<double>::infinity());
  CHECK(Fz.lipschitz_L == 0.0);
  CHECK(Fz.bound_C == 0.0);
  Vec u = random_coeffs(8, 1.0, rng);
  CHECK(Fz.evaluate(u).norm() == 0.0);

  const double cval = 0.7;
  ScalarField lin;
  lin.f = [cval](const Vec&, double s) { return cval * s; };
  lin.f_u = [cval](const Vec&, double) { return cval; };
  NonlinearityModel Fl = rde_nonlinearity(lin, grid, 5.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec a = random_coeffs(8, 0.8, rng), b = random_coeffs(8, 0.8, rng);
    double ratio = (Fl.evaluate(a) - Fl.evaluate(b)).norm() / (a - b).norm();
    CHECK(ratio == Catch::Approx(cval).margin(1e-6));
  }
  CHECK(Fl.lipschitz_L >= cval);

  Vec wrong(5);
  CHECK_THROWS_AS(Fl.evaluate(wrong), std::invalid_argument);
}

TEST_CASE("pseudospectral cubic matches the dense-grid oracle") {
  auto grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(8));
  ScalarField cubic;
  cubic.f = [](const Vec&, double s) { return s * s * s - s; };
  cubic.f_u = [](const Vec&, double s) { return 3.0 * s * s - 1.0; };
  NonlinearityModel F = rde_nonlinearity(cubic, grid, 10.0);

  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 5; ++trial) {
    Vec u = random_coeffs(8, 1.0, rng);
    Vec oracle = dense_sine_transform(
        u, [](double, double s) { return s * s * s - s; }, 400);
    CHECK((F.evaluate(u) - oracle).norm() < 1e-8);
  }
}

TEST_CASE("cutoff makes the model globally bounded and Lipschitz") {
  auto grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(6));
  ScalarField cubic;
  cubic.f = [](const Vec&, double s) { return s * s * s; };
  cubic.f_u = [](const Vec&, double s) { return 3.0 * s * s; };
  const double R = 0.5;
  NonlinearityModel F = rde_nonlinearity(cubic, grid, R);

  std::mt19937_64 rng(21);
  Vec far = random_coeffs(6, 3.0, rng);
  CHECK(F.evaluate(far).norm() == 0.0);

  for (int trial = 0; trial < 40; ++trial) {
    Vec a = random_coeffs(6, 3.0 * R * (trial + 1) / 40.0, rng);
    CHECK(F.evaluate(a).norm() <= F.bound_C * (1.0 + 1e-9));
    Vec b = a + random_coeffs(6, 0.01, rng);
    double ratio = (F.evaluate(a) - F.evaluate(b)).norm() / (a - b).norm();
    CHECK(ratio <= F.lipschitz_L * (1.0 + 1e-6));
  }
}

TEST_CASE("derivative action is the derivative of the cut-off field") {
  auto grid = std::make_shared<CollocationGrid>(CollocationGrid::dirichlet_1d(6));
  ScalarField cubic;
  cubic.f = [](const Vec&, double s) { return s * s * s - s; };
  cubic.f_u = [](const Vec&, double s) { return 3.0 * s * s - 1.0; };
  const double R = 0.8;
  NonlinearityModel F = rde_nonlinearity(cubic, grid, R);

  std::mt19937_64 rng(17);
  for (double scale : {0.4, 1.2}) {  // inside the ball and inside the cutoff band
    Vec u = random_coeffs(6, scale, rng);
    Vec v = random_coeffs(6, 1.0, rng);
    const double h = 1e-6;
    Vec fd = (F.evaluate(u + h * v) - F.evaluate(u - h * v)) / (2.0 * h);
    Vec an = F.derivative_action(u, v);
    CHECK((fd - an).norm() < 1e-5 * (1.0 + an.norm()));
  }
}

TEST_CASE("spatial average multiplier") {
  CollocationGrid g1 = CollocationGrid::torus(1, 8);
  std::mt19937_64 rng(31);
  Vec u = random_coeffs(g1.n_modes(), 0.7, rng);

  auto cfun = [](const Vec&, double) { return 2.5; };
  CHECK(spatial_average_multiplier(u, cfun, g1) == Catch::Approx(2.5).margin(1e-13));

  CollocationGrid g2 = CollocationGrid::torus(2, 2);
  Vec zero = Vec::Zero(g2.n_modes());
  auto cosx = [](const Vec& x, double) { return std::cos(x(0)); };
  CHECK(spatial_average_multiplier(zero, cosx, g2) == Catch::Approx(0.0).margin(1e-13));

  auto fancy = [](const Vec& x, double s) { return std::sin(s) + 0.3 * std::cos(x(0)); };
  double got = spatial_average_multiplier(u, fancy, g1);
  double oracle = torus_mean([&](double x) {
    return std::sin(torus1d_eval(u, x)) + 0.3 * std::cos(x);
  });
  CHECK(got == Catch::Approx(oracle).margin(1e-8));
}

TEST_CASE("spatial averaging defect: exact zeros") {
  const int B = 8;
  CollocationGrid grid = CollocationGrid::torus(1, B);
  Spectrum sp;
  sp.source = "torus-box";
  for (double e : grid.laplace_eigs) sp.values.push_back(e + 1.0);
  sp.validate();

  std::mt19937_64 rng(13);
  Vec u = random_coeffs(sp.size(), 0.5, rng);
  Vec v = random_coeffs(sp.size(), 1.0, rng);
  int N = 9;  // cut inside the m=2..3 region
  double k = 0.5;

  auto lin = [](const Vec&, double) { return 1.7; };
  CHECK(spatial_averaging_defect(sp, u, v, N, k, lin, grid) < 1e-12);

  // v supported entirely outside the shell
  auto split = shell_projector(sp, N, k);
  Vec outside = v;
  for (int n : split.shell) outside(n - 1) = 0.0;
  auto any = [](const Vec&, double s) { return std::cos(s); };
  CHECK(spatial_averaging_defect(sp, u, outside, N, k, any, grid) == 0.0);
}

TEST_CASE("spatial averaging defect matches the convolution oracle") {
  const int B = 6;
  CollocationGrid grid = CollocationGrid::torus(1, B);
  const int K = grid.n_modes();
  Spectrum sp;
  sp.source = "torus-box";
  for (double e : grid.laplace_eigs) sp.values.push_back(e + 1.0);

  std::mt19937_64 rng(41);
  Vec u = random_coeffs(K, 0.8, rng);
  Vec v = random_coeffs(K, 1.0, rng);
  auto fp = [](const Vec&, double s) { return s; };  // multiplier g = u(x), band-limited

  int N = 7;
  double k = 0.5;
  auto split = shell_projector(sp, N, k);
  Vec w = Vec::Zero(K);
  for (int n : split.shell) w(n - 1) = v(n - 1);

  // multiplier matrix by fine quadrature against the explicit basis
  const int P = 1024;
  Mat T = Mat::Zero(K, K);
  double a_mean = 0.0;
  for (int j = 0; j < P; ++j) {
    double x = 2.0 * M_PI * j / P;
    double g = torus1d_eval(u, x);
    a_mean += g / P;
    for (int r = 0; r < K; ++r)
      for (int s = 0; s < K; ++s)
        T(r, s) += (2.0 * M_PI / P) * torus1d_basis(r, x) * g * torus1d_basis(s, x);
  }
  Vec Tw = T * w;
  double acc = 0.0;
  for (int n : split.shell) {
    double d = Tw(n - 1) - a_mean * w(n - 1);
    acc += d * d;
  }
  double oracle = std::sqrt(acc);

  double got = spatial_averaging_defect(sp, u, v, N, k, fp, grid);
  CHECK(got == Catch::Approx(oracle).margin(1e-8));
}

// The shell coupling is controlled by the smallest pairwise lattice distance
// inside the shell. Shells around |k|^2 = 1, 6, 11 on the cubic torus have
// minimal squared distances 1, 2, 3 (checked by the mini-search below), so
// the defect for a smooth multiplier must shrink along that family.
TEST_CASE("spatial averaging defect decays on shells with growing separation") {
  const int B = 4;
  CollocationGrid grid = CollocationGrid::torus(3, B);
  const int K = grid.n_modes();
  Spectrum sp;
  sp.source = "torus-box";
  for (double e : grid.laplace_eigs) sp.values.push_back(e + 1.0);

  // independent mini-search for the minimal pairwise distance in the shell
  // {q, next(q)} over the lattice, q + next below the faithful box range
  auto min_shell_dist2 = [](int q) {
    auto reps = [](int target) {
      std::vector<std::array<int, 3>> out;
      for (int a = -5; a <= 5; ++a)
        for (int b = -5; b <= 5; ++b)
          for (int c = -5; c <= 5; ++c)
            if (a * a + b * b + c * c == target) out.push_back({a, b, c});
      return out;
    };
    int next = q + 1;
    while (reps(next).empty()) ++next;
    auto pts = reps(q);
    auto nx = reps(next);
    pts.insert(pts.end(), nx.begin(), nx.end());
    int best = 1 << 20;
    for (size_t i = 0; i < pts.size(); ++i)
      for (size_t j = i + 1; j < pts.size(); ++j) {
        int d = 0;
        for (int d3 = 0; d3 < 3; ++d3) {
          int t = pts[i][d3] - pts[j][d3];
          d += t * t;
        }
        best = std::min(best, d);
      }
    return best;
  };
  REQUIRE(min_shell_dist2(1) == 1);
  REQUIRE(min_shell_dist2(6) == 2);
  REQUIRE(min_shell_dist2(11) == 3);

  // smooth u with frequency support in |m| <= 1 per axis
  Vec u = Vec::Zero(K);
  const double phys = 2.0 * M_PI * std::sqrt(M_PI);  // one coefficient unit of cos(x_i)
  for (int i = 0; i < K; ++i) {
    if (grid.mode_labels[i] == "c1,0,0") u(i) = 0.40 * phys;
    if (grid.mode_labels[i] == "0,c1,0") u(i) = 0.34 * phys;
    if (grid.mode_labels[i] == "0,0,c1") u(i) = 0.29 * phys;
  }
  Vec v = Vec::Ones(K);
  auto fp = [](const Vec&, double s) { return std::cos(s + 0.5); };

  auto cut_at = [&](double lam) {
    int N = 0;
    while (N < sp.size() && sp.lambda(N + 1) <= lam) ++N;
    return N;
  };

  double prev = std::numeric_limits<double>::infinity();
  for (int q : {1, 6, 11}) {
    int N = cut_at(q + 1.0);
    double defect = spatial_averaging_defect(sp, u, v, N, 0.5, fp, grid);
    CHECK(defect < prev);
    prev = defect;
  }
}

TEST_CASE("ready-made models expose honest declared constants") {
  std::mt19937_64 rng(61);

  Model lc = model_linear_coupling(spectrum_interval(4, 1.0, 0.0), 1, 2, 0.3);
  Vec e1 = Vec::Zero(4);
  e1(0) = 1.0;
  Vec F = lc.F.evaluate(e1);
  CHECK(F(1) == Catch::Approx(0.3));
  CHECK(F.norm() == Catch::Approx(0.3));
  CHECK(lc.F.lipschitz_L == 0.3);

  Model br = model_block_rotation(spectrum_interval(4, 1.0, 0.0), {{1, 2}, {3, 4}}, 2.0);
  for (int trial = 0; trial < 5; ++trial) {
    Vec x = gaussian_vector(4, rng);
    CHECK(br.F.evaluate(x).norm() == Catch::Approx(2.0 * x.norm()));
  }

  Model hopf = model_hopf();
  Vec circ = Vec::Zero(8);
  circ(0) = 1.0;  // on the r = sqrt(mu/nu) = 1 circle
  Vec rhs = hopf.F.evaluate(circ);
  // radial balance: u1' = -lambda1 u1 + F1 = 0 on the circle
  CHECK(rhs(0) - hopf.spectrum.lambda(1) * circ(0) == Catch::Approx(0.0).margin(1e-12));

  Model sc = model_saturated_cubic();
  CHECK(sc.F.lipschitz_L == Catch::Approx(0.75 * 0.9 * 1.44));
  CHECK(sc.F.bound_C == Catch::Approx(std::sqrt(M_PI) * 0.9 * std::pow(1.2, 3)));
  Vec w = random_coeffs(32, 0.7, rng);
  CHECK((sc.F.evaluate(-w) + sc.F.evaluate(w)).norm() < 1e-13);
  CHECK(sc.F.evaluate(Vec::Zero(32)).norm() == 0.0);
  for (int trial = 0; trial < 10; ++trial) {
    Vec a = random_coeffs(32, 2.0, rng), b = random_coeffs(32, 1.0, rng);
    double ratio = (sc.F.evaluate(a) - sc.F.evaluate(b)).norm() / (a - b).norm();
    CHECK(ratio <= sc.F.lipschitz_L * (1.0 + 1e-9));
  }
}
