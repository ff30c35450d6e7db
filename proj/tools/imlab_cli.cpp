// Command line front end. One experiment per process. Every run emits a
// versioned JSON report (stdout, or --out) and the tabular kinds also emit a
// CSV table (--csv). Exit codes: 0 all checks passed, 1 a check failed,
// 2 invalid config, 3 numerical failure.
//
// Config precedence, lowest to highest: built-in defaults, --config file
// (flat key=value lines), IMLAB_<KEY> environment variables, command line
// flags. Unknown keys are rejected everywhere.

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <list>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "imlab/counterexamples.hpp"
#include "imlab/dynamics.hpp"
#include "imlab/gap.hpp"
#include "imlab/manifold.hpp"
#include "imlab/models.hpp"
#include "imlab/numerics.hpp"
#include "imlab/reduction.hpp"
#include "imlab/spectral.hpp"

namespace {

using imlab::Vec;
using nlohmann::json;
using KV = std::map<std::string, std::string>;

constexpr const char* kSchemaVersion = "1";

struct Check {
  std::string name;
  bool pass = false;
  double value = 0.0, bound = 0.0, slack = 0.0;
  std::string detail;
};

Check check_le(std::string name, double value, double bound, std::string detail = "") {
  return {std::move(name), value <= bound, value, bound, bound - value, std::move(detail)};
}

Check check_ge(std::string name, double value, double bound, std::string detail = "") {
  return {std::move(name), value >= bound, value, bound, value - bound, std::move(detail)};
}

Check check_that(std::string name, bool ok, std::string detail = "") {
  return {std::move(name), ok, ok ? 1.0 : 0.0, 1.0, ok ? 0.0 : -1.0, std::move(detail)};
}

struct RunState {
  KV cfg;
  bool validate_only = false;
  std::uint64_t seed = 0;
  std::vector<Check> checks;
  json extra = json::object();
  std::string csv;
};

// ---- typed config access -------------------------------------------------

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& key, const std::string& why) {
  throw std::invalid_argument("--" + key + ": " + why);
}

double num(const KV& cfg, const std::string& key) {
  const std::string& s = cfg.at(key);
  size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (...) {
    bad_key(key, "not a number: '" + s + "'");
  }
  if (pos != s.size()) bad_key(key, "not a number: '" + s + "'");
  if (!std::isfinite(v)) bad_key(key, "must be finite");
  return v;
}

double num_in(const KV& cfg, const std::string& key, double lo, double hi) {
  double v = num(cfg, key);
  if (v < lo || v > hi) {
    std::ostringstream os;
    os << "must lie in [" << lo << ", " << hi << "], got " << v;
    bad_key(key, os.str());
  }
  return v;
}

double num_pos(const KV& cfg, const std::string& key) {
  double v = num(cfg, key);
  if (!(v > 0.0)) bad_key(key, "must be positive");
  return v;
}

long int_in(const KV& cfg, const std::string& key, long lo, long hi) {
  double v = num(cfg, key);
  if (v != std::floor(v)) bad_key(key, "must be an integer");
  if (v < double(lo) || v > double(hi))
    bad_key(key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
  return static_cast<long>(v);
}

std::uint64_t seed_of(const KV& cfg) {
  const std::string& s = cfg.at("seed");
  try {
    size_t pos = 0;
    std::uint64_t v = std::stoull(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    bad_key("seed", "must be a nonnegative integer, got '" + s + "'");
  }
}

std::string choice(const KV& cfg, const std::string& key,
                   const std::vector<std::string>& allowed) {
  const std::string& s = cfg.at(key);
  for (const auto& a : allowed)
    if (s == a) return s;
  std::string opts;
  for (const auto& a : allowed) opts += (opts.empty() ? "" : ", ") + a;
  bad_key(key, "unknown value '" + s + "' (one of: " + opts + ")");
}

json jnum(double v) {
  if (std::isfinite(v)) return v;
  if (std::isnan(v)) return "nan";
  return v > 0 ? "inf" : "-inf";
}

// ---- shared builders -------------------------------------------------------

void validate_spectrum_keys(const KV& cfg) {
  std::string name =
      choice(cfg, "spectrum", {"interval", "power", "torus2d", "torus3d", "sphere2"});
  if (name == "interval" || name == "power") int_in(cfg, "modes", 2, 4096);
  if (name == "power") num_in(cfg, "exponent", 0.1, 10.0);
  if (name == "torus2d" || name == "torus3d") num_in(cfg, "lmax", 1.0, 2e9);
  if (name == "sphere2") int_in(cfg, "lmax", 2, 5000);
}

imlab::Spectrum spectrum_by_name(const KV& cfg) {
  const std::string& name = cfg.at("spectrum");
  if (name == "interval") return imlab::spectrum_interval(int(int_in(cfg, "modes", 2, 4096)), 1.0, 0.0);
  if (name == "power")
    return imlab::spectrum_power(int(int_in(cfg, "modes", 2, 4096)), num(cfg, "exponent"));
  if (name == "torus2d") return imlab::spectrum_torus2d(num(cfg, "lmax"));
  if (name == "torus3d") return imlab::spectrum_torus3d(num(cfg, "lmax"));
  return imlab::spectrum_sphere2(int(int_in(cfg, "lmax", 2, 5000)));
}

imlab::PointCloud sampled_cloud(const std::string& name, long points, std::uint64_t seed) {
  imlab::PointCloud c;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  if (name == "segment") {
    Vec dir = Vec::Zero(3);
    dir[0] = 0.6;
    dir[1] = 0.8;
    for (long i = 0; i < points; ++i) c.points.push_back(uni(rng) * dir);
  } else if (name == "square") {
    for (long i = 0; i < points; ++i) {
      Vec p(2);
      p << uni(rng), uni(rng);
      c.points.push_back(p);
    }
  } else {  // limit-cycle
    imlab::Model m = imlab::model_hopf();
    int keep = int(std::max(1L, points / 10));
    c.points = imlab::attractor_sample(m, 10, 12.0, keep, seed);
  }
  return c;
}

// ---- experiments -----------------------------------------------------------

void run_gap_find(RunState& rs) {
  double L = num_pos(rs.cfg, "L");
  double beta = num_in(rs.cfg, "beta", -1.999, 0.0);
  long count = int_in(rs.cfg, "count", 1, 1000000);
  validate_spectrum_keys(rs.cfg);
  if (rs.validate_only) return;

  imlab::Spectrum sp = spectrum_by_name(rs.cfg);
  std::vector<imlab::GapReport> gaps = imlab::find_gaps(sp, L, beta, int(count));

  std::ostringstream csv;
  csv << imlab::gap_report_csv_header() << "\n";
  json arr = json::array();
  for (const auto& g : gaps) {
    csv << imlab::gap_report_csv_row(g) << "\n";
    arr.push_back({{"N", g.N},
                   {"lambda_lo", g.lambda_lo},
                   {"lambda_hi", g.lambda_hi},
                   {"gap", g.gap},
                   {"theta", g.theta},
                   {"ratio", jnum(g.ratio)}});
  }
  rs.csv = csv.str();
  rs.extra["spectrum_size"] = sp.size();
  rs.extra["gaps"] = arr;
  rs.checks.push_back(
      check_ge("qualifying-cuts", double(gaps.size()), 1.0, "cuts clearing the gap threshold"));
}

void run_shell_search(RunState& rs) {
  double k = num_pos(rs.cfg, "k");
  double rho = num_pos(rs.cfg, "rho");
  long nmax = int_in(rs.cfg, "nmax", 1, 1000000);
  if (rs.validate_only) return;

  std::vector<long> hits = imlab::shell_search(k, rho, nmax);
  std::ostringstream csv;
  csv << "N\n";
  for (long n : hits) csv << n << "\n";
  rs.csv = csv.str();
  rs.extra["shells"] = hits;
  rs.checks.push_back(
      check_ge("qualifying-shells", double(hits.size()), 1.0, "isolated spectral shells found"));
}

struct CubicSetup {
  imlab::Model model;
  int n = 0;
  imlab::GraphGridSpec spec;
  double tol = 0.0;
};

CubicSetup cubic_setup(const KV& cfg, long default_grid_cap) {
  long modes = int_in(cfg, "modes", 4, 512);
  long n = int_in(cfg, "n", 1, modes - 1);
  double gamma = num_pos(cfg, "gamma");
  double s0 = num_pos(cfg, "s0");
  double tol = num_pos(cfg, "tol");
  double box = num_in(cfg, "box", 1e-6, 10.0);
  long grid = int_in(cfg, "grid", 2, 201);
  double total = std::pow(double(grid), double(n));
  if (total > double(default_grid_cap))
    bad_key("grid", "grid^n exceeds the node budget " + std::to_string(default_grid_cap));

  CubicSetup s;
  s.model = imlab::model_saturated_cubic(int(modes), gamma, s0);
  s.n = int(n);
  s.spec.lo = Vec::Constant(n, -box);
  s.spec.hi = Vec::Constant(n, box);
  s.spec.counts.assign(size_t(n), int(grid));
  s.tol = tol;
  return s;
}

void run_manifold_build(RunState& rs) {
  std::string method = choice(rs.cfg, "method", {"lp", "bvp"});
  CubicSetup s = cubic_setup(rs.cfg, 100000);
  if (rs.validate_only) return;

  auto [gap_ok, gap] = imlab::gap_condition(s.model.spectrum, s.n, s.model.F.lipschitz_L);
  imlab::ManifoldGraph g = imlab::build_manifold(s.model, s.n, s.spec, method, s.tol);

  rs.csv = imlab::manifold_csv(g);
  rs.extra["nodes"] = g.node_count();
  rs.extra["lipschitz_est"] = g.lipschitz_est;
  rs.extra["gap"] = {{"N", gap.N},   {"gap", gap.gap},          {"theta", gap.theta},
                     {"L", gap.L},   {"satisfied", gap.satisfied}};
  rs.checks.push_back(check_that("gap-condition", gap_ok,
                                 "spectral gap exceeds twice the nonlinearity bound"));
  rs.checks.push_back(check_le("graph-lipschitz", g.lipschitz_est, 1.0,
                               "graph slope stays inside the unit cone"));
}

void run_track_verify(RunState& rs) {
  CubicSetup s = cubic_setup(rs.cfg, 100000);
  double tfit = num_in(rs.cfg, "tfit", 1e-3, 100.0);
  double kick = num_in(rs.cfg, "kick", 0.0, 10.0);
  long starts = int_in(rs.cfg, "starts", 1, 1000);
  double dt = num_in(rs.cfg, "dt", 1e-6, 0.1);
  std::uint64_t seed = seed_of(rs.cfg);
  if (rs.validate_only) return;

  imlab::ManifoldGraph g = imlab::build_manifold(s.model, s.n, s.spec, "lp", s.tol);
  int M = s.model.spectrum.size();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(-0.8, 0.8);
  double rate_min = std::numeric_limits<double>::infinity();
  double quad_max = 0.0, r2_min = 1.0;
  std::ostringstream csv;
  csv << "start,rate,quad,r2,dist0,max_dist,final_dist\n";
  csv.precision(12);
  json runs = json::array();
  for (long i = 0; i < starts; ++i) {
    Vec low(s.n);
    for (int d = 0; d < s.n; ++d)
      low[d] = s.spec.lo[d] + (0.1 + 0.8 * (0.5 + 0.5 * uni(rng))) * (s.spec.hi[d] - s.spec.lo[d]);
    Vec u0 = g.lift(low);
    Vec noise = imlab::gaussian_vector(M - s.n, rng);
    for (int d = s.n; d < M; ++d) u0[d] += kick * noise[d - s.n] / std::sqrt(double(M - s.n));
    imlab::TrackingReport rep = imlab::tracking_verify(s.model, g, u0, tfit, dt);
    if (!rep.fit_done) throw std::runtime_error("track-verify: decay fit failed on start " +
                                                std::to_string(i));
    rate_min = std::min(rate_min, rep.rate);
    quad_max = std::max(quad_max, std::abs(rep.quad));
    r2_min = std::min(r2_min, rep.r2);
    csv << i << "," << rep.rate << "," << rep.quad << "," << rep.r2 << "," << rep.dist0 << ","
        << rep.max_dist << "," << rep.final_dist << "\n";
    runs.push_back({{"rate", rep.rate}, {"quad", rep.quad}, {"r2", rep.r2}});
  }
  rs.csv = csv.str();
  rs.extra["runs"] = runs;
  double lam_n = s.model.spectrum.lambda(s.n);
  rs.checks.push_back(check_ge("tracking-rate", rate_min, 0.8 * lam_n,
                               "slowest observed decay vs 0.8 lambda_N"));
  rs.checks.push_back(check_le("fit-curvature", quad_max, 0.05, "log-distance fits stay linear"));
  rs.checks.push_back(check_ge("fit-r2", r2_min, 0.99));
}

void run_cone_check(RunState& rs) {
  std::string regime = choice(rs.cfg, "regime", {"gap", "violation"});
  long modes = int_in(rs.cfg, "modes", 4, 512);
  long n = int_in(rs.cfg, "n", 1, modes - 1);
  double gamma = num_pos(rs.cfg, "gamma");
  double s0 = num_pos(rs.cfg, "s0");
  double L = num_pos(rs.cfg, "L");
  long pairs = int_in(rs.cfg, "pairs", 1, 10000);
  double T = num_in(rs.cfg, "T", 1e-3, 100.0);
  double dt = num_in(rs.cfg, "dt", 1e-6, 0.1);
  double amp = num_in(rs.cfg, "amp", 1e-6, 10.0);
  std::uint64_t seed = seed_of(rs.cfg);
  if (rs.validate_only) return;

  imlab::Model m = regime == "gap"
                       ? imlab::model_saturated_cubic(int(modes), gamma, s0)
                       : imlab::model_block_rotation(
                             imlab::spectrum_interval(int(modes), 1.0, 0.0),
                             {{int(n), int(n) + 1}}, L);
  std::mt19937_64 rng(seed);
  std::vector<std::pair<Vec, Vec>> prs;
  if (regime == "violation") {
    // difference along the rotated block's diagonal enters the cone fastest
    Vec a = Vec::Zero(modes);
    a[n - 1] = amp;
    a[n] = amp;
    prs.emplace_back(a, Vec::Zero(modes));
  }
  while (long(prs.size()) < pairs)
    prs.emplace_back(amp * imlab::gaussian_vector(int(modes), rng),
                     amp * imlab::gaussian_vector(int(modes), rng));

  imlab::ConeReport rep = imlab::cone_check(m, prs, int(n), T, dt);
  std::ostringstream csv;
  csv << "violation_index,time\n";
  csv.precision(12);
  for (size_t i = 0; i < rep.violation_times.size(); ++i)
    csv << i << "," << rep.violation_times[i] << "\n";
  rs.csv = csv.str();
  rs.extra["theta"] = rep.theta;
  rs.extra["mu"] = rep.mu;
  rs.extra["checked"] = rep.checked;
  rs.extra["violations"] = rep.violations;
  rs.extra["worst_slack"] = jnum(rep.worst_slack);

  if (regime == "gap") {
    rs.checks.push_back(check_le("cone-violations", double(rep.violations), 0.0,
                                 "cone must be forward invariant under the gap"));
    rs.checks.push_back(check_ge("worst-slack", rep.worst_slack, -1e-9));
  } else {
    rs.checks.push_back(check_ge("cone-violations", double(rep.violations), 1.0,
                                 "block rotation defeats the cone when 2L exceeds the gap"));
  }
}

void run_dimension_estimate(RunState& rs) {
  std::string cloud_name = choice(rs.cfg, "cloud", {"segment", "square", "limit-cycle",
                                                    "orthogonal-segments", "cube-vertices"});
  long points = int_in(rs.cfg, "points", 10, 200000);
  long n = int_in(rs.cfg, "n", 1, 40);
  long scales = int_in(rs.cfg, "scales", 0, 16);
  if (scales != 0 && scales < 4) bad_key("scales", "need at least 4 scales (0 = auto)");
  double eps_lo = num_in(rs.cfg, "eps-lo", 0.0, 1e6);
  double eps_hi = num_in(rs.cfg, "eps-hi", 0.0, 1e6);
  if ((eps_lo == 0.0) != (eps_hi == 0.0)) bad_key("eps-hi", "set both eps-lo and eps-hi or neither");
  std::uint64_t seed = seed_of(rs.cfg);
  if (cloud_name == "cube-vertices" && n > 12) bad_key("n", "cube-vertices supports n <= 12");
  if (rs.validate_only) return;

  if (cloud_name == "orthogonal-segments") {
    std::vector<double> eps(size_t(n), 0.0);
    for (long k = 1; k <= n; ++k) eps[size_t(k - 1)] = std::exp(-0.1 * double(k) * double(k));
    imlab::PointCloud orth = imlab::orthogonal_segments_set(eps, 5);
    std::ostringstream csv;
    csv << "n,eps,doubling\n";
    csv.precision(12);
    double worst = std::numeric_limits<double>::infinity();
    json table = json::array();
    for (long k = 1; k <= n; ++k) {
      double d = imlab::doubling_factor(orth, eps[size_t(k - 1)]);
      worst = std::min(worst, d - double(k));
      csv << k << "," << eps[size_t(k - 1)] << "," << d << "\n";
      table.push_back({{"n", k}, {"eps", eps[size_t(k - 1)]}, {"doubling", d}});
    }
    rs.csv = csv.str();
    rs.extra["points"] = orth.size();
    rs.extra["doubling"] = table;
    rs.checks.push_back(check_ge("doubling-floor", worst, 0.0,
                                 "covering number at scale eps_n doubles at least n-fold"));
    return;
  }

  if (cloud_name == "cube-vertices") {
    std::vector<double> eps(size_t(n), 0.01);
    imlab::PointCloud cube = imlab::cube_vertices_set(eps, {int(n)});
    double edge = eps[size_t(n - 1)];
    // the far corner sits exactly on the diagonal, leave an ulp of slack
    double radius = edge * std::sqrt(double(n)) * (1.0 + 1e-12);
    long inside = 0;
    double min_pair = std::numeric_limits<double>::infinity();
    for (int i = 0; i < cube.size(); ++i) {
      if ((cube.points[i] - cube.points[0]).norm() <= radius) ++inside;
      for (int j = i + 1; j < cube.size(); ++j)
        min_pair = std::min(min_pair, (cube.points[i] - cube.points[j]).norm());
    }
    std::ostringstream csv;
    csv << "n,vertices,edge,ball_count\n";
    csv.precision(12);
    csv << n << "," << cube.size() << "," << edge << "," << inside << "\n";
    rs.csv = csv.str();
    rs.extra["points"] = cube.size();
    rs.extra["edge"] = edge;
    rs.extra["ball_count"] = inside;
    rs.checks.push_back(check_ge("ball-count", double(inside), std::pow(2.0, double(n)),
                                 "every vertex sits inside one edge-scale ball"));
    rs.checks.push_back(check_le("edge-scale", std::abs(min_pair / edge - 1.0), 1e-12,
                                 "closest vertex pair realizes the edge"));
    return;
  }

  imlab::PointCloud c = sampled_cloud(cloud_name, points, seed);
  double expected = cloud_name == "square" ? 2.0 : 1.0;
  double band = cloud_name == "segment" ? 0.15 : (cloud_name == "square" ? 0.2 : 0.3);
  double lo = eps_lo, hi = eps_hi;
  long k = scales;
  if (lo == 0.0) {
    if (cloud_name == "segment") lo = 0.01, hi = 0.4;
    if (cloud_name == "square") lo = 0.016, hi = 0.51;
    if (cloud_name == "limit-cycle") lo = 0.02, hi = 0.7;
  }
  if (k == 0) k = cloud_name == "limit-cycle" ? 7 : 8;

  imlab::BoxCountReport rep = imlab::box_counting_dim(c, imlab::log_spaced(lo, hi, int(k)));
  rs.csv = imlab::box_count_csv(rep);
  rs.extra["points"] = c.size();
  rs.extra["dim"] = rep.dim;
  rs.extra["r2"] = rep.r2;
  rs.extra["expected"] = expected;
  rs.checks.push_back(check_le("dim-error", std::abs(rep.dim - expected), band,
                               "box-counting estimate inside the expected band"));
}

void run_mane_project(RunState& rs) {
  std::string cloud_name = choice(rs.cfg, "cloud", {"segment", "square", "limit-cycle"});
  long points = int_in(rs.cfg, "points", 10, 200000);
  long n = int_in(rs.cfg, "n", 1, 64);
  long seeds = int_in(rs.cfg, "seeds", 1, 10000);
  double holder = num_in(rs.cfg, "holder", 0.0, 1.0);
  double frac = num_in(rs.cfg, "frac", 0.0, 1.0);
  std::uint64_t seed = seed_of(rs.cfg);
  if (rs.validate_only) return;

  imlab::PointCloud c = sampled_cloud(cloud_name, points, seed == 0 ? 99 : seed);
  int M = int(c.points.front().size());
  if (n > M) bad_key("n", "projection rank exceeds the ambient dimension " + std::to_string(M));

  imlab::ManeReport rep = imlab::mane_experiment(c, int(n), int(seeds), seed);
  long good = 0;
  std::ostringstream csv;
  csv << "seed,margin,holder_exponent,holder_constant,holder_r2\n";
  csv.precision(12);
  json runs = json::array();
  for (const auto& ex : rep.runs) {
    if (ex.margin > 0.0 && ex.holder_exponent >= holder) ++good;
    csv << ex.seed << "," << ex.margin << "," << ex.holder_exponent << "," << ex.holder_constant
        << "," << ex.holder_r2 << "\n";
    runs.push_back({{"seed", ex.seed},
                    {"margin", ex.margin},
                    {"holder_exponent", ex.holder_exponent},
                    {"holder_r2", ex.holder_r2}});
  }
  rs.csv = csv.str();
  rs.extra["points"] = c.size();
  rs.extra["injective_fraction"] = rep.injective_fraction;
  rs.extra["runs"] = runs;
  rs.checks.push_back(check_ge("injective-fraction", rep.injective_fraction, frac,
                               "random rank-" + std::to_string(n) + " projectors stay injective"));
  rs.checks.push_back(check_ge("holder-fraction", double(good) / double(seeds), frac,
                               "inverses Holder continuous above the exponent floor"));
}

void run_counterexample(RunState& rs) {
  std::string which = choice(rs.cfg, "which", {"floquet", "c1", "segments"});
  long modes = int_in(rs.cfg, "modes", 3, 512);
  double exponent = num_in(rs.cfg, "exponent", 0.1, 10.0);
  double T = num_in(rs.cfg, "T", 1e-3, 100.0);
  double dt = num_in(rs.cfg, "dt", 0.0, 1.0);
  double amp = num_in(rs.cfg, "amp", 1e-6, 100.0);
  double L = num_pos(rs.cfg, "L");
  long depth = int_in(rs.cfg, "depth", 3, 100);
  long n = int_in(rs.cfg, "n", 1, 40);
  long pts = int_in(rs.cfg, "pts", 2, 50);
  double tol = num_pos(rs.cfg, "tol");
  if (which == "floquet") {
    if (dt == 0.0) dt = T / 4000.0;
    if (dt > T / 1000.0) bad_key("dt", "needs dt <= T/1000 for the period map");
    if (2 * depth - 1 > modes) bad_key("depth", "decay table needs 2*depth-1 <= modes");
  }
  if (rs.validate_only) return;

  if (which == "c1") {
    imlab::Spectrum sp = imlab::spectrum_power(int(modes), exponent);
    imlab::C1Spectra cs = imlab::c1_obstruction_spectra(sp, L);
    std::ostringstream csv;
    csv << "side,lo,hi,alpha,omega\n";
    csv.precision(12);
    json minus = json::array(), plus = json::array();
    for (const auto& b : cs.minus_blocks) {
      csv << "minus," << b.lo << "," << b.hi << "," << b.alpha << "," << b.omega << "\n";
      minus.push_back({{"lo", b.lo}, {"hi", b.hi}, {"alpha", b.alpha}, {"omega", b.omega}});
    }
    for (const auto& b : cs.plus_blocks) {
      csv << "plus," << b.lo << "," << b.hi << "," << b.alpha << "," << b.omega << "\n";
      plus.push_back({{"lo", b.lo}, {"hi", b.hi}, {"alpha", b.alpha}, {"omega", b.omega}});
    }
    rs.csv = csv.str();
    rs.extra["blocks"] = {{"minus", minus}, {"plus", plus}};
    rs.extra["unstable"] = cs.unstable;
    rs.checks.push_back(check_le("minus-real-count", double(cs.real_count_minus), 0.0,
                                 "linearization at the sink has no real eigenvalues"));
    rs.checks.push_back(check_that("plus-real-count", cs.real_count_plus == 1,
                                   "linearization at the source keeps one real direction"));
    rs.checks.push_back(check_that("parity-split", cs.real_count_minus != cs.real_count_plus,
                                   "real spectra of the two equilibria cannot be matched"));
    return;
  }

  if (which == "floquet") {
    imlab::Spectrum sp = imlab::spectrum_power(int(modes), exponent);
    imlab::PeriodicOperator op = imlab::build_periodic_operator(sp, T, amp);
    imlab::PoincareReport rep = imlab::poincare_map(op, dt);
    imlab::SuperexpReport dec = imlab::superexp_decay(rep, int(depth));

    rs.extra["operator"] = {{"T", op.T},       {"T0", op.T0},  {"amp", op.amp},
                            {"eps", op.eps},   {"modes", op.modes()},
                            {"norm_bound", op.norm_bound}};
    json entries = json::array();
    for (const auto& e : rep.entries)
      entries.push_back({{"source", e.source},
                         {"target", e.target},
                         {"mu_log", e.mu_log},
                         {"rel_err", e.rel_err},
                         {"off_target", e.off_target}});
    rs.extra["poincare"] = {{"dt", rep.dt},
                            {"max_rel_err", rep.max_rel_err},
                            {"max_off_target", rep.max_off_target},
                            {"entries", entries}};
    std::ostringstream csv;
    csv << "N,log_map,log_product,abs_diff\n";
    csv.precision(12);
    json decay = json::array();
    for (size_t i = 0; i < dec.log_map.size(); ++i) {
      double diff = std::abs(dec.log_map[i] - dec.log_product[i]);
      csv << (i + 1) << "," << dec.log_map[i] << "," << dec.log_product[i] << "," << diff << "\n";
      decay.push_back({{"N", i + 1}, {"log_map", dec.log_map[i]}, {"log_product", dec.log_product[i]}});
    }
    rs.csv = csv.str();
    rs.extra["decay"] = {{"table", decay},
                         {"fit", {{"c0", dec.fit.c0}, {"c1", dec.fit.c1}, {"c2", dec.fit.c2},
                                  {"r2", dec.fit.r2}}},
                         {"bracket", {dec.bracket_lo, dec.bracket_hi}}};

    rs.checks.push_back(check_le("multiplier-residual", rep.max_rel_err, tol,
                                 "weighted-shift multipliers match the closed form"));
    rs.checks.push_back(check_le("off-target-mass", rep.max_off_target, 1e-10,
                                 "period map columns stay one-hot"));
    rs.checks.push_back(check_le("decay-match", dec.max_abs_diff, tol,
                                 "iterated norms equal the multiplier chain"));
    rs.checks.push_back(check_le("decay-curvature", dec.fit.c2, -1e-3,
                                 "log-norms bend down quadratically"));
    rs.checks.push_back(check_ge("decay-fit-r2", dec.fit.r2, 0.99));
    rs.checks.push_back(check_that("decay-bracket", dec.coeff_in_bracket,
                                   "curvature lies between the envelope rates"));
    return;
  }

  // segments
  imlab::SegmentsParams prm;
  for (long k = 1; k <= n; ++k) {
    double kk = double(k);
    prm.E.push_back(1.0 / (kk * kk));
    double l = std::log(kk);
    prm.B.push_back(std::exp(-l * l));
    prm.lam.push_back(kk * kk);
  }
  prm.pts_per_seg = int(pts);
  imlab::SegmentsAttractor att = imlab::segments_attractor(prm);

  std::ostringstream csv;
  csv << "n,eps,doubling\n";
  csv.precision(12);
  double worst = std::numeric_limits<double>::infinity();
  json table = json::array();
  for (long k = 1; k <= n; ++k) {
    double d = imlab::doubling_factor(att.cloud, att.eps[size_t(k - 1)]);
    worst = std::min(worst, d - double(k));
    csv << k << "," << att.eps[size_t(k - 1)] << "," << d << "\n";
    table.push_back({{"n", k}, {"eps", att.eps[size_t(k - 1)]}, {"doubling", d}});
  }
  rs.csv = csv.str();
  rs.extra["points"] = att.cloud.size();
  rs.extra["sim_error"] = att.sim_error;
  rs.extra["doubling"] = table;
  rs.checks.push_back(check_le("flow-error", att.sim_error, tol,
                               "simulated connections match the closed-form relaxation"));
  rs.checks.push_back(check_ge("doubling-floor", worst, 0.0,
                               "covering number at scale eps_n doubles at least n-fold"));
}

// ---- catalog ---------------------------------------------------------------

struct Experiment {
  std::string name;
  std::string description;
  std::vector<std::pair<std::string, std::string>> defaults;
  void (*run)(RunState&) = nullptr;
};

std::vector<Experiment> build_catalog() {
  return {
      {"gap-find",
       "list spectral cuts whose gap clears the dichotomy threshold",
       {{"spectrum", "torus2d"}, {"lmax", "100000"}, {"modes", "64"}, {"exponent", "1"},
        {"L", "3"}, {"beta", "0"}, {"count", "100"}, {"seed", "0"}},
       run_gap_find},
      {"shell-search",
       "cubic-lattice shells free of close eigenvalue pairs",
       {{"k", "2"}, {"rho", "3"}, {"nmax", "2000"}, {"seed", "0"}},
       run_shell_search},
      {"manifold-build",
       "fixed-point construction of the invariant graph over a spectral cut",
       {{"modes", "8"}, {"n", "1"}, {"gamma", "0.9"}, {"s0", "1.2"}, {"method", "lp"},
        {"tol", "1e-8"}, {"grid", "9"}, {"box", "0.8"}, {"seed", "0"}},
       run_manifold_build},
      {"track-verify",
       "exponential relaxation of kicked starts onto the invariant graph",
       {{"modes", "8"}, {"n", "1"}, {"gamma", "0.9"}, {"s0", "1.2"}, {"grid", "41"},
        {"box", "0.8"}, {"tol", "1e-9"}, {"tfit", "1.5"}, {"kick", "0.05"}, {"starts", "20"},
        {"dt", "1e-3"}, {"seed", "7"}},
       run_track_verify},
      {"cone-check",
       "cone invariance along difference trajectories, or its rotational defeat",
       {{"regime", "gap"}, {"modes", "8"}, {"n", "1"}, {"gamma", "0.9"}, {"s0", "1.2"},
        {"L", "3"}, {"pairs", "100"}, {"T", "1"}, {"dt", "1e-3"}, {"amp", "0.4"},
        {"seed", "11"}},
       run_cone_check},
      {"dimension-estimate",
       "box-counting dimension or doubling factors of a synthetic cloud",
       {{"cloud", "limit-cycle"}, {"points", "10000"}, {"n", "12"}, {"scales", "0"},
        {"eps-lo", "0"}, {"eps-hi", "0"}, {"seed", "99"}},
       run_dimension_estimate},
      {"mane-project",
       "injectivity and Holder regularity of random finite-rank projections",
       {{"cloud", "limit-cycle"}, {"points", "1000"}, {"n", "3"}, {"seeds", "30"},
        {"holder", "0.8"}, {"frac", "0.95"}, {"seed", "4242"}},
       run_mane_project},
      {"counterexample-run",
       "sharpness constructions: c1 obstruction, Floquet shift, segment attractor",
       {{"which", "floquet"}, {"modes", "16"}, {"exponent", "1"}, {"T", "1"}, {"dt", "0"},
        {"amp", "1"}, {"L", "1"}, {"depth", "5"}, {"n", "12"}, {"pts", "6"}, {"tol", "1e-6"},
        {"seed", "0"}},
       run_counterexample},
  };
}

// ---- report plumbing -------------------------------------------------------

std::string iso_timestamp() {
  std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_atomic(const std::string& path, const std::string& text) {
  namespace fs = std::filesystem;
  fs::path target(path);
  fs::path tmp = target;
  tmp += ".tmp";
  {
    std::ofstream f(tmp);
    if (!f) throw std::runtime_error("cannot open for writing: " + tmp.string());
    f << text;
    if (!f.good()) throw std::runtime_error("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

void guard_overwrite(const std::string& path, bool force) {
  if (path.empty() || force) return;
  if (std::filesystem::exists(path))
    throw std::invalid_argument("output file exists: " + path + " (use --force to overwrite)");
}

json make_report(const std::string& name, const RunState& rs, double secs, bool& all_pass) {
  all_pass = true;
  json results = json::array();
  for (const auto& c : rs.checks) {
    all_pass = all_pass && c.pass;
    json j = {{"name", c.name},
              {"pass", c.pass},
              {"value", jnum(c.value)},
              {"bound", jnum(c.bound)},
              {"slack", jnum(c.slack)}};
    if (!c.detail.empty()) j["detail"] = c.detail;
    results.push_back(j);
  }
  json rep = {{"schema_version", kSchemaVersion},
              {"experiment", name},
              {"config", rs.cfg},
              {"seed", rs.seed},
              {"timestamp", iso_timestamp()},
              {"results", results},
              {"pass", all_pass},
              {"runtime_seconds", secs}};
  for (auto it = rs.extra.begin(); it != rs.extra.end(); ++it) rep[it.key()] = it.value();
  return rep;
}

json empty_report() {
  bool pass = false;
  RunState rs;
  return make_report("", rs, 0.0, pass);
}

std::string env_key(const std::string& key) {
  std::string out = "IMLAB_";
  for (char c : key) out += c == '-' ? '_' : char(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

void overlay_config_file(KV& cfg, const std::string& path, const std::string& exp_name) {
  std::ifstream f(path);
  if (!f) throw std::invalid_argument("config file not readable: " + path);
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": expected key=value");
    std::string key = trim(s.substr(0, eq));
    std::string val = trim(s.substr(eq + 1));
    if (!cfg.count(key))
      throw std::invalid_argument(path + ":" + std::to_string(lineno) + ": unknown config key '" +
                                  key + "' for " + exp_name);
    cfg[key] = val;
  }
}

int edit_distance(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = int(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = int(i);
    for (size_t j = 1; j <= b.size(); ++j)
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (a[i - 1] != b[j - 1])});
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string closest_name(const std::vector<Experiment>& catalog, const std::string& word) {
  std::string best;
  int best_d = std::numeric_limits<int>::max();
  auto consider = [&](const std::string& name) {
    int d = edit_distance(word, name);
    if (d < best_d) best_d = d, best = name;
  };
  for (const auto& e : catalog) consider(e.name);
  consider("list");
  if (best_d > std::max<int>(3, int(word.size()) / 2)) return "";
  return best;
}

int cmd_list(const std::vector<Experiment>& catalog, int argc, char** argv) {
  bool as_json = false;
  for (int i = 2; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--json") {
      as_json = true;
    } else {
      std::cerr << "list: unknown argument '" << a << "'\n";
      return 2;
    }
  }
  if (as_json) {
    json arr = json::array();
    for (const auto& e : catalog) {
      json defaults = json::object();
      for (const auto& [k, v] : e.defaults) defaults[k] = v;
      arr.push_back({{"name", e.name}, {"description", e.description}, {"defaults", defaults}});
    }
    std::cout << arr.dump(2) << "\n";
    return 0;
  }
  for (const auto& e : catalog) {
    std::cout << e.name << "\n    " << e.description << "\n    defaults:";
    for (const auto& [k, v] : e.defaults) std::cout << " " << k << "=" << v;
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<Experiment> catalog = build_catalog();

  if (argc <= 1) {
    std::cout << empty_report().dump(2) << "\n";
    return 0;
  }
  std::string first = argv[1];
  if (first == "list") return cmd_list(catalog, argc, argv);
  if (first == "help") first = "--help";

  if (first[0] != '-') {
    bool known = false;
    for (const auto& e : catalog) known = known || e.name == first;
    if (!known) {
      std::cerr << "unknown experiment '" << first << "'";
      std::string hint = closest_name(catalog, first);
      if (!hint.empty()) std::cerr << " (did you mean '" << hint << "'?)";
      std::cerr << "\nrun 'imlab list' for the catalog\n";
      return 2;
    }
  }

  struct SubState {
    const Experiment* exp = nullptr;
    CLI::App* sub = nullptr;
    std::map<std::string, std::string> vals;
    std::map<std::string, CLI::Option*> opts;
    std::string config_path, out_path, csv_path;
    bool force = false, validate = false;
  };

  CLI::App app{"numerical laboratory for spectral gaps, invariant graphs, and their sharpness"};
  app.require_subcommand(0, 1);
  std::list<SubState> states;
  for (const auto& exp : catalog) {
    SubState& st = states.emplace_back();
    st.exp = &exp;
    st.sub = app.add_subcommand(exp.name, exp.description);
    for (const auto& [key, def] : exp.defaults) {
      auto [it, fresh] = st.vals.emplace(key, def);
      (void)fresh;
      st.opts[key] = st.sub->add_option("--" + key, it->second, "default " + def);
    }
    st.sub->add_option("--config", st.config_path, "flat key=value config file");
    st.sub->add_option("--out", st.out_path, "write the JSON report here");
    st.sub->add_option("--csv", st.csv_path, "write the CSV table here");
    st.sub->add_flag("--force", st.force, "overwrite existing output files");
    st.sub->add_flag("--validate", st.validate, "check the config and exit");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  auto parsed = app.get_subcommands();
  if (parsed.empty()) {
    std::cout << empty_report().dump(2) << "\n";
    return 0;
  }
  SubState* st = nullptr;
  for (auto& s : states)
    if (s.sub == parsed.front()) st = &s;

  RunState rs;
  rs.validate_only = st->validate;
  try {
    for (const auto& [key, def] : st->exp->defaults) rs.cfg[key] = def;
    if (!st->config_path.empty()) overlay_config_file(rs.cfg, st->config_path, st->exp->name);
    for (const auto& [key, def] : st->exp->defaults)
      if (const char* env = std::getenv(env_key(key).c_str())) rs.cfg[key] = env;
    for (const auto& [key, opt] : st->opts)
      if (opt->count() > 0) rs.cfg[key] = st->vals[key];
    if (rs.cfg.count("seed")) rs.seed = seed_of(rs.cfg);

    guard_overwrite(st->out_path, st->force);
    guard_overwrite(st->csv_path, st->force);

    auto t0 = std::chrono::steady_clock::now();
    st->exp->run(rs);
    if (rs.validate_only) {
      std::cout << "config ok\n";
      return 0;
    }
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    bool all_pass = true;
    json rep = make_report(st->exp->name, rs, secs, all_pass);
    std::string text = rep.dump(2) + "\n";
    if (!st->out_path.empty())
      write_atomic(st->out_path, text);
    else
      std::cout << text;
    if (!st->csv_path.empty()) write_atomic(st->csv_path, rs.csv);
    return all_pass ? 0 : 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::out_of_range& e) {
    std::cerr << "invalid config: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  }
}
