// Acceptance gate: one self-contained check per release criterion, each
// printing a single "criterion NN pass|FAIL <detail>" line. Every tolerance
// and trial count is pinned here; the exit status is nonzero as soon as one
// criterion fails. All randomness derives from one master seed so the whole
// run is reproducible bit for bit.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/experiments.hpp"
#include "matchlab/field.hpp"
#include "matchlab/io.hpp"
#include "matchlab/rng.hpp"
#include "matchlab/semidiscrete.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/version.hpp"

using namespace matchlab;

namespace {

constexpr double kPi = std::numbers::pi;

std::uint64_t g_seed = default_master_seed;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

PointCloud uniform_cloud(std::size_t n, Rng& rng) {
  PointCloud c;
  c.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) c.points.push_back({rng.uniform(), rng.uniform()});
  return c;
}

ExperimentConfig slope_config(const char* density) {
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::bipartite;
  cfg.density = density;
  cfg.model = preset_density(density);
  cfg.n_values = {128, 256, 512, 1024, 2048};
  cfg.trials = {400, 300, 200, 100, 50};
  cfg.master_seed = g_seed;
  cfg.jobs = 1;
  return cfg;
}

// 1. The O(N^3) solver agrees with exhaustive search on 200 small instances.
Outcome c01_oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 2 + std::size_t(i % 7);
    Rng rng(trial_seed(g_seed, 900 + n, std::uint64_t(i)));
    const PointCloud x = uniform_cloud(n, rng);
    const PointCloud y = uniform_cloud(n, rng);
    worst = std::max(worst, std::abs(solve_assignment(x, y).cost -
                                     brute_force_assignment(x, y).cost));
  }
  const double t = seconds_since(t0);
  const bool pass = worst <= 1e-9 && t < 10.0;
  return {pass, fmt("max |solver - brute force| = %.3g over 200 instances, t=%.1fs", worst, t)};
}

// 2. Sorted matching of two uniform 1d samples has mean cost N/(3(N+1)).
Outcome c02_one_dimensional_closed_form() {
  const auto t0 = std::chrono::steady_clock::now();
  const long ns[] = {1, 2, 5, 10, 50};
  const int trials = 20000;
  std::string detail;
  bool pass = true;
  for (long n : ns) {
    double sum = 0.0, sumsq = 0.0;
    for (int t = 0; t < trials; ++t) {
      Rng rng(trial_seed(g_seed, 800 + std::uint64_t(n), std::uint64_t(t)));
      std::vector<double> x(static_cast<std::size_t>(n)), y(static_cast<std::size_t>(n));
      for (double& v : x) v = rng.uniform();
      for (double& v : y) v = rng.uniform();
      const double c = monotone_1d(x, y).cost;
      sum += c;
      sumsq += c * c;
    }
    const double mean = sum / trials;
    const double var = std::max(0.0, sumsq / trials - mean * mean);
    const double se = std::sqrt(var / trials);
    const double exact = double(n) / (3.0 * double(n + 1));
    const double dev = std::abs(mean - exact);
    if (dev > 3.0 * se) pass = false;
    detail += fmt(" N=%ld:%+.2fse", n, se > 0 ? (mean - exact) / se : 0.0);
  }
  const double t = seconds_since(t0);
  if (t >= 60.0) pass = false;
  return {pass, fmt("deviation per N in stderr units:%s, t=%.1fs", detail.c_str(), t)};
}

// 3. Uniform bipartite matching cost grows like log N / (2 pi).
Outcome c03_uniform_bipartite_slope(std::optional<double>& uniform_slope) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult r = run_bipartite(slope_config("uniform"));
  const double t = seconds_since(t0);
  if (!r.fit) return {false, "fit missing"};
  uniform_slope = r.fit->slope;
  const double lo = 0.85 / (2.0 * kPi), hi = 1.15 / (2.0 * kPi);
  const bool pass = r.fit->slope >= lo && r.fit->slope <= hi && t < 1800.0;
  return {pass, fmt("slope=%.5f se=%.5f ratio=%.4f band=[%.4f,%.4f], t=%.0fs", r.fit->slope,
                    r.fit->slope_se, r.fit->ratio, lo, hi, t)};
}

// 4. The same slope appears for tilted and piecewise-constant densities.
Outcome c04_density_independence(const std::optional<double>& uniform_slope) {
  const auto t0 = std::chrono::steady_clock::now();
  if (!uniform_slope) return {false, "uniform slope unavailable"};
  const double lo = 0.85 / (2.0 * kPi), hi = 1.15 / (2.0 * kPi);
  std::string detail;
  bool pass = true;
  for (const char* density : {"tilted", "pwc2x2"}) {
    const ExperimentResult r = run_bipartite(slope_config(density));
    if (!r.fit) return {false, "fit missing"};
    const double rel = std::abs(r.fit->slope - *uniform_slope) / *uniform_slope;
    if (r.fit->slope < lo || r.fit->slope > hi || rel >= 0.10) pass = false;
    detail += fmt(" %s:slope=%.5f rel_diff=%.1f%%", density, r.fit->slope, 100.0 * rel);
  }
  const double t = seconds_since(t0);
  if (t >= 3600.0) pass = false;
  return {pass, fmt("uniform=%.5f%s, t=%.0fs", *uniform_slope, detail.c_str(), t)};
}

// 5. N * W2^2(X, rho) grows like log N / (4 pi), using the corrected
// estimator; the raw and corrected slopes bracket the report.
Outcome c05_semidiscrete_slope() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::semidiscrete;
  cfg.model = preset_density("uniform");
  cfg.n_values = {64, 128, 256, 512};
  cfg.trials = {400, 300, 200, 100};
  cfg.master_seed = g_seed;
  cfg.jobs = 1;
  const ExperimentResult r = run_semidiscrete(cfg);
  const double t = seconds_since(t0);
  if (!r.fit) return {false, "fit missing"};
  std::vector<double> ns, raw, raw_se;
  for (const NStats& s : r.stats) {
    ns.push_back(double(s.n));
    raw.push_back(double(s.n) * s.mean_raw);
    raw_se.push_back(double(s.n) * s.se_raw);
  }
  const FitResult raw_fit = fit_log_slope(ns, raw, raw_se);
  const double lo = 0.8 / (4.0 * kPi), hi = 1.2 / (4.0 * kPi);
  const bool pass = r.fit->slope >= lo && r.fit->slope <= hi && t < 2700.0;
  return {pass, fmt("corrected slope=%.5f ratio=%.4f (raw slope=%.5f) band=[%.4f,%.4f], t=%.0fs",
                    r.fit->slope, r.fit->ratio, raw_fit.slope, lo, hi, t)};
}

// 6. Exact two-delta law: E C_N = L^2 E|R - S| ~ sqrt(N / pi), and sampling
// reproduces the exact expectation.
Outcome c06_two_delta_exact_law() {
  const auto t0 = std::chrono::steady_clock::now();
  const double ratio = two_delta_expected_cost(10000, 1.0).value / std::sqrt(10000.0 / kPi);
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::two_delta;
  cfg.density = "two_delta";
  cfg.model = preset_density("two_delta");
  cfg.n_values = {1000};
  cfg.trials = {1000};
  cfg.master_seed = g_seed;
  cfg.jobs = 1;
  const ExperimentResult r = run_two_delta(cfg);
  const double exact = two_delta_expected_cost(1000, 1.0).value;
  const double dev = std::abs(r.stats[0].mean_cost - exact);
  const double t = seconds_since(t0);
  const bool pass =
      ratio >= 0.99 && ratio <= 1.01 && dev <= 3.0 * r.stats[0].se_cost && t < 60.0;
  return {pass, fmt("E/sqrt(N/pi)=%.5f at N=1e4; MC dev=%.3f (3se=%.3f) at N=1e3, t=%.1fs", ratio,
                    dev, 3.0 * r.stats[0].se_cost, t)};
}

// 7. Disconnected support: cost grows like sqrt(N), not log N.
Outcome c07_disconnected_regime() {
  const auto t0 = std::chrono::steady_clock::now();
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::disconnected;
  cfg.density = "disconnected";
  cfg.model = preset_density("disconnected");
  cfg.n_values = {512, 1024, 2048};
  cfg.trials = {400, 300, 200};
  cfg.master_seed = g_seed;
  cfg.jobs = 1;
  const ExperimentResult r = run_disconnected(cfg);
  std::vector<double> per_sqrt, per_log;
  for (const NStats& s : r.stats) {
    per_sqrt.push_back(s.mean_corrected / std::sqrt(double(s.n)));
    per_log.push_back(s.mean_corrected / std::log(double(s.n)));
  }
  double avg = 0.0;
  for (double v : per_sqrt) avg += v;
  avg /= double(per_sqrt.size());
  double worst = 0.0;
  for (double v : per_sqrt) worst = std::max(worst, std::abs(v / avg - 1.0));
  const bool increasing = per_log[0] < per_log[1] && per_log[1] < per_log[2];
  const double t = seconds_since(t0);
  const bool pass = worst <= 0.15 && increasing && t < 1200.0;
  return {pass, fmt("C_N/sqrt(N)=%.4f,%.4f,%.4f (max dev %.1f%%); C_N/log N %s, t=%.0fs",
                    per_sqrt[0], per_sqrt[1], per_sqrt[2], 100.0 * worst,
                    increasing ? "strictly increases" : "NOT increasing", t)};
}

// 8. Fitted log coefficient of the weighted Green function matches
// 1 / (2 pi rho(z)).
Outcome c08_green_coefficient() {
  const auto t0 = std::chrono::steady_clock::now();
  const double c_uniform = green_singular_coefficient(preset_density("uniform"), {0.5, 0.5}, 512);
  const double ref_u = 1.0 / (2.0 * kPi);
  const double rel_u = std::abs(c_uniform - ref_u) / ref_u;
  const double c_tilted =
      green_singular_coefficient(preset_density("tilted"), {0.25, 0.25}, 512);
  const double ref_t = 1.0 / (1.5 * kPi);
  const double rel_t = std::abs(c_tilted - ref_t) / ref_t;
  const double t = seconds_since(t0);
  const bool pass = rel_u <= 0.05 && rel_t <= 0.07 && t < 300.0;
  return {pass, fmt("uniform %.5f vs %.5f (%.1f%%); tilted %.5f vs %.5f (%.1f%%), t=%.0fs",
                    c_uniform, ref_u, 100.0 * rel_u, c_tilted, ref_t, 100.0 * rel_t, t)};
}

// 9. Spectral H^-1 norm against the separable oracle, and the transport
// sandwich on random positive densities.
Outcome c09_hminus1_machinery() {
  const auto t0 = std::chrono::steady_clock::now();
  const int m = 256;
  GridField f(m);
  for (int j = 0; j <= m; ++j)
    for (int i = 0; i <= m; ++i) f.at(i, j) = std::cos(kPi * double(i) / m);
  const double exact = 1.0 / (2.0 * kPi * kPi);
  const double rel = std::abs(hminus1_norm(f) - exact) / exact;
  int held = 0;
  Rng rng(trial_seed(g_seed, 700, 0));
  for (int pair = 0; pair < 20; ++pair) {
    GridField a(32), b(32);
    for (std::size_t i = 0; i < a.values.size(); ++i) {
      a.values[i] = 0.25 + 1.5 * rng.uniform();
      b.values[i] = 0.25 + 1.5 * rng.uniform();
    }
    const double ia = field_integral(a), ib = field_integral(b);
    for (double& v : a.values) v /= ia;
    for (double& v : b.values) v /= ib;
    if (sandwich_check(a, b).holds) ++held;
  }
  const double t = seconds_since(t0);
  const bool pass = rel <= 1e-3 && held == 20 && t < 300.0;
  return {pass,
          fmt("hminus1 rel err %.2g at M=256; sandwich held %d/20 pairs, t=%.0fs", rel, held, t)};
}

// 10. Two-sample cost is at most twice the one-sample cost (triangle
// inequality route), with 10% headroom.
Outcome c10_two_sample_bound() {
  const auto t0 = std::chrono::steady_clock::now();
  std::string detail;
  bool pass = true;
  for (const char* density : {"uniform", "tilted", "pwc2x2"}) {
    ExperimentConfig cfg;
    cfg.mode = ExperimentMode::semidiscrete;
    cfg.density = density;
    cfg.model = preset_density(density);
    cfg.n_values = {256};
    cfg.trials = {100};
    cfg.master_seed = g_seed;
    cfg.jobs = 1;
    const ExperimentResult r = run_semidiscrete(cfg);
    const double two_sample = r.stats[0].mean_cost / 256.0; // mean W2^2(X, Y)
    const double bound = 2.0 * r.stats[0].mean_corrected * 1.1;
    if (!(two_sample <= bound)) pass = false;
    detail += fmt(" %s:%.5f<=%.5f", density, two_sample, bound);
  }
  const double t = seconds_since(t0);
  if (t >= 600.0) pass = false;
  return {pass, fmt("mean W2^2(X,Y) vs 2.2 * corrected mean W2^2(X,rho):%s, t=%.0fs",
                    detail.c_str(), t)};
}

// 11. Cell-averaged density fluctuation E||mu^m - mu||^2 scales like m^2.
Outcome c11_concentration_scaling() {
  const auto t0 = std::chrono::steady_clock::now();
  const DensityModel model = preset_density("uniform");
  std::vector<double> lx, ly;
  std::string detail;
  for (int m : {2, 4, 8}) {
    const ConcentrationReport rep = concentration_check(model, m, 100000, 200, g_seed);
    lx.push_back(std::log(double(m)));
    ly.push_back(std::log(rep.mean));
    detail += fmt(" m=%d:%.3g", m, rep.mean);
  }
  const double mx = (lx[0] + lx[1] + lx[2]) / 3.0, my = (ly[0] + ly[1] + ly[2]) / 3.0;
  double num = 0.0, den = 0.0;
  for (int i = 0; i < 3; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  const double slope = num / den;
  const double t = seconds_since(t0);
  const bool pass = std::abs(slope - 2.0) <= 0.4 && t < 120.0;
  return {pass, fmt("log-log slope=%.3f (target 2 +- 0.4); means%s, t=%.1fs", slope,
                    detail.c_str(), t)};
}

// 12. Rerunning an experiment with the same seed reproduces the CSV byte for
// byte.
Outcome c12_determinism() {
  ExperimentConfig cfg;
  cfg.mode = ExperimentMode::bipartite;
  cfg.model = preset_density("pwc2x2");
  cfg.n_values = {64, 128};
  cfg.trials = {20, 10};
  cfg.master_seed = g_seed;
  std::string csv[2];
  for (int run = 0; run < 2; ++run) {
    cfg.jobs = run == 0 ? 1 : 3;
    const ExperimentResult r = run_experiment(cfg);
    const std::string path = "acceptance_rerun_" + std::to_string(run) + ".csv";
    write_records_csv(path, r.mode, r.records);
    std::ifstream in(path, std::ios::binary);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    csv[run] = bytes.str();
    std::remove(path.c_str());
  }
  const bool pass = csv[0] == csv[1] && !csv[0].empty();
  return {pass, fmt("%zu-byte CSV identical across reruns (jobs 1 vs 3): %s", csv[0].size(),
                    pass ? "yes" : "NO")};
}

} // namespace

int main(int argc, char** argv) {
  std::vector<int> only;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--seed") == 0 && i + 1 < argc) {
      g_seed = std::strtoull(argv[++i], nullptr, 0);
    } else if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::istringstream list(argv[++i]);
      std::string tok;
      while (std::getline(list, tok, ',')) only.push_back(std::stoi(tok));
    } else {
      std::fprintf(stderr, "usage: %s [--seed S] [--only 1,2,...]\n", argv[0]);
      return 2;
    }
  }
  const auto wanted = [&](int id) {
    if (only.empty()) return true;
    for (int v : only)
      if (v == id) return true;
    return false;
  };

  std::optional<double> uniform_slope;
  int failures = 0;
  const auto report = [&](int id, const Outcome& o) {
    std::printf("criterion %02d %s  %s\n", id, o.pass ? "pass" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failures;
  };

  if (wanted(1)) report(1, c01_oracle_equivalence());
  if (wanted(2)) report(2, c02_one_dimensional_closed_form());
  if (wanted(3) || wanted(4)) {
    Outcome o3 = c03_uniform_bipartite_slope(uniform_slope);
    if (wanted(3)) report(3, o3);
    if (wanted(4)) report(4, c04_density_independence(uniform_slope));
  }
  if (wanted(5)) report(5, c05_semidiscrete_slope());
  if (wanted(6)) report(6, c06_two_delta_exact_law());
  if (wanted(7)) report(7, c07_disconnected_regime());
  if (wanted(8)) report(8, c08_green_coefficient());
  if (wanted(9)) report(9, c09_hminus1_machinery());
  if (wanted(10)) report(10, c10_two_sample_bound());
  if (wanted(11)) report(11, c11_concentration_scaling());
  if (wanted(12)) report(12, c12_determinism());

  if (failures > 0) {
    std::printf("%d criterion(s) failed\n", failures);
    return 1;
  }
  std::printf("all criteria passed\n");
  return 0;
}
