#include "matchlab/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "matchlab/error.hpp"
#include "matchlab/semidiscrete.hpp"

namespace matchlab {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

} // namespace

const char* mode_name(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::bipartite: return "bipartite";
    case ExperimentMode::grid_ansatz: return "grid_ansatz";
    case ExperimentMode::semidiscrete: return "semidiscrete";
    case ExperimentMode::two_delta: return "two_delta";
    case ExperimentMode::disconnected: return "disconnected";
  }
  return "unknown";
}

ExperimentMode mode_from_name(const std::string& name) {
  for (ExperimentMode m : {ExperimentMode::bipartite, ExperimentMode::grid_ansatz,
                           ExperimentMode::semidiscrete, ExperimentMode::two_delta,
                           ExperimentMode::disconnected})
    if (name == mode_name(m)) return m;
  fail(errc::config_invalid, "mode: unknown experiment mode '" + name + "'");
}

void validate_config(const ExperimentConfig& config) {
  if (config.n_values.empty())
    fail(errc::config_invalid, "n_values: at least one sample size is required");
  long prev = 0;
  for (long n : config.n_values) {
    if (n < 1) fail(errc::config_invalid, "n_values: sample sizes must be >= 1");
    if (n <= prev) fail(errc::config_invalid, "n_values: sample sizes must be strictly increasing");
    prev = n;
  }
  if (config.trials.empty()) fail(errc::config_invalid, "trials: at least one trial count is required");
  if (config.trials.size() != 1 && config.trials.size() != config.n_values.size())
    fail(errc::config_invalid, "trials: give one count, or one per sample size");
  for (int t : config.trials)
    if (t < 1) fail(errc::config_invalid, "trials: trial counts must be >= 1");
  if (config.resolution < 0) fail(errc::config_invalid, "resolution: must be >= 0");
  if (config.arc_limit < 1) fail(errc::config_invalid, "arc_limit: must be >= 1");

  const DensityKind kind = config.model.kind;
  switch (config.mode) {
    case ExperimentMode::bipartite:
    case ExperimentMode::semidiscrete:
      if (!is_positive_kind(config.model))
        fail(errc::config_invalid, "density: this mode needs a strictly positive density");
      break;
    case ExperimentMode::grid_ansatz:
      if (kind != DensityKind::piecewise_constant || config.model.m != 2)
        fail(errc::config_invalid, "density: grid ansatz needs the 2x2 piecewise-constant density");
      break;
    case ExperimentMode::two_delta:
      if (kind != DensityKind::two_delta)
        fail(errc::config_invalid, "density: this mode needs the two-atom density");
      break;
    case ExperimentMode::disconnected:
      if (kind != DensityKind::disconnected_squares)
        fail(errc::config_invalid, "density: this mode needs the two-squares density");
      break;
  }
  if (config.mode == ExperimentMode::semidiscrete) {
    const long n_max = config.n_values.back();
    const long m = config.resolution > 0 ? config.resolution : default_resolution(std::size_t(n_max));
    if (n_max * m * m > config.arc_limit)
      fail(errc::config_invalid, "resolution: grid too fine for the arc budget at the largest n");
  }
}

void parallel_for(std::size_t total, int jobs, const std::function<void(std::size_t)>& body) {
  if (total == 0) return;
  std::size_t workers =
      jobs > 0 ? std::size_t(jobs) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, total);
  if (workers <= 1) {
    for (std::size_t i = 0; i < total; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex guard;
  std::exception_ptr first_error;
  auto work = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= total) return;
      try {
        body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first_error) first_error = std::current_exception();
        next.store(total); // stop handing out work
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---------------------------------------------------------------------------
// trial bookkeeping and aggregation

namespace {

struct TrialPlan {
  std::vector<long> ns;
  std::vector<int> trials;
  std::vector<std::size_t> offsets;
  std::size_t total = 0;

  // flat index -> (n index, trial index)
  std::pair<std::size_t, int> locate(std::size_t idx) const {
    std::size_t a = 0;
    while (a + 1 < offsets.size() && idx >= offsets[a + 1]) ++a;
    return {a, int(idx - offsets[a])};
  }
};

TrialPlan plan_trials(const ExperimentConfig& config) {
  TrialPlan plan;
  plan.ns = config.n_values;
  for (std::size_t a = 0; a < plan.ns.size(); ++a)
    plan.trials.push_back(config.trials.size() == 1 ? config.trials[0] : config.trials[a]);
  plan.offsets.resize(plan.ns.size());
  for (std::size_t a = 0; a < plan.ns.size(); ++a) {
    plan.offsets[a] = plan.total;
    plan.total += std::size_t(plan.trials[a]);
  }
  return plan;
}

struct MeanSe {
  double mean = kNaN;
  double se = kNaN;
};

MeanSe mean_se(const std::vector<double>& xs) {
  if (xs.empty() || std::isnan(xs.front())) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / double(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / double(xs.size() - 1));
  return {mean, sd / std::sqrt(double(xs.size()))};
}

// Aggregates records (already ordered by (n, trial)) into per-n stats; the
// fold order is fixed so parallel execution cannot change the output.
std::vector<NStats> aggregate(const TrialPlan& plan, const std::vector<TrialRecord>& records,
                              const std::function<double(long)>& reference) {
  std::vector<NStats> stats;
  for (std::size_t a = 0; a < plan.ns.size(); ++a) {
    NStats s;
    s.n = plan.ns[a];
    s.trials = plan.trials[a];
    std::vector<double> cost, raw, corrected;
    for (int t = 0; t < plan.trials[a]; ++t) {
      const TrialRecord& r = records[plan.offsets[a] + std::size_t(t)];
      cost.push_back(r.cost);
      raw.push_back(r.raw);
      corrected.push_back(r.corrected);
    }
    const MeanSe c = mean_se(cost), rw = mean_se(raw), co = mean_se(corrected);
    s.mean_cost = c.mean;
    s.se_cost = c.se;
    s.mean_raw = rw.mean;
    s.se_raw = rw.se;
    s.mean_corrected = co.mean;
    s.se_corrected = co.se;
    if (reference) s.reference = reference(s.n);
    stats.push_back(s);
  }
  return stats;
}

DensityModel normalized_model(const ExperimentConfig& config) {
  return config.model.normalized ? config.model : normalize(config.model);
}

bool weights_usable(const std::vector<double>& se) {
  for (double s : se)
    if (!(s > 0.0) || !std::isfinite(s)) return false;
  return true;
}

// Weighted fit when every stderr is positive, plain fit otherwise; absent
// entirely below 3 sample sizes.
std::optional<FitResult> maybe_fit(const std::vector<NStats>& stats,
                                   const std::function<double(const NStats&)>& value,
                                   const std::function<double(const NStats&)>& se, double target) {
  if (stats.size() < 3) return std::nullopt;
  std::vector<double> ns, ys, ses;
  for (const NStats& s : stats) {
    ns.push_back(double(s.n));
    ys.push_back(value(s));
    ses.push_back(se(s));
  }
  FitResult fit = weights_usable(ses) ? fit_log_slope(ns, ys, ses) : fit_log_slope(ns, ys);
  fit.target = target;
  if (target != 0.0) fit.ratio = fit.slope / target;
  return fit;
}

// Half-open binning consistent with the measure partition: the top and right
// boundary rows close the last cell.
int cell_index(const Point& p, int m) {
  const int i = std::min(int(p.x * m), m - 1);
  const int j = std::min(int(p.y * m), m - 1);
  return j * m + i;
}

} // namespace

// ---------------------------------------------------------------------------
// least-squares fits

static FitResult fit_weighted_impl(const std::vector<double>& n_values,
                                   const std::vector<double>& values,
                                   const std::vector<double>& weights, bool scale_by_chi2) {
  const std::size_t k = n_values.size();
  if (values.size() != k || weights.size() != k)
    fail(errc::size_mismatch, "fit inputs must have equal length");
  std::vector<double> distinct;
  for (double n : n_values) {
    if (!(n > 0.0)) fail(errc::out_of_domain, "sample sizes must be positive");
    if (std::find(distinct.begin(), distinct.end(), n) == distinct.end()) distinct.push_back(n);
  }
  if (distinct.size() < 3)
    fail(errc::degenerate_design, "need at least 3 distinct sample sizes to fit a slope");

  double sw = 0.0, sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double w = weights[i];
    const double x = std::log(n_values[i]);
    sw += w;
    sx += w * x;
    sy += w * values[i];
    sxx += w * x * x;
    sxy += w * x * values[i];
  }
  const double det = sw * sxx - sx * sx;
  if (!(det > 0.0)) fail(errc::degenerate_design, "degenerate design matrix");

  FitResult fit;
  fit.slope = (sw * sxy - sx * sy) / det;
  fit.intercept = (sxx * sy - sx * sxy) / det;
  fit.n_values = n_values;
  fit.values = values;
  fit.weights = weights;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double r = values[i] - (fit.slope * std::log(n_values[i]) + fit.intercept);
    fit.residuals.push_back(r);
    chi2 += weights[i] * r * r;
  }
  // formal covariance from the normal equations, rescaled to the residuals
  const double dof = double(k) - 2.0;
  const double scale = (scale_by_chi2 && dof > 0.0) ? chi2 / dof : 1.0;
  fit.slope_se = std::sqrt(scale * sw / det);
  fit.intercept_se = std::sqrt(scale * sxx / det);
  return fit;
}

FitResult fit_log_slope(const std::vector<double>& n_values, const std::vector<double>& values) {
  return fit_weighted_impl(n_values, values, std::vector<double>(n_values.size(), 1.0), true);
}

FitResult fit_log_slope(const std::vector<double>& n_values, const std::vector<double>& values,
                        const std::vector<double>& se) {
  if (se.size() != n_values.size()) fail(errc::size_mismatch, "fit inputs must have equal length");
  std::vector<double> weights;
  for (double s : se) {
    if (!(s > 0.0) || !std::isfinite(s))
      fail(errc::out_of_domain, "standard errors must be positive to weight a fit");
    weights.push_back(1.0 / (s * s));
  }
  return fit_weighted_impl(n_values, values, weights, true);
}

// ---------------------------------------------------------------------------
// experiment drivers

ExperimentResult run_bipartite(const ExperimentConfig& config) {
  validate_config(config);
  const DensityModel model = normalized_model(config);
  const TrialPlan plan = plan_trials(config);
  ExperimentResult result;
  result.mode = config.mode;
  result.records.resize(plan.total);
  parallel_for(plan.total, config.jobs, [&](std::size_t idx) {
    const auto [a, t] = plan.locate(idx);
    const long n = plan.ns[a];
    const std::uint64_t seed = trial_seed(config.master_seed, std::uint64_t(n), std::uint64_t(t));
    Rng rng(seed);
    const PointCloud x = sample_points(model, std::size_t(n), rng);
    const PointCloud y = sample_points(model, std::size_t(n), rng);
    result.records[idx] = {n, t, seed, solve_assignment(x, y).cost, kNaN, kNaN};
  });
  result.stats = aggregate(plan, result.records,
                           [](long n) { return std::log(double(n)) / (2.0 * kPi); });
  result.fit = maybe_fit(
      result.stats, [](const NStats& s) { return s.mean_cost; },
      [](const NStats& s) { return s.se_cost; }, 1.0 / (2.0 * kPi));
  return result;
}

ExperimentResult run_grid_ansatz(const ExperimentConfig& config) {
  validate_config(config);
  const DensityModel model = normalized_model(config);
  const TrialPlan plan = plan_trials(config);
  ExperimentResult result;
  result.mode = config.mode;
  result.records.resize(plan.total);
  parallel_for(plan.total, config.jobs, [&](std::size_t idx) {
    const auto [a, t] = plan.locate(idx);
    const long n = plan.ns[a];
    const std::uint64_t seed = trial_seed(config.master_seed, std::uint64_t(n), std::uint64_t(t));
    Rng rng(seed);
    const PointCloud x = sample_points(model, std::size_t(n), rng);
    const PointCloud y = sample_points(model, std::size_t(n), rng);
    const double unconstrained = solve_assignment(x, y).cost;

    // constrained route: match inside each cell on the first min(R_k, S_k)
    // points per side, then clean up all surplus with one global assignment
    std::vector<std::vector<Point>> cx(4), cy(4);
    for (const Point& p : x.points) cx[cell_index(p, 2)].push_back(p);
    for (const Point& p : y.points) cy[cell_index(p, 2)].push_back(p);
    double constrained = 0.0;
    PointCloud sx, sy;
    for (int k = 0; k < 4; ++k) {
      const std::size_t common = std::min(cx[k].size(), cy[k].size());
      if (common > 0) {
        PointCloud px, py;
        px.points.assign(cx[k].begin(), cx[k].begin() + long(common));
        py.points.assign(cy[k].begin(), cy[k].begin() + long(common));
        constrained += solve_assignment(px, py).cost;
      }
      sx.points.insert(sx.points.end(), cx[k].begin() + long(common), cx[k].end());
      sy.points.insert(sy.points.end(), cy[k].begin() + long(common), cy[k].end());
    }
    if (!sx.points.empty()) constrained += solve_assignment(sx, sy).cost;
    result.records[idx] = {n, t, seed, unconstrained, constrained, constrained - unconstrained};
  });
  result.stats = aggregate(plan, result.records,
                           [](long n) { return std::log(double(n)) / (2.0 * kPi); });
  result.fit = maybe_fit(
      result.stats, [](const NStats& s) { return s.mean_cost; },
      [](const NStats& s) { return s.se_cost; }, 1.0 / (2.0 * kPi));
  return result;
}

ExperimentResult run_semidiscrete(const ExperimentConfig& config) {
  validate_config(config);
  const DensityModel model = normalized_model(config);
  const TrialPlan plan = plan_trials(config);
  ExperimentResult result;
  result.mode = config.mode;
  result.records.resize(plan.total);
  parallel_for(plan.total, config.jobs, [&](std::size_t idx) {
    const auto [a, t] = plan.locate(idx);
    const long n = plan.ns[a];
    const int m = config.resolution > 0 ? config.resolution : default_resolution(std::size_t(n));
    const std::uint64_t seed = trial_seed(config.master_seed, std::uint64_t(n), std::uint64_t(t));
    Rng rng(seed);
    const PointCloud x = sample_points(model, std::size_t(n), rng);
    const PointCloud y = sample_points(model, std::size_t(n), rng);
    const double pair_cost = solve_assignment(x, y).cost;
    const SemidiscreteResult sd = w2_to_density(x, model, m, config.arc_limit);
    result.records[idx] = {n, t, seed, pair_cost, sd.raw, sd.corrected};
  });
  result.stats = aggregate(plan, result.records, [](long n) {
    return std::log(double(n)) / (4.0 * kPi * double(n));
  });
  result.fit = maybe_fit(
      result.stats, [](const NStats& s) { return double(s.n) * s.mean_corrected; },
      [](const NStats& s) { return double(s.n) * s.se_corrected; }, 1.0 / (4.0 * kPi));
  return result;
}

ExperimentResult run_two_delta(const ExperimentConfig& config) {
  validate_config(config);
  const DensityModel model = normalized_model(config);
  const double sep2 = squared_distance(model.z1, model.z2);
  const TrialPlan plan = plan_trials(config);
  ExperimentResult result;
  result.mode = config.mode;
  result.records.resize(plan.total);
  parallel_for(plan.total, config.jobs, [&](std::size_t idx) {
    const auto [a, t] = plan.locate(idx);
    const long n = plan.ns[a];
    const std::uint64_t seed = trial_seed(config.master_seed, std::uint64_t(n), std::uint64_t(t));
    Rng rng(seed);
    // counting the first-atom draws consumes the generator exactly like
    // sample_points, and the matching cost is sep^2 * |R - S| exactly
    long r = 0, s = 0;
    for (long i = 0; i < n; ++i) r += rng.uniform() < 0.5 ? 1 : 0;
    for (long i = 0; i < n; ++i) s += rng.uniform() < 0.5 ? 1 : 0;
    const double imbalance = double(std::labs(r - s));
    result.records[idx] = {n, t, seed, sep2 * imbalance, imbalance, kNaN};
  });
  result.stats = aggregate(plan, result.records, [sep2](long n) {
    return sep2 * expected_abs_binomial_difference(n);
  });
  return result;
}

ExperimentResult run_disconnected(const ExperimentConfig& config) {
  validate_config(config);
  const DensityModel model = normalized_model(config);
  // an excess pair must bridge the gap between the squares; as n grows the
  // optimal matching recruits bridging points from ever thinner layers at the
  // facing edges, so the squared edge-to-edge gap is the per-pair cost
  const double gx = std::max({0.0, model.sq2.x0 - model.sq1.x1, model.sq1.x0 - model.sq2.x1});
  const double gy = std::max({0.0, model.sq2.y0 - model.sq1.y1, model.sq1.y0 - model.sq2.y1});
  const double gap2 = gx * gx + gy * gy;
  const double w1 = model.sq1.area() * model.v1;
  const double w2 = model.sq2.area() * model.v2;
  // the imbalance |R - S| is Binomial(n, 1/2)-based only for equal masses
  const bool balanced = std::fabs(w1 - w2) <= 1e-12 * (w1 + w2);

  const TrialPlan plan = plan_trials(config);
  std::vector<double> expected_imbalance(plan.ns.size(), kNaN);
  if (balanced)
    for (std::size_t a = 0; a < plan.ns.size(); ++a)
      expected_imbalance[a] = expected_abs_binomial_difference(plan.ns[a]);

  ExperimentResult result;
  result.mode = config.mode;
  result.records.resize(plan.total);
  parallel_for(plan.total, config.jobs, [&](std::size_t idx) {
    const auto [a, t] = plan.locate(idx);
    const long n = plan.ns[a];
    const std::uint64_t seed = trial_seed(config.master_seed, std::uint64_t(n), std::uint64_t(t));
    Rng rng(seed);
    const PointCloud x = sample_points(model, std::size_t(n), rng);
    const PointCloud y = sample_points(model, std::size_t(n), rng);
    const double cost = solve_assignment(x, y).cost;
    long r = 0, s = 0;
    for (const Point& p : x.points) r += model.sq1.contains(p) ? 1 : 0;
    for (const Point& p : y.points) s += model.sq1.contains(p) ? 1 : 0;
    const double imbalance = double(std::labs(r - s));
    // control variate: the bridging term gap2 * |R - S| dominates the
    // variance and has a known mean, so subtracting its fluctuation leaves
    // the mean unchanged while shrinking the error bars
    const double corrected =
        balanced ? cost - gap2 * (imbalance - expected_imbalance[a]) : kNaN;
    result.records[idx] = {n, t, seed, cost, imbalance, corrected};
  });
  result.stats = aggregate(plan, result.records, [&](long n) {
    return balanced ? gap2 * expected_abs_binomial_difference(n) : kNaN;
  });
  return result;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  switch (config.mode) {
    case ExperimentMode::bipartite: return run_bipartite(config);
    case ExperimentMode::grid_ansatz: return run_grid_ansatz(config);
    case ExperimentMode::semidiscrete: return run_semidiscrete(config);
    case ExperimentMode::two_delta: return run_two_delta(config);
    case ExperimentMode::disconnected: return run_disconnected(config);
  }
  fail(errc::config_invalid, "mode: unknown experiment mode");
}

// ---------------------------------------------------------------------------
// closed forms and concentration

double expected_abs_binomial_difference(long n) {
  if (n < 1) fail(errc::out_of_domain, "n must be >= 1");
  // R - S + n ~ Binomial(2n, 1/2), so P(R - S = d) = C(2n, n+d) / 4^n
  double p = 1.0;
  for (long i = 1; i <= n; ++i) p *= (2.0 * double(i) - 1.0) / (2.0 * double(i));
  double e = 0.0;
  for (long d = 0; d < n; ++d) {
    p *= double(n - d) / double(n + d + 1);
    e += 2.0 * double(d + 1) * p;
  }
  return e;
}

TwoDeltaExpectation two_delta_expected_cost(long n, double separation) {
  if (n < 1) fail(errc::out_of_domain, "n must be >= 1");
  if (!(separation > 0.0)) fail(errc::out_of_domain, "separation must be positive");
  TwoDeltaExpectation out;
  out.approximate = n > 1000000;
  const double e = out.approximate ? std::sqrt(double(n) / kPi)
                                   : expected_abs_binomial_difference(n);
  out.value = separation * separation * e;
  return out;
}

ConcentrationReport concentration_check(const DensityModel& model0, int cells, long n, int trials,
                                        std::uint64_t seed) {
  if (cells < 1) fail(errc::config_invalid, "cells: must be >= 1");
  if (n < 1) fail(errc::config_invalid, "n: must be >= 1");
  if (trials < 1) fail(errc::config_invalid, "trials: must be >= 1");
  const DensityModel model = model0.normalized ? model0 : normalize(model0);
  if (!is_positive_kind(model))
    fail(errc::not_positive, "concentration needs a strictly positive density");

  const CellPartition partition = cell_masses(model, cells);
  const int k = partition.cell_count();
  std::vector<double> weight(k), cumulative(k);
  double acc = 0.0;
  for (int c = 0; c < k; ++c) {
    weight[c] = square_integral_over(model, partition.cell_rect(c));
    acc += partition.masses[c];
    cumulative[c] = acc;
  }

  ConcentrationReport report;
  report.cells = cells;
  report.n = n;
  report.trials = trials;
  for (int c = 0; c < k; ++c) {
    const double p = partition.masses[c];
    report.expected += weight[c] * (1.0 - p) / (p * double(n));
  }

  // cell counts are all the statistic needs, so each point is one uniform
  // draw located in the cumulative-mass table
  std::vector<double> values(static_cast<std::size_t>(trials));
  for (int t = 0; t < trials; ++t) {
    Rng rng(trial_seed(seed, std::uint64_t(n), std::uint64_t(t)));
    std::vector<long> counts(k, 0);
    for (long i = 0; i < n; ++i) {
      const double u = rng.uniform();
      const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
      const int c = std::min(int(it - cumulative.begin()), k - 1);
      ++counts[c];
    }
    double v = 0.0;
    for (int c = 0; c < k; ++c) {
      const double rel = double(counts[c]) / (partition.masses[c] * double(n)) - 1.0;
      v += weight[c] * rel * rel;
    }
    values[std::size_t(t)] = v;
  }
  const MeanSe ms = mean_se(values);
  report.mean = ms.mean;
  report.se = ms.se;
  return report;
}

} // namespace matchlab
