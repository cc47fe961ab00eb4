#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "matchlab/density.hpp"
#include "matchlab/transport.hpp"
#include "matchlab/version.hpp"

namespace matchlab {

enum class ExperimentMode { bipartite, grid_ansatz, semidiscrete, two_delta, disconnected };

const char* mode_name(ExperimentMode mode);
ExperimentMode mode_from_name(const std::string& name);

struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::bipartite;
  std::string density = "uniform"; // preset name or file, informational
  DensityModel model = preset_density("uniform");
  std::vector<long> n_values;
  std::vector<int> trials; // one entry per n, or a single count for all
  std::uint64_t master_seed = default_master_seed;
  int jobs = 0;       // worker threads; <= 0 means all processors
  int resolution = 0; // semidiscrete grid; 0 picks the default per n
  std::int64_t arc_limit = default_arc_limit;
};

// Rejects bad configs with ConfigInvalid; the message names the field.
void validate_config(const ExperimentConfig& config);

// One Monte Carlo trial. The seed alone reproduces the record; raw and
// corrected are NaN for modes that do not produce them (cost/raw/corrected
// semantics per mode are documented with the run_ functions).
struct TrialRecord {
  long n = 0;
  int trial = 0;
  std::uint64_t seed = 0;
  double cost = 0.0;
  double raw = std::numeric_limits<double>::quiet_NaN();
  double corrected = std::numeric_limits<double>::quiet_NaN();
};

// Per-n aggregates; se fields are sample stdev / sqrt(trials) (0 for a single
// trial). reference is the model prediction for the headline statistic.
struct NStats {
  long n = 0;
  int trials = 0;
  double mean_cost = 0.0, se_cost = 0.0;
  double mean_raw = std::numeric_limits<double>::quiet_NaN();
  double se_raw = std::numeric_limits<double>::quiet_NaN();
  double mean_corrected = std::numeric_limits<double>::quiet_NaN();
  double se_corrected = std::numeric_limits<double>::quiet_NaN();
  double reference = std::numeric_limits<double>::quiet_NaN();
};

// Least-squares line y = slope * log(n) + intercept. The fitted points are
// stored so the fit can be reproduced from the result alone.
struct FitResult {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double target = 0.0; // conjectured constant; 0 when not applicable
  double ratio = std::numeric_limits<double>::quiet_NaN(); // slope / target
  std::vector<double> n_values, values, weights, residuals;
};

// Ordinary least squares of value against log n; standard errors from the
// residual variance. Needs at least 3 distinct n (DegenerateDesign).
FitResult fit_log_slope(const std::vector<double>& n_values, const std::vector<double>& values);

// Weighted variant (weights 1 / se^2); standard errors are scaled by the
// square root of reduced chi-square, i.e. still follow the residuals.
FitResult fit_log_slope(const std::vector<double>& n_values, const std::vector<double>& values,
                        const std::vector<double>& se);

struct ExperimentResult {
  ExperimentMode mode = ExperimentMode::bipartite;
  std::vector<TrialRecord> records; // ordered by (n, trial)
  std::vector<NStats> stats;        // one per n
  std::optional<FitResult> fit;     // present when >= 3 sample sizes
};

// cost = matching cost of two independent n-samples; reference log(n)/(2 pi);
// fit targets 1/(2 pi).
ExperimentResult run_bipartite(const ExperimentConfig& config);

// cost = unconstrained matching cost, raw = matching constrained to the 2x2
// cells (per-cell assignment on the first min(R_k, S_k) points of each side,
// one global cleanup assignment on the surplus), corrected = raw - cost, the
// constraint gap. Needs the 2x2 piecewise-constant density.
ExperimentResult run_grid_ansatz(const ExperimentConfig& config);

// cost = matching cost of two independent n-samples (for the two-sample
// comparison), raw/corrected = sample-to-density squared distance bracketed
// by the grid collapse; reference log(n)/(4 pi n); fit of n * mean corrected
// targets 1/(4 pi).
ExperimentResult run_semidiscrete(const ExperimentConfig& config);

// cost = separation^2 * |R - S| with R, S the per-atom counts (the exact
// matching cost for two atoms, so no assignment solve is needed), raw =
// |R - S|; reference is the exact expectation.
ExperimentResult run_two_delta(const ExperimentConfig& config);

// cost = matching cost on the two-squares density, raw = |R - S| count
// imbalance between the squares, corrected = cost with the known-mean
// imbalance fluctuation subtracted (a control variate; equal-mass squares
// only). reference = center distance^2 * E|R - S|, the leading term.
ExperimentResult run_disconnected(const ExperimentConfig& config);

ExperimentResult run_experiment(const ExperimentConfig& config);

// E|R - S| for independent R, S ~ Binomial(n, 1/2), by exact pmf recursion.
double expected_abs_binomial_difference(long n);

// Exact expected matching cost separation^2 * E|R - S| of the two-atom
// measure; switches to the sqrt(n / pi) normal approximation above 10^6
// points and flags it.
struct TwoDeltaExpectation {
  double value = 0.0;
  bool approximate = false;
};
TwoDeltaExpectation two_delta_expected_cost(long n, double separation);

// Sampled squared L2 distance between the cell-averaged empirical density and
// the model: per trial, draws n cell counts R_k and evaluates
// sum_k (R_k / (p_k n) - 1)^2 * \int_{Q_k} rho^2. expected is the exact mean
// of that statistic (multinomial variance identity), which scales like
// (cells^2 - 1) / n for the uniform density.
struct ConcentrationReport {
  int cells = 0;
  long n = 0;
  int trials = 0;
  double mean = 0.0;
  double se = 0.0;
  double expected = 0.0;
};
ConcentrationReport concentration_check(const DensityModel& model, int cells, long n, int trials,
                                        std::uint64_t seed = default_master_seed);

// Runs body(0..total-1) on a small worker pool (jobs <= 0: all processors).
// Bodies must write to disjoint slots; exceptions are rethrown on the caller.
void parallel_for(std::size_t total, int jobs, const std::function<void(std::size_t)>& body);

} // namespace matchlab
