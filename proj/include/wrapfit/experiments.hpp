#pragma once

#include <map>
#include <optional>
#include <vector>

#include "wrapfit/detection.hpp"
#include "wrapfit/estimators.hpp"
#include "wrapfit/rng.hpp"

namespace wrapfit {

struct ContaminationSpec {
  double eps = 0.0;               // fraction replaced, < 0.5
  double k_eps = 0.0;             // shift along the smallest eigenvector
  double sigma_eps = 0.05;        // scale of the added noise
  std::vector<int> contaminated_dims;  // empty = all dimensions
};

struct ScenarioConfig {
  int n = 250;
  int p = 2;
  double sigma = 0.39269908169872414;  // pi / 8 marginal SD
  double eps = 0.0;
  double k_eps = 0.0;
  double sigma_eps = 0.05;
  int lattice_J = 2;
  double condition_number = 20.0;
  int n_trials = 500;
  std::uint64_t seed = 1;
  std::vector<int> contaminated_dims;  // empty: first two dims when p > 2

  ContaminationSpec contamination() const {
    return ContaminationSpec{eps, k_eps, sigma_eps, contaminated_dims};
  }
};

struct TrialMetrics {
  int trial = 0;
  EstimatorKind kind = EstimatorKind::Em;
  double sqrt_as = 0.0;
  double delta_sigma = 0.0;
  double swamping = 0.0;
  std::optional<double> power;
  double mean_weight = 1.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  double elapsed_seconds = 0.0;
  std::uint64_t seed = 0;
};

// Random correlation matrix with eigenvalue ratio `condition_number`
// (within 5%): log-uniform spectrum conjugated by a Haar rotation, then
// rescaled to unit diagonal with the spectrum re-stretched until the
// condition number lands.
Mat random_correlation(int p, double condition_number, Rng& rng);

struct ContaminatedSample {
  Mat data;                       // n x p wrapped angles
  std::vector<bool> outlier_mask;
  ModelParams truth;              // mu = 0, Sigma = sigma^2 R
};

ContaminatedSample generate_contaminated(const ScenarioConfig& scenario, Rng& rng);

// sqrt((1/p) sum_d (1 - cos(mu_hat_d - mu_d)))
double metric_sqrt_as(const Vec& mu_hat, const Vec& mu_true);

// trace(S Sigma^-1) - log det(S Sigma^-1) - p
double metric_divergence(const Mat& sigma_hat, const Mat& sigma_true);

struct MonteCarloConfig {
  FitConfig base;
  std::map<EstimatorKind, double> bandwidths;  // per-estimator override
  double alpha = 0.01;
  int n_threads = 1;
};

// One row per (trial, estimator); bit-reproducible for a fixed scenario
// seed regardless of n_threads. Per-trial failures are recorded, not fatal.
std::vector<TrialMetrics> run_monte_carlo(const ScenarioConfig& scenario,
                                          const std::vector<EstimatorKind>& kinds,
                                          const MonteCarloConfig& config);

struct MetricSummary {
  double median = 0.0;
  double q25 = 0.0;
  double q75 = 0.0;
};

struct AggregateRow {
  EstimatorKind kind;
  int trials_ok = 0;
  MetricSummary sqrt_as;
  MetricSummary delta_sigma;
  MetricSummary swamping;
  MetricSummary power;
  double mean_weight_median = 1.0;
};

std::vector<AggregateRow> aggregate_metrics(const std::vector<TrialMetrics>& rows);

struct MonitorResult {
  std::vector<double> h_grid;
  Mat weights;                    // n x |grid|
  Vec downweighting;              // 1 - mean weight per h
  std::vector<ModelParams> params;
  std::vector<bool> converged;
  std::vector<bool> failed;
};

// Re-fit across the ascending bandwidth grid, warm-starting each fit from
// the previous solution; the first grid point uses the full initialization.
MonitorResult monitor_bandwidth(const Mat& data, const std::vector<double>& h_grid,
                                EstimatorKind kind, const FitConfig& config);

// Default monitoring grid: log-spaced in [scale/8, 2*scale] where scale is
// the mean of the per-coordinate log-resultant standard deviations.
std::vector<double> default_bandwidth_grid(const Mat& data, int size = 15);

// Bandwidth whose downweighting level is closest to the target; ties take
// the larger (smoother) bandwidth.
double calibrate_bandwidth(const MonitorResult& monitor, double target_downweight);

// sqrt of the second moment of the univariate wrapped normal restricted to
// (-pi, pi]; the population scale recovered by classification fits.
double sigma_unwrapped(double sigma0);

}  // namespace wrapfit
