#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "wrapfit/raf.hpp"
#include "wrapfit/rng.hpp"

namespace wrapfit {

enum class EstimatorKind { Em, Cem, Wem, WcemTorus, WcemUnwrap, WcemDist };
enum class WcemScheme { Torus, Unwrap, Dist };

std::string estimator_name(EstimatorKind kind);
EstimatorKind estimator_from_name(const std::string& name);

struct FitConfig {
  Raf raf{RafKind::GKL, 0.25};
  // Kernel bandwidth h for the torus / unwrapped schemes; the distance
  // scheme reads it as the log-scale bandwidth of the distance KDE
  // (<= 0 there selects the normal-reference rule).
  double bandwidth = 0.0;
  int lattice_J = 2;  // < 0 applies the adequacy rule per candidate
  double tol = 1e-6;
  int max_iter = 500;
  int n_subsamples = 20;
  int subsample_size = 0;  // 0 -> p + p(p+1)/2 + 5
  double ridge = 0.0;      // optional extra ridge on initial candidates
  std::uint64_t seed = 0;
  double root_delta_star = -0.5;
  int root_mc_draws = 400;
  double low_weight_warning = 0.1;
  UnwrapForm unwrap_form = UnwrapForm::Approximate;
  DistanceReference dist_reference = DistanceReference::Chi2;
};

struct IterationStats {
  double mu_change = 0.0;
  double sigma_change = 0.0;
  double mean_weight = 1.0;
  double log_lik = 0.0;
  bool ridged = false;
};

struct FitResult {
  EstimatorKind kind = EstimatorKind::Em;
  ModelParams params;
  Vec weights;             // per observation, in [0, 1]; all ones for Em/Cem
  Mat unwrapped;           // n x p fitted linear data x-hat
  Eigen::MatrixXi j_hat;   // n x p crisp wrapping coefficients
  Vec residuals;           // scheme residuals at the fit; empty for Em/Cem
  int iterations = 0;
  bool converged = false;
  bool low_weight_warning = false;
  double log_lik = 0.0;
  double root_score = 0.0;
  int candidate_index = 0;
  std::vector<IterationStats> trace;

  double mean_weight() const {
    return weights.size() ? weights.mean() : 1.0;
  }
};

// Conditional probabilities of the wrapping vectors for one observation,
// in lattice_enumerate order; they sum to one. Throws DegenerateSample when
// every lattice term underflows.
std::vector<std::pair<Eigen::VectorXi, double>> posterior_lattice_weights(
    const Vec& y, const ModelParams& params, const EllipticalGenerator& gen,
    const LatticeBox& box);

// Crisp assignment of each data row to its most probable wrapping vector;
// ties resolved toward the smallest lattice norm, then enumeration order.
std::pair<Mat, Eigen::MatrixXi> cstep_unwrap(const Mat& data,
                                             const WrappedModel& model);

// Subsample starting points: componentwise circular means, log-resultant
// diagonal and circular-correlation off-diagonal entries, ridge-repaired to
// SPD or discarded. Throws DegenerateSample when no candidate survives.
std::vector<ModelParams> initialize(const Mat& data, const FitConfig& config,
                                    Rng& rng);

bool check_convergence(const ModelParams& prev, const ModelParams& next,
                       double tol);

// Root selection for the weighted estimators: among converged candidates,
// minimize the Monte Carlo probability (under the candidate's own fitted
// model, fixed derived seed) of a scheme residual below root_delta_star;
// ties prefer the higher mean weight, then the earlier candidate. Throws
// std::runtime_error when no candidate converged.
FitResult select_root(std::vector<FitResult> candidates, const Mat& data,
                      const FitConfig& config);

FitResult fit(const Mat& data, EstimatorKind kind, const FitConfig& config,
              const EllipticalGenerator& gen = EllipticalGenerator::normal());

// Single run of the fixed-point iteration from an explicit starting point;
// no subsampling and no root selection.
FitResult fit_from_start(const Mat& data, EstimatorKind kind,
                         const FitConfig& config, const ModelParams& start,
                         const EllipticalGenerator& gen = EllipticalGenerator::normal());

FitResult em_fit(const Mat& data, const FitConfig& config);
FitResult cem_fit(const Mat& data, const FitConfig& config);
FitResult wem_fit(const Mat& data, const FitConfig& config);
FitResult wcem_fit(const Mat& data, const FitConfig& config, WcemScheme scheme);

}  // namespace wrapfit
