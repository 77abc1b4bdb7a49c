#pragma once

#include <cstdint>
#include <optional>

#include "wrapfit/torus.hpp"

namespace wrapfit {

// Wrapped-normal kernel density estimate on the torus with bandwidth
// matrix H = diag(h^2). Kernel truncation uses the adequacy rule for H.
double torus_kde_log(const Vec& y, const Mat& data, double h);
double torus_kde(const Vec& y, const Mat& data, double h);

// Same estimate at every row of `query`; O(q * n * lattice).
Vec torus_kde_log_rows(const Mat& query, const Mat& data, double h);

// Plain Gaussian product-kernel estimate on R^p.
double linear_kde_log(const Vec& x, const Mat& data, double h);
double linear_kde(const Vec& x, const Mat& data, double h);
Vec linear_kde_log_rows(const Mat& query, const Mat& data, double h);

// Wrapped normal smoothed model: WN(mu, Sigma + diag(h^2)).
double smoothed_wn_log(const Vec& y, const ModelParams& params, double h,
                       const LatticeBox& box);
double smoothed_wn(const Vec& y, const ModelParams& params, double h,
                   const LatticeBox& box);

// Density estimate on [0, inf) for squared distances. A Gaussian kernel is
// applied to log(d^2) and back-transformed, which keeps the estimate free of
// boundary leakage at zero while allowing mass to pile up there.
// bandwidth <= 0 selects the normal-reference rule on the log scale.
double distance_kde(double d2, const Vec& sample, double bandwidth = 0.0);
Vec distance_kde_at(const Vec& query, const Vec& sample, double bandwidth = 0.0);
double distance_kde_bandwidth(const Vec& sample);

// Monte Carlo view of the squared Mahalanobis distance of unwrapped draws:
// sample the wrapped model, recenter each draw into (mu - pi, mu + pi],
// and evaluate d^2 against the model parameters.
struct UnwrappedDistanceSample {
  Vec d2;                   // mc_size draws
  double support_estimate;  // p * max_k z_k^2 / lambda scaling, see sample()
};

// mc_size must be >= 1000. support_estimate is p * max over draws and
// coordinates of the squared standardized recentred coordinate; for
// isotropic Sigma = s^2 I it converges to p * pi^2 / s^2, the upper end of
// the distance support.
UnwrappedDistanceSample sample_unwrapped_distances(const ModelParams& params,
                                                   int mc_size,
                                                   std::uint64_t seed);

double chi2_unwrapped_density(double d2, const ModelParams& params,
                              int mc_size = 100000, std::uint64_t seed = 20240901,
                              double bandwidth = 0.0);

// Empirical (1 - alpha) quantile of the same Monte Carlo sample.
double chi2_unwrapped_quantile(double prob, const ModelParams& params,
                               int mc_size = 100000, std::uint64_t seed = 20240901);

}  // namespace wrapfit
