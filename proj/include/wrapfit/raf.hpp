#pragma once

#include "wrapfit/kde.hpp"
#include "wrapfit/torus.hpp"

namespace wrapfit {

enum class RafKind { GKL, PWD, SCHI };

// Residual adjustment function A(delta) on [-1, inf) with A(0) = 0 and
// A'(0) = 1. GKL: log(tau d + 1)/tau, tau in (0, 1]. PWD:
// ((d+1)^{lambda+1} - 1)/(lambda+1), lambda > -1 (lambda = 0 gives
// A(d) = d, i.e. unit weights). SCHI: 2 d / (d + 2).
struct Raf {
  RafKind kind = RafKind::GKL;
  double param = 0.25;

  double eval(double delta) const;
  double deriv(double delta) const;
};

// min{1, [A(delta) + 1]^+ / (delta + 1)}, clamped to [0, 1]; non-finite
// residuals map to weight zero.
double weight_from_residual(double delta, const Raf& raf);

// Pearson residual variants. All are computed in log space and return
// values in [-1, inf) (or +inf, which the weight maps to zero).
double residual_from_logs(double log_fhat, double log_model);

// Torus residual: circular KDE of data against the smoothed model.
double residual_torus(const Vec& y, const Mat& data, const ModelParams& params,
                      double h, const LatticeBox& box);

enum class UnwrapForm { Approximate, Exact };

// Unwrapped residual at x given unwrapped data rows. The approximate form
// smooths the model to N(mu, Sigma + diag(h^2)); the exact form keeps that
// Gaussian truncated to the cube (mu - pi, mu + pi].
double residual_unwrapped(const Vec& x, const Mat& unwrapped_data,
                          const ModelParams& params, double h,
                          UnwrapForm form = UnwrapForm::Approximate);

enum class DistanceReference { Chi2, Chi2Unwrapped };

// Distance residual: KDE of squared Mahalanobis distances against the
// chi-square reference (or its Monte Carlo unwrapped counterpart).
double residual_distance(double d2, const Vec& distance_sample,
                         const ModelParams& params, int p,
                         DistanceReference mode = DistanceReference::Chi2,
                         double bandwidth = 0.0);

}  // namespace wrapfit
