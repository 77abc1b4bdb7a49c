#include "wrapfit/raf.hpp"

#include <cmath>
#include <limits>

#include "wrapfit/special.hpp"

namespace wrapfit {

double Raf::eval(double delta) const {
  const double d = std::max(delta, -1.0);
  switch (kind) {
    case RafKind::GKL: {
      const double t = param;
      const double arg = t * d + 1.0;
      if (arg <= 0.0) return -std::numeric_limits<double>::infinity();
      return std::log(arg) / t;
    }
    case RafKind::PWD: {
      const double l = param;
      return (std::pow(d + 1.0, l + 1.0) - 1.0) / (l + 1.0);
    }
    case RafKind::SCHI:
      return 2.0 * d / (d + 2.0);
  }
  return d;
}

double Raf::deriv(double delta) const {
  const double d = std::max(delta, -1.0);
  switch (kind) {
    case RafKind::GKL: {
      const double arg = param * d + 1.0;
      if (arg <= 0.0) return std::numeric_limits<double>::infinity();
      return 1.0 / arg;
    }
    case RafKind::PWD:
      return std::pow(d + 1.0, param);
    case RafKind::SCHI: {
      const double s = d + 2.0;
      return 4.0 / (s * s);
    }
  }
  return 1.0;
}

double weight_from_residual(double delta, const Raf& raf) {
  if (!std::isfinite(delta)) return 0.0;
  const double d = std::max(delta, -1.0);
  const double num = raf.eval(d) + 1.0;
  if (!(num > 0.0)) return 0.0;  // positive part, also covers A = -inf
  const double den = d + 1.0;
  if (den <= 0.0) return 0.0;
  const double w = num / den;
  if (w >= 1.0) return 1.0;
  return w < 0.0 ? 0.0 : w;
}

double residual_from_logs(double log_fhat, double log_model) {
  const double r = log_fhat - log_model;
  if (r > 700.0) return std::numeric_limits<double>::infinity();
  return std::expm1(r);
}

double residual_torus(const Vec& y, const Mat& data, const ModelParams& params,
                      double h, const LatticeBox& box) {
  return residual_from_logs(torus_kde_log(y, data, h),
                            smoothed_wn_log(y, params, h, box));
}

namespace {

double gaussian_log_density(const Vec& x, const Vec& mu, const Mat& sigma) {
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("residual_unwrapped: smoothed sigma not SPD");
  const Mat L = llt.matrixL();
  double log_det_half = 0.0;
  for (Eigen::Index d = 0; d < L.rows(); ++d) log_det_half += std::log(L(d, d));
  const Vec v = llt.matrixL().solve(x - mu);
  return -0.5 * static_cast<double>(x.size()) * std::log(kTwoPi) - log_det_half -
         0.5 * v.squaredNorm();
}

}  // namespace

double residual_unwrapped(const Vec& x, const Mat& unwrapped_data,
                          const ModelParams& params, double h, UnwrapForm form) {
  Mat smoothed = params.sigma;
  smoothed.diagonal().array() += h * h;
  double log_model = gaussian_log_density(x, params.mu, smoothed);
  if (form == UnwrapForm::Exact) {
    constexpr double kPi = 3.141592653589793238462643383280;
    for (Eigen::Index d = 0; d < x.size(); ++d) {
      const double z = x[d] - params.mu[d];
      if (z <= -kPi || z > kPi) {
        log_model = -std::numeric_limits<double>::infinity();
        break;
      }
    }
  }
  return residual_from_logs(linear_kde_log(x, unwrapped_data, h), log_model);
}

double residual_distance(double d2, const Vec& distance_sample,
                         const ModelParams& params, int p,
                         DistanceReference mode, double bandwidth) {
  if (d2 < 0.0) throw std::invalid_argument("residual_distance: d2 >= 0");
  const double fhat = distance_kde(d2, distance_sample, bandwidth);
  double ref;
  if (mode == DistanceReference::Chi2) {
    ref = chi2_pdf(d2, p);
  } else {
    ref = chi2_unwrapped_density(d2, params);
  }
  if (ref <= 0.0)
    return fhat > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return residual_from_logs(std::log(std::max(fhat, 1e-300)), std::log(ref));
}

}  // namespace wrapfit
