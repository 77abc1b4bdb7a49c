#include "wrapfit/detection.hpp"

#include <stdexcept>

#include "wrapfit/special.hpp"

namespace wrapfit {

DetectionReport detect_by_distance(const FitResult& fit, double alpha,
                                   DistanceReference reference,
                                   double weight_threshold) {
  if (!(alpha > 0.0) || !(alpha < 1.0))
    throw std::invalid_argument("detect_by_distance: 0 < alpha < 1");
  if (fit.unwrapped.rows() < 1)
    throw std::invalid_argument("detect_by_distance: fit has no unwrapped data");
  const int n = static_cast<int>(fit.unwrapped.rows());
  const int p = fit.params.dim();

  DetectionReport report;
  report.alpha = alpha;
  report.d2.resize(n);
  Eigen::LLT<Mat> llt(fit.params.sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("detect_by_distance: sigma not SPD");
  for (int i = 0; i < n; ++i) {
    const Vec v =
        llt.matrixL().solve(fit.unwrapped.row(i).transpose() - fit.params.mu);
    report.d2[i] = v.squaredNorm();
  }
  report.cutoff = reference == DistanceReference::Chi2
                      ? chi2_quantile(1.0 - alpha, p)
                      : chi2_unwrapped_quantile(1.0 - alpha, fit.params);
  report.flags.resize(n);
  for (int i = 0; i < n; ++i) report.flags[i] = report.d2[i] > report.cutoff;
  report.weight_flags = detect_by_weight(fit, weight_threshold);
  return report;
}

std::vector<bool> detect_by_weight(const FitResult& fit, double threshold) {
  if (!(threshold > 0.0) || !(threshold < 1.0))
    throw std::invalid_argument("detect_by_weight: 0 < threshold < 1");
  std::vector<bool> flags(static_cast<std::size_t>(fit.weights.size()));
  for (Eigen::Index i = 0; i < fit.weights.size(); ++i)
    flags[static_cast<std::size_t>(i)] = fit.weights[i] < threshold;
  return flags;
}

SwampingPower swamping_and_power(const std::vector<bool>& flags,
                                 const std::vector<bool>& true_outlier_mask) {
  if (flags.size() != true_outlier_mask.size())
    throw std::invalid_argument("swamping_and_power: length mismatch");
  int genuine = 0, genuine_flagged = 0, outliers = 0, outliers_flagged = 0;
  for (std::size_t i = 0; i < flags.size(); ++i) {
    if (true_outlier_mask[i]) {
      ++outliers;
      if (flags[i]) ++outliers_flagged;
    } else {
      ++genuine;
      if (flags[i]) ++genuine_flagged;
    }
  }
  SwampingPower out;
  out.swamping = genuine > 0 ? static_cast<double>(genuine_flagged) / genuine : 0.0;
  if (outliers > 0)
    out.power = static_cast<double>(outliers_flagged) / outliers;
  return out;
}

}  // namespace wrapfit
