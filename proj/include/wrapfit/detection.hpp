#pragma once

#include <optional>
#include <vector>

#include "wrapfit/estimators.hpp"

namespace wrapfit {

struct DetectionReport {
  std::vector<bool> flags;         // d2 above the cutoff
  Vec d2;                          // robust squared distances of x-hat
  double cutoff = 0.0;
  double alpha = 0.01;
  std::vector<bool> weight_flags;  // weight below the weight threshold
};

// Distance rule on the fitted unwrapped data. The cutoff is the
// chi-square (1 - alpha) quantile with p degrees of freedom, or its Monte
// Carlo counterpart under the fitted wrapped-unwrapped model.
DetectionReport detect_by_distance(
    const FitResult& fit, double alpha = 0.01,
    DistanceReference reference = DistanceReference::Chi2,
    double weight_threshold = 0.5);

// Weight rule alone: flags[i] = weights[i] < threshold.
std::vector<bool> detect_by_weight(const FitResult& fit, double threshold = 0.5);

struct SwampingPower {
  double swamping = 0.0;                 // flagged fraction among genuine
  std::optional<double> power;           // flagged fraction among outliers
};

SwampingPower swamping_and_power(const std::vector<bool>& flags,
                                 const std::vector<bool>& true_outlier_mask);

}  // namespace wrapfit
