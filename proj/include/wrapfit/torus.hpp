#pragma once

#include <Eigen/Dense>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace wrapfit {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

inline constexpr double kTwoPi = 6.283185307179586476925286766559;

struct NotPositiveDefinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct LatticeCapExceeded : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSample : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Location mu in [0, 2pi)^p plus SPD scatter matrix.
struct ModelParams {
  Vec mu;
  Mat sigma;

  int dim() const { return static_cast<int>(mu.size()); }
  // Throws NotPositiveDefinite / std::invalid_argument on bad input.
  void validate() const;
};

// Unimodal elliptical generator h(.) with its normalizing constant.
// h must be strictly decreasing and non-negative; log_norm(p) is
// log c_p such that c_p |Sigma|^{-1/2} h(d^2) integrates to one.
struct EllipticalGenerator {
  std::function<double(double)> log_h;
  std::function<double(double)> hprime_over_h;  // h'(t) / h(t), < 0
  std::function<double(int)> log_norm;

  // h(t) = exp(-t/2), c_p = (2 pi)^{-p/2}: the wrapped normal family.
  static const EllipticalGenerator& normal();
};

// Truncated set of wrapping coefficients {-J..J}^p.
struct LatticeBox {
  int J = 2;
  int p = 1;

  std::size_t size() const;
  // Smallest J covering mu_d +/- 4 sqrt(Sigma_dd) within (-2 pi J, 2 pi J]
  // for every coordinate. user_J >= 0 overrides the rule.
  static LatticeBox adequate(const ModelParams& params, int user_J = -1);
};

// All lattice vectors of the box in lexicographic order; errors out above
// the evaluation cap of 10^6 points.
std::vector<Eigen::VectorXi> lattice_enumerate(const LatticeBox& box);

// Row l holds 2 pi j_l for the l-th lattice vector (same order as above).
Mat lattice_offsets(const LatticeBox& box);

double wrap_angle(double x);
Vec wrap(const Vec& x);
Mat wrap_rows(const Mat& x);

// (x - mu)^T Sigma^{-1} (x - mu) via Cholesky.
double mahalanobis_sq(const Vec& x, const ModelParams& params);

// Density of the wrapped elliptical model, truncated to the box.
double wrapped_log_density(const Vec& y, const ModelParams& params,
                           const EllipticalGenerator& gen, const LatticeBox& box);
double wrapped_density(const Vec& y, const ModelParams& params,
                       const EllipticalGenerator& gen, const LatticeBox& box);

// Sum of log wrapped densities over the rows of data.
double log_likelihood(const Mat& data, const ModelParams& params,
                      const EllipticalGenerator& gen, const LatticeBox& box);

// Circular summaries. circular_mean throws DegenerateSample when the
// resultant length is below 1e-12.
double circular_mean(const Eigen::Ref<const Vec>& angles);
double mean_resultant_length(const Eigen::Ref<const Vec>& angles);
double circular_correlation(const Eigen::Ref<const Vec>& a,
                            const Eigen::Ref<const Vec>& b);

// Componentwise sqrt(2 (1 - cos(a - b))).
Vec angular_separation(const Vec& mu_a, const Vec& mu_b);

// Componentwise shift of y into the cube (mu_d - pi, mu_d + pi].
Vec unwrap_to_box(const Vec& y, const Vec& mu);

// Prefactored wrapped model for repeated evaluation against one parameter
// set: Cholesky of Sigma and the lattice offsets are computed once.
class WrappedModel {
 public:
  WrappedModel(const ModelParams& params, const EllipticalGenerator& gen,
               const LatticeBox& box);

  double log_density(const Vec& y) const;
  const ModelParams& params() const { return params_; }
  const Mat& offsets() const { return offsets_; }
  const Eigen::LLT<Mat>& llt() const { return llt_; }
  double log_norm() const { return log_norm_; }
  const EllipticalGenerator& generator() const { return *gen_; }

  // log h(d^2(y + 2 pi j_l; params)) + log_norm for every lattice point.
  Vec lattice_log_terms(const Vec& y) const;
  double mahalanobis_sq_at(const Vec& x) const;

 private:
  ModelParams params_;
  const EllipticalGenerator* gen_;
  Eigen::LLT<Mat> llt_;
  double log_norm_;  // log c_p - 0.5 log|Sigma|
  Mat offsets_;
};

}  // namespace wrapfit
