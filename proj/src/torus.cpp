#include "wrapfit/torus.hpp"

#include <cmath>
#include <limits>

namespace wrapfit {

namespace {

double log_sum_exp(const Vec& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

}  // namespace

void ModelParams::validate() const {
  if (mu.size() < 1) throw std::invalid_argument("ModelParams: dimension must be >= 1");
  if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
    throw std::invalid_argument("ModelParams: sigma shape mismatch");
  for (Eigen::Index d = 0; d < mu.size(); ++d) {
    if (!std::isfinite(mu[d]) || mu[d] < 0.0 || mu[d] >= kTwoPi)
      throw std::invalid_argument("ModelParams: mu must lie in [0, 2pi)");
  }
  if (!sigma.isApprox(sigma.transpose(), 1e-10))
    throw std::invalid_argument("ModelParams: sigma must be symmetric");
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("ModelParams: sigma is not positive definite");
}

const EllipticalGenerator& EllipticalGenerator::normal() {
  static const EllipticalGenerator gen{
      [](double t) { return -0.5 * t; },
      [](double) { return -0.5; },
      [](int p) { return -0.5 * p * std::log(kTwoPi); }};
  return gen;
}

std::size_t LatticeBox::size() const {
  std::size_t n = 1;
  const std::size_t side = static_cast<std::size_t>(2 * J + 1);
  for (int d = 0; d < p; ++d) {
    if (n > 4000000u / side) return 4000001u;  // saturate past the cap
    n *= side;
  }
  return n;
}

LatticeBox LatticeBox::adequate(const ModelParams& params, int user_J) {
  const int p = params.dim();
  if (user_J >= 0) return LatticeBox{user_J, p};
  int J = 1;
  for (int d = 0; d < p; ++d) {
    const double sd = std::sqrt(params.sigma(d, d));
    const double hi = std::fabs(params.mu[d]) + 4.0 * sd;
    const int need = static_cast<int>(std::ceil(hi / kTwoPi + 1e-12));
    if (need > J) J = need;
  }
  return LatticeBox{J, p};
}

static void check_cap(const LatticeBox& box) {
  if (box.J < 0 || box.p < 1)
    throw std::invalid_argument("LatticeBox: need J >= 0 and p >= 1");
  if (box.size() > 1000000u)
    throw LatticeCapExceeded("lattice box exceeds the 10^6 point cap");
}

std::vector<Eigen::VectorXi> lattice_enumerate(const LatticeBox& box) {
  check_cap(box);
  std::vector<Eigen::VectorXi> out;
  out.reserve(box.size());
  Eigen::VectorXi j = Eigen::VectorXi::Constant(box.p, -box.J);
  while (true) {
    out.push_back(j);
    int d = box.p - 1;
    while (d >= 0 && j[d] == box.J) {
      j[d] = -box.J;
      --d;
    }
    if (d < 0) break;
    ++j[d];
  }
  return out;
}

Mat lattice_offsets(const LatticeBox& box) {
  const auto js = lattice_enumerate(box);
  Mat off(static_cast<Eigen::Index>(js.size()), box.p);
  for (std::size_t l = 0; l < js.size(); ++l)
    off.row(static_cast<Eigen::Index>(l)) = js[l].cast<double>().transpose() * kTwoPi;
  return off;
}

double wrap_angle(double x) {
  if (!std::isfinite(x)) throw std::domain_error("wrap: non-finite input");
  double y = std::fmod(x, kTwoPi);
  if (y < 0.0) y += kTwoPi;
  if (y >= kTwoPi) y = 0.0;  // fmod rounding at the boundary
  return y;
}

Vec wrap(const Vec& x) {
  Vec y(x.size());
  for (Eigen::Index d = 0; d < x.size(); ++d) y[d] = wrap_angle(x[d]);
  return y;
}

Mat wrap_rows(const Mat& x) {
  Mat y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index d = 0; d < x.cols(); ++d) y(i, d) = wrap_angle(x(i, d));
  return y;
}

double mahalanobis_sq(const Vec& x, const ModelParams& params) {
  Eigen::LLT<Mat> llt(params.sigma);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("mahalanobis_sq: sigma is not positive definite");
  const Vec v = llt.matrixL().solve(x - params.mu);
  return v.squaredNorm();
}

WrappedModel::WrappedModel(const ModelParams& params, const EllipticalGenerator& gen,
                           const LatticeBox& box)
    : params_(params), gen_(&gen), llt_(params.sigma) {
  if (llt_.info() != Eigen::Success)
    throw NotPositiveDefinite("WrappedModel: sigma is not positive definite");
  check_cap(box);
  double log_det_half = 0.0;
  const Mat L = llt_.matrixL();
  for (Eigen::Index d = 0; d < L.rows(); ++d) log_det_half += std::log(L(d, d));
  log_norm_ = gen.log_norm(params.dim()) - log_det_half;
  offsets_ = lattice_offsets(box);
}

double WrappedModel::mahalanobis_sq_at(const Vec& x) const {
  const Vec v = llt_.matrixL().solve(x - params_.mu);
  return v.squaredNorm();
}

Vec WrappedModel::lattice_log_terms(const Vec& y) const {
  const Eigen::Index L = offsets_.rows();
  Vec terms(L);
  for (Eigen::Index l = 0; l < L; ++l) {
    const Vec x = y + offsets_.row(l).transpose();
    terms[l] = log_norm_ + gen_->log_h(mahalanobis_sq_at(x));
  }
  return terms;
}

double WrappedModel::log_density(const Vec& y) const {
  return log_sum_exp(lattice_log_terms(y));
}

double wrapped_log_density(const Vec& y, const ModelParams& params,
                           const EllipticalGenerator& gen, const LatticeBox& box) {
  return WrappedModel(params, gen, box).log_density(y);
}

double wrapped_density(const Vec& y, const ModelParams& params,
                       const EllipticalGenerator& gen, const LatticeBox& box) {
  return std::exp(wrapped_log_density(y, params, gen, box));
}

double log_likelihood(const Mat& data, const ModelParams& params,
                      const EllipticalGenerator& gen, const LatticeBox& box) {
  if (data.rows() < 1) throw std::invalid_argument("log_likelihood: empty data");
  WrappedModel model(params, gen, box);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    ll += model.log_density(data.row(i).transpose());
  return ll;
}

double mean_resultant_length(const Eigen::Ref<const Vec>& angles) {
  if (angles.size() < 1) throw std::invalid_argument("mean_resultant_length: empty");
  const double c = angles.array().cos().mean();
  const double s = angles.array().sin().mean();
  return std::sqrt(c * c + s * s);
}

double circular_mean(const Eigen::Ref<const Vec>& angles) {
  if (angles.size() < 1) throw std::invalid_argument("circular_mean: empty");
  const double c = angles.array().cos().mean();
  const double s = angles.array().sin().mean();
  if (std::sqrt(c * c + s * s) < 1e-12)
    throw DegenerateSample("circular_mean: resultant length ~ 0");
  return wrap_angle(std::atan2(s, c));
}

double circular_correlation(const Eigen::Ref<const Vec>& a,
                            const Eigen::Ref<const Vec>& b) {
  if (a.size() != b.size() || a.size() < 2)
    throw std::invalid_argument("circular_correlation: size mismatch");
  const double ma = circular_mean(a);
  const double mb = circular_mean(b);
  const Vec sa = (a.array() - ma).sin();
  const Vec sb = (b.array() - mb).sin();
  const double den = std::sqrt(sa.squaredNorm() * sb.squaredNorm());
  if (den < 1e-300)
    throw DegenerateSample("circular_correlation: degenerate marginals");
  return sa.dot(sb) / den;
}

Vec angular_separation(const Vec& mu_a, const Vec& mu_b) {
  if (mu_a.size() != mu_b.size())
    throw std::invalid_argument("angular_separation: size mismatch");
  Vec g(mu_a.size());
  for (Eigen::Index d = 0; d < g.size(); ++d) {
    const double c = std::cos(mu_a[d] - mu_b[d]);
    g[d] = std::sqrt(std::max(0.0, 2.0 * (1.0 - c)));
  }
  return g;
}

Vec unwrap_to_box(const Vec& y, const Vec& mu) {
  Vec x(y.size());
  for (Eigen::Index d = 0; d < y.size(); ++d) {
    double z = std::fmod(y[d] - mu[d], kTwoPi);
    if (z <= -3.141592653589793238462643383280) z += kTwoPi;
    if (z > 3.141592653589793238462643383280) z -= kTwoPi;
    x[d] = mu[d] + z;
  }
  return x;
}

}  // namespace wrapfit
