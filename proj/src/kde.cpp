#include "wrapfit/kde.hpp"

#include <algorithm>
#include <cmath>

#include "wrapfit/rng.hpp"

namespace wrapfit {

namespace {

constexpr double kLogTwoPi = 1.8378770664093454835606594728112;

int kernel_J(double h) {
  // Adequacy rule for the kernel scale: 4h within (-2 pi J, 2 pi J].
  return std::max(1, static_cast<int>(std::ceil(4.0 * h / kTwoPi)));
}

double log_sum_exp_max(const std::vector<double>& terms, double m) {
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace

Vec torus_kde_log_rows(const Mat& query, const Mat& data, double h) {
  if (data.rows() < 1) throw std::invalid_argument("torus_kde: empty data");
  if (!(h > 0.0)) throw std::invalid_argument("torus_kde: bandwidth must be > 0");
  const int p = static_cast<int>(data.cols());
  const Mat off = lattice_offsets(LatticeBox{kernel_J(h), p});
  const Eigen::Index L = off.rows();
  const double log_norm = -0.5 * p * kLogTwoPi - p * std::log(h);
  const double inv2h2 = 0.5 / (h * h);

  Vec out(query.rows());
  std::vector<double> terms(static_cast<std::size_t>(data.rows() * L));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    double m = -std::numeric_limits<double>::infinity();
    std::size_t t = 0;
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      for (Eigen::Index l = 0; l < L; ++l, ++t) {
        const double d2 =
            (query.row(q) - data.row(i) + off.row(l)).squaredNorm();
        const double val = log_norm - d2 * inv2h2;
        terms[t] = val;
        if (val > m) m = val;
      }
    }
    out[q] = log_sum_exp_max(terms, m) - std::log(static_cast<double>(data.rows()));
  }
  return out;
}

double torus_kde_log(const Vec& y, const Mat& data, double h) {
  Mat q(1, y.size());
  q.row(0) = y.transpose();
  return torus_kde_log_rows(q, data, h)[0];
}

double torus_kde(const Vec& y, const Mat& data, double h) {
  return std::exp(torus_kde_log(y, data, h));
}

Vec linear_kde_log_rows(const Mat& query, const Mat& data, double h) {
  if (data.rows() < 1) throw std::invalid_argument("linear_kde: empty data");
  if (!(h > 0.0)) throw std::invalid_argument("linear_kde: bandwidth must be > 0");
  const int p = static_cast<int>(data.cols());
  const double log_norm = -0.5 * p * kLogTwoPi - p * std::log(h);
  const double inv2h2 = 0.5 / (h * h);
  Vec out(query.rows());
  std::vector<double> terms(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index q = 0; q < query.rows(); ++q) {
    double m = -std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < data.rows(); ++i) {
      const double val =
          log_norm - (query.row(q) - data.row(i)).squaredNorm() * inv2h2;
      terms[static_cast<std::size_t>(i)] = val;
      if (val > m) m = val;
    }
    out[q] = log_sum_exp_max(terms, m) - std::log(static_cast<double>(data.rows()));
  }
  return out;
}

double linear_kde_log(const Vec& x, const Mat& data, double h) {
  Mat q(1, x.size());
  q.row(0) = x.transpose();
  return linear_kde_log_rows(q, data, h)[0];
}

double linear_kde(const Vec& x, const Mat& data, double h) {
  return std::exp(linear_kde_log(x, data, h));
}

double smoothed_wn_log(const Vec& y, const ModelParams& params, double h,
                       const LatticeBox& box) {
  ModelParams smoothed{params.mu, params.sigma};
  smoothed.sigma.diagonal().array() += h * h;
  return wrapped_log_density(y, smoothed, EllipticalGenerator::normal(), box);
}

double smoothed_wn(const Vec& y, const ModelParams& params, double h,
                   const LatticeBox& box) {
  return std::exp(smoothed_wn_log(y, params, h, box));
}

double distance_kde_bandwidth(const Vec& sample) {
  const Eigen::Index n = sample.size();
  if (n < 2) return 1.0;
  Vec logs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    logs[i] = std::log(std::max(sample[i], 1e-300));
  const double mean = logs.mean();
  const double sd = std::sqrt((logs.array() - mean).square().sum() /
                              static_cast<double>(n - 1));
  const double b = 1.06 * sd * std::pow(static_cast<double>(n), -0.2);
  return std::max(b, 1e-3);
}

Vec distance_kde_at(const Vec& query, const Vec& sample, double bandwidth) {
  if (sample.size() < 1) throw std::invalid_argument("distance_kde: empty sample");
  const double b = bandwidth > 0.0 ? bandwidth : distance_kde_bandwidth(sample);
  const Eigen::Index n = sample.size();
  Vec logs(n);
  for (Eigen::Index i = 0; i < n; ++i)
    logs[i] = std::log(std::max(sample[i], 1e-300));
  const double c = 1.0 / (std::sqrt(kTwoPi) * b * static_cast<double>(n));
  Vec out(query.size());
  for (Eigen::Index q = 0; q < query.size(); ++q) {
    if (!(query[q] > 0.0)) {
      out[q] = 0.0;
      continue;
    }
    const double lq = std::log(query[q]);
    double s = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double u = (lq - logs[i]) / b;
      s += std::exp(-0.5 * u * u);
    }
    out[q] = c * s / query[q];
  }
  return out;
}

double distance_kde(double d2, const Vec& sample, double bandwidth) {
  Vec q(1);
  q[0] = d2;
  return distance_kde_at(q, sample, bandwidth)[0];
}

UnwrappedDistanceSample sample_unwrapped_distances(const ModelParams& params,
                                                   int mc_size,
                                                   std::uint64_t seed) {
  if (mc_size < 1000)
    throw std::invalid_argument("sample_unwrapped_distances: mc_size >= 1000");
  params.validate();
  const int p = params.dim();
  Eigen::LLT<Mat> llt(params.sigma);
  const Mat L = llt.matrixL();
  Rng rng(seed);

  UnwrappedDistanceSample out;
  out.d2.resize(mc_size);
  double max_std_sq = 0.0;
  Vec z(p);
  for (int i = 0; i < mc_size; ++i) {
    for (int d = 0; d < p; ++d) z[d] = rng.normal();
    const Vec x = params.mu + L * z;
    const Vec xu = unwrap_to_box(wrap(x), params.mu);
    const Vec w = llt.matrixL().solve(xu - params.mu);
    out.d2[i] = w.squaredNorm();
    // componentwise support probe against the marginal scales
    for (int d = 0; d < p; ++d) {
      const double s = (xu[d] - params.mu[d]) * (xu[d] - params.mu[d]) /
                       params.sigma(d, d);
      if (s > max_std_sq) max_std_sq = s;
    }
  }
  out.support_estimate = static_cast<double>(p) * max_std_sq;
  return out;
}

double chi2_unwrapped_density(double d2, const ModelParams& params, int mc_size,
                              std::uint64_t seed, double bandwidth) {
  const auto mc = sample_unwrapped_distances(params, mc_size, seed);
  return distance_kde(d2, mc.d2, bandwidth);
}

double chi2_unwrapped_quantile(double prob, const ModelParams& params,
                               int mc_size, std::uint64_t seed) {
  if (!(prob > 0.0) || !(prob < 1.0))
    throw std::invalid_argument("chi2_unwrapped_quantile: 0 < prob < 1");
  auto mc = sample_unwrapped_distances(params, mc_size, seed);
  std::vector<double> v(mc.d2.data(), mc.d2.data() + mc.d2.size());
  const std::size_t k =
      std::min(v.size() - 1,
               static_cast<std::size_t>(prob * static_cast<double>(v.size())));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k), v.end());
  return v[k];
}

}  // namespace wrapfit
