#include "wrapfit/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "wrapfit/special.hpp"

namespace wrapfit {

namespace {

constexpr double kPi = 3.141592653589793238462643383280;

bool is_cem_family(EstimatorKind k) {
  return k == EstimatorKind::Cem || k == EstimatorKind::WcemTorus ||
         k == EstimatorKind::WcemUnwrap || k == EstimatorKind::WcemDist;
}

bool is_weighted(EstimatorKind k) {
  return k == EstimatorKind::Wem || k == EstimatorKind::WcemTorus ||
         k == EstimatorKind::WcemUnwrap || k == EstimatorKind::WcemDist;
}

// Sigma <- Sigma + r I with escalating r until Cholesky succeeds.
bool ridge_repair(Mat& sigma, bool& ridged) {
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() == Eigen::Success && sigma.diagonal().minCoeff() > 0.0)
    return true;
  const int p = static_cast<int>(sigma.rows());
  double r = std::max(1e-8 * sigma.trace() / p, 1e-12);
  for (int attempt = 0; attempt < 24; ++attempt) {
    Mat repaired = sigma + r * Mat::Identity(p, p);
    Eigen::LLT<Mat> test(repaired);
    if (test.info() == Eigen::Success) {
      sigma = repaired;
      ridged = true;
      return true;
    }
    r *= 10.0;
  }
  return false;
}

struct EStepSums {
  double loglik = 0.0;
  double sum_w = 0.0;
  double sw0 = 0.0;  // sum_i w_i sum_l v_il
  Vec sw1;           // sum_i w_i sum_l v_il x_il
  Mat sw2;           // sum_i w_i sum_l v_il x_il x_il^T
};

// One fitting problem: data, estimator kind, configuration, caches.
class Engine {
 public:
  Engine(const Mat& data, EstimatorKind kind, const FitConfig& cfg,
         const EllipticalGenerator& gen)
      : data_(data),
        n_(static_cast<int>(data.rows())),
        p_(static_cast<int>(data.cols())),
        kind_(kind),
        cfg_(cfg),
        gen_(gen) {
    if (is_weighted(kind_) && kind_ != EstimatorKind::WcemDist &&
        !(cfg_.bandwidth > 0.0))
      throw std::invalid_argument("fit: bandwidth must be > 0 for this estimator");
    if (kind_ == EstimatorKind::Wem || kind_ == EstimatorKind::WcemTorus)
      logf_torus_ = torus_kde_log_rows(data_, data_, cfg_.bandwidth);
  }

  LatticeBox box_for(const ModelParams& params) const {
    return LatticeBox::adequate(params, cfg_.lattice_J);
  }

  // Weights from the torus residuals at the current parameters.
  void torus_weights(const ModelParams& params, const LatticeBox& box, Vec& w,
                     Vec& delta) const {
    ModelParams smoothed = params;
    smoothed.sigma.diagonal().array() += cfg_.bandwidth * cfg_.bandwidth;
    WrappedModel model(smoothed, EllipticalGenerator::normal(), box);
    for (int i = 0; i < n_; ++i) {
      delta[i] = residual_from_logs(logf_torus_[i],
                                    model.log_density(data_.row(i).transpose()));
      w[i] = weight_from_residual(delta[i], cfg_.raf);
    }
  }

  void unwrap_weights(const ModelParams& params, const Mat& xhat, Vec& w,
                      Vec& delta) const {
    const Vec logf = linear_kde_log_rows(xhat, xhat, cfg_.bandwidth);
    Mat smoothed = params.sigma;
    smoothed.diagonal().array() += cfg_.bandwidth * cfg_.bandwidth;
    Eigen::LLT<Mat> llt(smoothed);
    if (llt.info() != Eigen::Success)
      throw NotPositiveDefinite("unwrap weights: smoothed sigma not SPD");
    double log_det_half = 0.0;
    const Mat L = llt.matrixL();
    for (int d = 0; d < p_; ++d) log_det_half += std::log(L(d, d));
    const double base = -0.5 * p_ * std::log(kTwoPi) - log_det_half;
    for (int i = 0; i < n_; ++i) {
      const Vec x = xhat.row(i).transpose();
      double log_model;
      if (cfg_.unwrap_form == UnwrapForm::Exact &&
          ((x - params.mu).array().abs() > kPi).any()) {
        log_model = -std::numeric_limits<double>::infinity();
      } else {
        const Vec v = llt.matrixL().solve(x - params.mu);
        log_model = base - 0.5 * v.squaredNorm();
      }
      delta[i] = residual_from_logs(logf[i], log_model);
      w[i] = weight_from_residual(delta[i], cfg_.raf);
    }
  }

  void dist_weights(const Vec& d2, Vec& w, Vec& delta) const {
    const Vec fhat = distance_kde_at(d2, d2, cfg_.bandwidth);
    for (int i = 0; i < n_; ++i) {
      const double ref = chi2_pdf(d2[i], p_);
      if (ref <= 0.0) {
        delta[i] = fhat[i] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
      } else {
        delta[i] =
            residual_from_logs(std::log(std::max(fhat[i], 1e-300)), std::log(ref));
      }
      w[i] = weight_from_residual(delta[i], cfg_.raf);
    }
  }

  // Expected-sufficient-statistic pass for the fixed-point update. The
  // v terms are (h'/h)(d^2) * omega, so the normal generator contributes
  // the exact factor -1/2 that cancels in the updates.
  EStepSums estep_accumulate(const WrappedModel& model, const Vec& w) const {
    EStepSums s;
    s.sw1 = Vec::Zero(p_);
    s.sw2 = Mat::Zero(p_, p_);
    const Mat& off = model.offsets();
    const Eigen::Index L = off.rows();
    Vec terms(L), d2(L);
    for (int i = 0; i < n_; ++i) {
      const Vec y = data_.row(i).transpose();
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index l = 0; l < L; ++l) {
        const Vec x = y + off.row(l).transpose();
        d2[l] = model.mahalanobis_sq_at(x);
        terms[l] = model.log_norm() + model.generator().log_h(d2[l]);
        if (terms[l] > m) m = terms[l];
      }
      if (!std::isfinite(m))
        throw DegenerateSample("E-step: all lattice terms underflow");
      double z = 0.0;
      for (Eigen::Index l = 0; l < L; ++l) z += std::exp(terms[l] - m);
      s.loglik += m + std::log(z);
      s.sum_w += w[i];
      double v0 = 0.0;
      Vec v1 = Vec::Zero(p_);
      Mat v2 = Mat::Zero(p_, p_);
      for (Eigen::Index l = 0; l < L; ++l) {
        const double omega = std::exp(terms[l] - m) / z;
        if (omega < 1e-300) continue;
        const double v = model.generator().hprime_over_h(d2[l]) * omega;
        const Vec x = y + off.row(l).transpose();
        v0 += v;
        v1 += v * x;
        v2.noalias() += v * x * x.transpose();
      }
      s.sw0 += w[i] * v0;
      s.sw1 += w[i] * v1;
      s.sw2 += w[i] * v2;
    }
    return s;
  }

  // C-step pass: crisp assignments, unwrapped data, their d^2 and loglik.
  double cstep_pass(const WrappedModel& model, Mat& xhat, Eigen::MatrixXi& jhat,
                    Vec& d2min) const {
    const Mat& off = model.offsets();
    const Eigen::Index L = off.rows();
    double loglik = 0.0;
    Vec terms(L), d2(L);
    for (int i = 0; i < n_; ++i) {
      const Vec y = data_.row(i).transpose();
      double m = -std::numeric_limits<double>::infinity();
      for (Eigen::Index l = 0; l < L; ++l) {
        const Vec x = y + off.row(l).transpose();
        d2[l] = model.mahalanobis_sq_at(x);
        terms[l] = model.log_norm() + model.generator().log_h(d2[l]);
        if (terms[l] > m) m = terms[l];
      }
      if (!std::isfinite(m))
        throw DegenerateSample("C-step: all lattice terms underflow");
      double z = 0.0;
      Eigen::Index best = 0;
      double best_norm = off.row(0).squaredNorm();
      for (Eigen::Index l = 0; l < L; ++l) {
        z += std::exp(terms[l] - m);
        if (terms[l] > terms[best]) {
          best = l;
          best_norm = off.row(l).squaredNorm();
        } else if (terms[l] == terms[best] && l != best) {
          const double nrm = off.row(l).squaredNorm();
          if (nrm < best_norm) {
            best = l;
            best_norm = nrm;
          }
        }
      }
      loglik += m + std::log(z);
      xhat.row(i) = data_.row(i) + off.row(best);
      for (int d = 0; d < p_; ++d)
        jhat(i, d) = static_cast<int>(std::lround(off(best, d) / kTwoPi));
      d2min[i] = d2[best];
    }
    return loglik;
  }

  // One run of the fixed-point iteration from a starting point.
  FitResult run(const ModelParams& start, int candidate_index) const {
    FitResult res;
    res.kind = kind_;
    res.candidate_index = candidate_index;
    ModelParams theta = start;
    theta.mu = wrap(theta.mu);

    Vec w = Vec::Ones(n_);
    Vec delta = Vec::Zero(n_);
    Mat xhat(n_, p_);
    Eigen::MatrixXi jhat(n_, p_);
    Vec d2min(n_);

    for (int it = 0; it < cfg_.max_iter; ++it) {
      const LatticeBox box = box_for(theta);
      WrappedModel model(theta, gen_, box);
      IterationStats stats;
      ModelParams next = theta;

      if (!is_cem_family(kind_)) {
        if (kind_ == EstimatorKind::Wem)
          torus_weights(theta, box, w, delta);
        const EStepSums s = estep_accumulate(model, w);
        stats.log_lik = s.loglik;
        if (std::fabs(s.sw0) < 1e-300)
          throw DegenerateSample("fixed-point update: zero denominator");
        next.mu = s.sw1 / s.sw0;
        const Vec mu = next.mu;
        Mat scatter = s.sw2 - mu * s.sw1.transpose() - s.sw1 * mu.transpose() +
                      s.sw0 * mu * mu.transpose();
        next.sigma = -2.0 / s.sum_w * scatter;
      } else {
        const double loglik = cstep_pass(model, xhat, jhat, d2min);
        stats.log_lik = loglik;
        if (kind_ == EstimatorKind::WcemTorus) {
          torus_weights(theta, box, w, delta);
        } else if (kind_ == EstimatorKind::WcemUnwrap) {
          unwrap_weights(theta, xhat, w, delta);
        } else if (kind_ == EstimatorKind::WcemDist) {
          dist_weights(d2min, w, delta);
        }
        const double sum_w = w.sum();
        if (is_weighted(kind_) && sum_w < p_ + 1)
          throw DegenerateSample("weighted update: weight sum below p + 1");
        double denom = 0.0;
        Vec num = Vec::Zero(p_);
        for (int i = 0; i < n_; ++i) {
          const double wh = w[i] * gen_.hprime_over_h(d2min[i]);
          denom += wh;
          num += wh * xhat.row(i).transpose();
        }
        if (std::fabs(denom) < 1e-300)
          throw DegenerateSample("classification update: zero denominator");
        next.mu = num / denom;
        Mat scatter = Mat::Zero(p_, p_);
        for (int i = 0; i < n_; ++i) {
          const Vec c = xhat.row(i).transpose() - next.mu;
          scatter.noalias() +=
              w[i] * gen_.hprime_over_h(d2min[i]) * c * c.transpose();
        }
        next.sigma = -2.0 / sum_w * scatter;
      }

      next.sigma = 0.5 * (next.sigma + next.sigma.transpose());
      if (!ridge_repair(next.sigma, stats.ridged))
        throw NotPositiveDefinite("scatter update could not be repaired");
      const Vec mu_wrapped = wrap(next.mu);
      stats.mu_change = angular_separation(next.mu, theta.mu).maxCoeff();
      stats.sigma_change = (next.sigma - theta.sigma).norm();
      stats.mean_weight = w.mean();
      next.mu = mu_wrapped;

      res.trace.push_back(stats);
      res.iterations = it + 1;
      const bool done = std::max(stats.mu_change, stats.sigma_change) < cfg_.tol;
      theta = next;
      if (done) {
        res.converged = true;
        break;
      }
    }

    // Final per-observation quantities at the converged parameters.
    const LatticeBox box = box_for(theta);
    WrappedModel model(theta, gen_, box);
    res.log_lik = cstep_pass(model, xhat, jhat, d2min);
    if (kind_ == EstimatorKind::Wem || kind_ == EstimatorKind::WcemTorus) {
      torus_weights(theta, box, w, delta);
    } else if (kind_ == EstimatorKind::WcemUnwrap) {
      unwrap_weights(theta, xhat, w, delta);
    } else if (kind_ == EstimatorKind::WcemDist) {
      dist_weights(d2min, w, delta);
    }
    res.params = theta;
    res.unwrapped = xhat;
    res.j_hat = jhat;
    if (is_weighted(kind_)) {
      res.weights = w;
      res.residuals = delta;
      res.low_weight_warning = w.mean() < cfg_.low_weight_warning;
    } else {
      res.weights = Vec::Ones(n_);
    }
    return res;
  }

  // Scheme residuals at arbitrary torus points for root scoring.
  Vec residuals_at(const FitResult& fit, const Mat& query) const {
    const LatticeBox box = box_for(fit.params);
    WrappedModel model(fit.params, gen_, box);
    const int q = static_cast<int>(query.rows());
    Vec out(q);
    if (kind_ == EstimatorKind::Wem || kind_ == EstimatorKind::WcemTorus) {
      const Vec logf = torus_kde_log_rows(query, data_, cfg_.bandwidth);
      ModelParams smoothed = fit.params;
      smoothed.sigma.diagonal().array() += cfg_.bandwidth * cfg_.bandwidth;
      WrappedModel sm(smoothed, EllipticalGenerator::normal(), box);
      for (int i = 0; i < q; ++i)
        out[i] = residual_from_logs(logf[i],
                                    sm.log_density(query.row(i).transpose()));
      return out;
    }
    Mat xq(q, p_);
    Vec d2q(q);
    {
      const Mat& off = model.offsets();
      const Eigen::Index L = off.rows();
      for (int i = 0; i < q; ++i) {
        const Vec y = query.row(i).transpose();
        Eigen::Index best = 0;
        double best_term = -std::numeric_limits<double>::infinity();
        double best_norm = 0.0;
        double d2best = 0.0;
        for (Eigen::Index l = 0; l < L; ++l) {
          const Vec x = y + off.row(l).transpose();
          const double d2 = model.mahalanobis_sq_at(x);
          const double term = model.generator().log_h(d2);
          const double nrm = off.row(l).squaredNorm();
          if (term > best_term ||
              (term == best_term && nrm < best_norm)) {
            best = l;
            best_term = term;
            best_norm = nrm;
            d2best = d2;
          }
        }
        xq.row(i) = query.row(i) + off.row(best);
        d2q[i] = d2best;
      }
    }
    if (kind_ == EstimatorKind::WcemUnwrap) {
      const Vec logf = linear_kde_log_rows(xq, fit.unwrapped, cfg_.bandwidth);
      Mat smoothed = fit.params.sigma;
      smoothed.diagonal().array() += cfg_.bandwidth * cfg_.bandwidth;
      Eigen::LLT<Mat> llt(smoothed);
      double log_det_half = 0.0;
      const Mat L = llt.matrixL();
      for (int d = 0; d < p_; ++d) log_det_half += std::log(L(d, d));
      const double base = -0.5 * p_ * std::log(kTwoPi) - log_det_half;
      for (int i = 0; i < q; ++i) {
        const Vec v = llt.matrixL().solve(xq.row(i).transpose() - fit.params.mu);
        out[i] = residual_from_logs(logf[i], base - 0.5 * v.squaredNorm());
      }
      return out;
    }
    // distance scheme
    Vec d2data(n_);
    for (int i = 0; i < n_; ++i)
      d2data[i] = model.mahalanobis_sq_at(fit.unwrapped.row(i).transpose());
    const Vec fhat = distance_kde_at(d2q, d2data, cfg_.bandwidth);
    for (int i = 0; i < q; ++i) {
      const double ref = chi2_pdf(d2q[i], p_);
      out[i] = ref <= 0.0
                   ? (fhat[i] > 0.0 ? std::numeric_limits<double>::infinity() : 0.0)
                   : residual_from_logs(std::log(std::max(fhat[i], 1e-300)),
                                        std::log(ref));
    }
    return out;
  }

  const Mat& data() const { return data_; }
  int n() const { return n_; }
  int p() const { return p_; }
  EstimatorKind kind() const { return kind_; }
  const FitConfig& config() const { return cfg_; }
  const EllipticalGenerator& generator() const { return gen_; }

 private:
  Mat data_;
  int n_;
  int p_;
  EstimatorKind kind_;
  FitConfig cfg_;
  const EllipticalGenerator& gen_;
  Vec logf_torus_;
};

Mat model_draws(const ModelParams& params, int count, Rng& rng) {
  const int p = params.dim();
  Eigen::LLT<Mat> llt(params.sigma);
  const Mat L = llt.matrixL();
  Mat draws(count, p);
  Vec z(p);
  for (int i = 0; i < count; ++i) {
    for (int d = 0; d < p; ++d) z[d] = rng.normal();
    draws.row(i) = wrap(params.mu + L * z).transpose();
  }
  return draws;
}

double root_score_of(const Engine& engine, const FitResult& fit) {
  const FitConfig& cfg = engine.config();
  Rng rng = Rng(cfg.seed).substream(0x526f6f74ULL);
  const Mat draws = model_draws(fit.params, cfg.root_mc_draws, rng);
  const Vec delta = engine.residuals_at(fit, draws);
  int below = 0;
  for (Eigen::Index i = 0; i < delta.size(); ++i)
    if (delta[i] < cfg.root_delta_star) ++below;
  return static_cast<double>(below) / static_cast<double>(delta.size());
}

}  // namespace

std::string estimator_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Em: return "em";
    case EstimatorKind::Cem: return "cem";
    case EstimatorKind::Wem: return "wem";
    case EstimatorKind::WcemTorus: return "wcem-torus";
    case EstimatorKind::WcemUnwrap: return "wcem-unwrap";
    case EstimatorKind::WcemDist: return "wcem-dist";
  }
  return "em";
}

EstimatorKind estimator_from_name(const std::string& name) {
  if (name == "em") return EstimatorKind::Em;
  if (name == "cem") return EstimatorKind::Cem;
  if (name == "wem") return EstimatorKind::Wem;
  if (name == "wcem-torus") return EstimatorKind::WcemTorus;
  if (name == "wcem-unwrap") return EstimatorKind::WcemUnwrap;
  if (name == "wcem-dist") return EstimatorKind::WcemDist;
  throw std::invalid_argument("unknown estimator: " + name);
}

std::vector<std::pair<Eigen::VectorXi, double>> posterior_lattice_weights(
    const Vec& y, const ModelParams& params, const EllipticalGenerator& gen,
    const LatticeBox& box) {
  WrappedModel model(params, gen, box);
  const Vec terms = model.lattice_log_terms(y);
  const double m = terms.maxCoeff();
  if (!std::isfinite(m))
    throw DegenerateSample("posterior_lattice_weights: all terms underflow");
  double z = 0.0;
  for (Eigen::Index l = 0; l < terms.size(); ++l) z += std::exp(terms[l] - m);
  const auto js = lattice_enumerate(box);
  std::vector<std::pair<Eigen::VectorXi, double>> out;
  out.reserve(js.size());
  for (std::size_t l = 0; l < js.size(); ++l)
    out.emplace_back(js[l],
                     std::exp(terms[static_cast<Eigen::Index>(l)] - m) / z);
  return out;
}

std::pair<Mat, Eigen::MatrixXi> cstep_unwrap(const Mat& data,
                                             const WrappedModel& model) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  Mat xhat(n, p);
  Eigen::MatrixXi jhat(n, p);
  const Mat& off = model.offsets();
  const Eigen::Index L = off.rows();
  for (int i = 0; i < n; ++i) {
    const Vec y = data.row(i).transpose();
    Eigen::Index best = 0;
    double best_term = -std::numeric_limits<double>::infinity();
    double best_norm = 0.0;
    for (Eigen::Index l = 0; l < L; ++l) {
      const double d2 = model.mahalanobis_sq_at(y + off.row(l).transpose());
      const double term = model.generator().log_h(d2);
      const double nrm = off.row(l).squaredNorm();
      if (term > best_term || (term == best_term && nrm < best_norm)) {
        best = l;
        best_term = term;
        best_norm = nrm;
      }
    }
    xhat.row(i) = data.row(i) + off.row(best);
    for (int d = 0; d < p; ++d)
      jhat(i, d) = static_cast<int>(std::lround(off(best, d) / kTwoPi));
  }
  return {xhat, jhat};
}

std::vector<ModelParams> initialize(const Mat& data, const FitConfig& config,
                                    Rng& rng) {
  const int n = static_cast<int>(data.rows());
  const int p = static_cast<int>(data.cols());
  const int m = config.subsample_size > 0 ? config.subsample_size
                                          : p + p * (p + 1) / 2 + 5;
  if (m < p + 1) throw std::invalid_argument("initialize: subsample too small");
  if (n < m) throw std::invalid_argument("initialize: n below subsample size");

  std::vector<int> idx(n);
  std::vector<ModelParams> out;
  for (int c = 0; c < config.n_subsamples; ++c) {
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(
                            static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }
    Mat sub(m, p);
    for (int i = 0; i < m; ++i) sub.row(i) = data.row(idx[static_cast<std::size_t>(i)]);

    ModelParams cand;
    cand.mu.resize(p);
    cand.sigma = Mat::Zero(p, p);
    bool ok = true;
    Vec sd(p);
    for (int d = 0; d < p && ok; ++d) {
      try {
        cand.mu[d] = circular_mean(sub.col(d));
      } catch (const DegenerateSample&) {
        ok = false;
        break;
      }
      const double rho = std::min(mean_resultant_length(sub.col(d)), 1.0);
      const double var = -2.0 * std::log(std::max(rho, 1e-12));
      cand.sigma(d, d) = var;
      sd[d] = std::sqrt(std::max(var, 0.0));
    }
    if (!ok) continue;
    for (int r = 0; r < p; ++r) {
      for (int s = r + 1; s < p; ++s) {
        double rho_c = 0.0;
        try {
          rho_c = circular_correlation(sub.col(r), sub.col(s));
        } catch (const DegenerateSample&) {
          rho_c = 0.0;
        }
        cand.sigma(r, s) = cand.sigma(s, r) = rho_c * sd[r] * sd[s];
      }
    }
    if (config.ridge > 0.0)
      cand.sigma.diagonal().array() += config.ridge;
    bool ridged = false;
    if (!ridge_repair(cand.sigma, ridged)) continue;
    out.push_back(std::move(cand));
  }
  if (out.empty())
    throw DegenerateSample("initialize: no usable starting point");
  return out;
}

bool check_convergence(const ModelParams& prev, const ModelParams& next,
                       double tol) {
  if (prev.dim() != next.dim())
    throw std::invalid_argument("check_convergence: dimension mismatch");
  const double g = angular_separation(prev.mu, next.mu).maxCoeff();
  const double ds = (prev.sigma - next.sigma).norm();
  return std::max(g, ds) < tol;
}

FitResult select_root(std::vector<FitResult> candidates, const Mat& data,
                      const FitConfig& config) {
  if (candidates.empty())
    throw std::runtime_error("select_root: no candidates");
  std::vector<const FitResult*> converged;
  for (const auto& c : candidates)
    if (c.converged) converged.push_back(&c);
  if (converged.empty()) {
    std::string msg = "select_root: no converged candidate;";
    for (const auto& c : candidates)
      msg += " [" + std::to_string(c.iterations) + " iterations]";
    throw std::runtime_error(msg);
  }

  Engine engine(data, converged.front()->kind, config,
                EllipticalGenerator::normal());
  double best_score = std::numeric_limits<double>::infinity();
  double best_mw = -1.0;
  const FitResult* best = nullptr;
  std::vector<std::pair<const FitResult*, double>> scored;
  for (const FitResult* c : converged) {
    double score = -1.0;
    for (const auto& [rep, rep_score] : scored) {
      if (angular_separation(rep->params.mu, c->params.mu).maxCoeff() < 1e-5 &&
          (rep->params.sigma - c->params.sigma).norm() < 1e-5) {
        score = rep_score;
        break;
      }
    }
    if (score < 0.0) {
      score = root_score_of(engine, *c);
      scored.emplace_back(c, score);
    }
    const double mw = c->mean_weight();
    if (score < best_score || (score == best_score && mw > best_mw)) {
      best_score = score;
      best_mw = mw;
      best = c;
    }
  }
  FitResult res = *best;
  res.root_score = best_score;
  return res;
}

FitResult fit(const Mat& data, EstimatorKind kind, const FitConfig& config,
              const EllipticalGenerator& gen) {
  if (data.rows() < 2) throw std::invalid_argument("fit: need at least 2 rows");
  const Mat wrapped = wrap_rows(data);
  Engine engine(wrapped, kind, config, gen);
  Rng rng(config.seed);
  Rng init_rng = rng.substream(0x496e6974ULL);
  const std::vector<ModelParams> starts = initialize(wrapped, config, init_rng);

  std::vector<FitResult> candidates;
  std::string last_error;
  for (std::size_t c = 0; c < starts.size(); ++c) {
    try {
      candidates.push_back(engine.run(starts[c], static_cast<int>(c)));
    } catch (const std::exception& e) {
      last_error = e.what();
    }
  }
  if (candidates.empty())
    throw std::runtime_error("fit: every starting point failed: " + last_error);

  const bool any_converged =
      std::any_of(candidates.begin(), candidates.end(),
                  [](const FitResult& f) { return f.converged; });

  if (!is_weighted(kind)) {
    // Likelihood ranking for the unweighted estimators.
    const FitResult* best = nullptr;
    for (const auto& c : candidates) {
      if (any_converged && !c.converged) continue;
      if (!best || c.log_lik > best->log_lik) best = &c;
    }
    return *best;
  }
  if (!any_converged) {
    // Keep the best-effort iterate, flagged, rather than failing the run.
    const FitResult* best = &candidates.front();
    for (const auto& c : candidates)
      if (c.mean_weight() > best->mean_weight()) best = &c;
    return *best;
  }
  return select_root(std::move(candidates), wrapped, config);
}

FitResult fit_from_start(const Mat& data, EstimatorKind kind,
                         const FitConfig& config, const ModelParams& start,
                         const EllipticalGenerator& gen) {
  const Mat wrapped = wrap_rows(data);
  Engine engine(wrapped, kind, config, gen);
  return engine.run(start, 0);
}

FitResult em_fit(const Mat& data, const FitConfig& config) {
  return fit(data, EstimatorKind::Em, config);
}
FitResult cem_fit(const Mat& data, const FitConfig& config) {
  return fit(data, EstimatorKind::Cem, config);
}
FitResult wem_fit(const Mat& data, const FitConfig& config) {
  return fit(data, EstimatorKind::Wem, config);
}
FitResult wcem_fit(const Mat& data, const FitConfig& config, WcemScheme scheme) {
  switch (scheme) {
    case WcemScheme::Torus:
      return fit(data, EstimatorKind::WcemTorus, config);
    case WcemScheme::Unwrap:
      return fit(data, EstimatorKind::WcemUnwrap, config);
    case WcemScheme::Dist:
      return fit(data, EstimatorKind::WcemDist, config);
  }
  throw std::invalid_argument("wcem_fit: bad scheme");
}

}  // namespace wrapfit
