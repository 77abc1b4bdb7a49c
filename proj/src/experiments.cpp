#include "wrapfit/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <thread>

namespace wrapfit {

namespace {

Mat haar_orthogonal(int p, Rng& rng) {
  Mat g(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = 0; j < p; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Mat> qr(g);
  Mat q = qr.householderQ();
  const Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < p; ++j)
    if (r(j, j) < 0.0) q.col(j) = -q.col(j);
  return q;
}

double condition_of(const Mat& c) {
  Eigen::SelfAdjointEigenSolver<Mat> es(c);
  return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
}

}  // namespace

Mat random_correlation(int p, double condition_number, Rng& rng) {
  if (p < 2) throw std::invalid_argument("random_correlation: p >= 2");
  if (condition_number < 1.0)
    throw std::invalid_argument("random_correlation: condition number >= 1");
  if (condition_number == 1.0) return Mat::Identity(p, p);

  for (int attempt = 0; attempt < 50; ++attempt) {
    double log_kappa = std::log(condition_number);
    const Mat q = haar_orthogonal(p, rng);
    Vec base(p);
    base[0] = 0.0;
    base[p - 1] = 1.0;
    for (int d = 1; d < p - 1; ++d) base[d] = rng.uniform();
    std::sort(base.data(), base.data() + p);

    for (int stretch = 0; stretch < 60; ++stretch) {
      Vec lambda(p);
      for (int d = 0; d < p; ++d) lambda[d] = std::exp(base[d] * log_kappa);
      Mat c = q * lambda.asDiagonal() * q.transpose();
      const Vec s = c.diagonal().array().sqrt().inverse();
      c = s.asDiagonal() * c * s.asDiagonal();
      c = 0.5 * (c + c.transpose());
      const double kappa = condition_of(c);
      if (std::fabs(kappa - condition_number) <= 0.05 * condition_number)
        return c;
      // diagonal rescaling compresses the spectrum; widen and retry
      log_kappa += std::log(condition_number / kappa);
      if (!(log_kappa > 0.0)) break;
    }
  }
  throw std::runtime_error("random_correlation: did not reach the target");
}

ContaminatedSample generate_contaminated(const ScenarioConfig& scenario, Rng& rng) {
  const int n = scenario.n;
  const int p = scenario.p;
  if (n < 1 || p < 1) throw std::invalid_argument("generate_contaminated: bad size");
  if (!(scenario.eps >= 0.0) || scenario.eps >= 0.5)
    throw std::invalid_argument("generate_contaminated: eps in [0, 0.5)");

  ContaminatedSample out;
  Mat corr = p >= 2 ? random_correlation(p, scenario.condition_number, rng)
                    : Mat::Identity(1, 1);
  out.truth.mu = Vec::Zero(p);
  out.truth.sigma = scenario.sigma * scenario.sigma * corr;

  Eigen::LLT<Mat> llt(out.truth.sigma);
  const Mat L = llt.matrixL();
  Mat x(n, p);
  Vec z(p);
  for (int i = 0; i < n; ++i) {
    for (int d = 0; d < p; ++d) z[d] = rng.normal();
    x.row(i) = (L * z).transpose();
  }

  out.outlier_mask.assign(static_cast<std::size_t>(n), false);
  const int m = static_cast<int>(std::ceil(scenario.eps * n));
  if (m > 0) {
    // replacement set: first m of a partial shuffle
    std::vector<int> idx(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    for (int i = 0; i < m; ++i) {
      const int j = i + static_cast<int>(rng.uniform_int(
                            static_cast<std::uint64_t>(n - i)));
      std::swap(idx[static_cast<std::size_t>(i)], idx[static_cast<std::size_t>(j)]);
    }

    std::vector<int> dims = scenario.contaminated_dims;
    if (dims.empty()) {
      if (p > 2) {
        dims = {0, 1};
      } else {
        for (int d = 0; d < p; ++d) dims.push_back(d);
      }
    }
    const int pd = static_cast<int>(dims.size());
    Vec shift = Vec::Zero(p);
    if (pd == 1) {
      shift[dims[0]] = scenario.k_eps;
    } else {
      Mat sub(pd, pd);
      for (int a = 0; a < pd; ++a)
        for (int b = 0; b < pd; ++b) sub(a, b) = out.truth.sigma(dims[a], dims[b]);
      Eigen::SelfAdjointEigenSolver<Mat> es(sub);
      Vec v = es.eigenvectors().col(0);  // smallest eigenvalue first
      for (int a = 0; a < pd; ++a)
        if (std::fabs(v[a]) > 1e-12) {
          if (v[a] < 0.0) v = -v;
          break;
        }
      for (int a = 0; a < pd; ++a) shift[dims[a]] = scenario.k_eps * v[a];
    }

    for (int i = 0; i < m; ++i) {
      const int r = idx[static_cast<std::size_t>(i)];
      out.outlier_mask[static_cast<std::size_t>(r)] = true;
      for (int d : dims)
        x(r, d) += shift[d] + scenario.sigma_eps * rng.normal();
    }
  }
  out.data = wrap_rows(x);
  return out;
}

double metric_sqrt_as(const Vec& mu_hat, const Vec& mu_true) {
  if (mu_hat.size() != mu_true.size())
    throw std::invalid_argument("metric_sqrt_as: size mismatch");
  double s = 0.0;
  for (Eigen::Index d = 0; d < mu_hat.size(); ++d)
    s += 1.0 - std::cos(mu_hat[d] - mu_true[d]);
  return std::sqrt(s / static_cast<double>(mu_hat.size()));
}

double metric_divergence(const Mat& sigma_hat, const Mat& sigma_true) {
  const int p = static_cast<int>(sigma_true.rows());
  Eigen::LLT<Mat> llt(sigma_true);
  if (llt.info() != Eigen::Success)
    throw NotPositiveDefinite("metric_divergence: reference not SPD");
  Eigen::LLT<Mat> llt_hat(sigma_hat);
  if (llt_hat.info() != Eigen::Success)
    throw NotPositiveDefinite("metric_divergence: estimate not SPD");
  const Mat ratio = llt.solve(sigma_hat);
  const double tr = ratio.trace();
  // log det via both Cholesky factors
  double log_det = 0.0;
  {
    const Mat lh = llt_hat.matrixL();
    const Mat lt = llt.matrixL();
    for (int d = 0; d < p; ++d)
      log_det += 2.0 * (std::log(lh(d, d)) - std::log(lt(d, d)));
  }
  return tr - log_det - p;
}

std::vector<TrialMetrics> run_monte_carlo(const ScenarioConfig& scenario,
                                          const std::vector<EstimatorKind>& kinds,
                                          const MonteCarloConfig& config) {
  const int trials = scenario.n_trials;
  std::vector<std::vector<TrialMetrics>> per_trial(
      static_cast<std::size_t>(trials));
  Rng master(scenario.seed);

  auto run_trial = [&](int t) {
    Rng trial_rng = master.substream(static_cast<std::uint64_t>(t));
    ContaminatedSample sample = generate_contaminated(scenario, trial_rng);
    auto& rows = per_trial[static_cast<std::size_t>(t)];
    for (std::size_t k = 0; k < kinds.size(); ++k) {
      const EstimatorKind kind = kinds[k];
      TrialMetrics row;
      row.trial = t;
      row.kind = kind;
      FitConfig cfg = config.base;
      cfg.lattice_J = scenario.lattice_J;
      cfg.seed = splitmix64(scenario.seed ^
                            splitmix64((static_cast<std::uint64_t>(t) << 8) + k));
      row.seed = cfg.seed;
      if (auto it = config.bandwidths.find(kind); it != config.bandwidths.end())
        cfg.bandwidth = it->second;
      const auto start = std::chrono::steady_clock::now();
      try {
        const FitResult fit_res = fit(sample.data, kind, cfg);
        row.sqrt_as = metric_sqrt_as(fit_res.params.mu, sample.truth.mu);
        row.delta_sigma =
            metric_divergence(fit_res.params.sigma, sample.truth.sigma);
        row.mean_weight = fit_res.mean_weight();
        row.iterations = fit_res.iterations;
        row.converged = fit_res.converged;
        const DetectionReport det = detect_by_distance(fit_res, config.alpha);
        const SwampingPower sp =
            swamping_and_power(det.flags, sample.outlier_mask);
        row.swamping = sp.swamping;
        row.power = sp.power;
      } catch (const std::exception&) {
        row.failed = true;
      }
      row.elapsed_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
              .count();
      rows.push_back(row);
    }
  };

  const int threads = std::max(1, config.n_threads);
  if (threads == 1) {
    for (int t = 0; t < trials; ++t) run_trial(t);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        while (true) {
          const int t = next.fetch_add(1);
          if (t >= trials) break;
          run_trial(t);
        }
      });
    for (auto& th : pool) th.join();
  }

  std::vector<TrialMetrics> out;
  out.reserve(static_cast<std::size_t>(trials) * kinds.size());
  for (auto& rows : per_trial)
    for (auto& r : rows) out.push_back(r);
  return out;
}

namespace {

MetricSummary summarize(std::vector<double> v) {
  MetricSummary s;
  if (v.empty()) return s;
  std::sort(v.begin(), v.end());
  auto q = [&](double f) {
    const double pos = f * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return v[lo] * (1.0 - frac) + v[hi] * frac;
  };
  s.q25 = q(0.25);
  s.median = q(0.5);
  s.q75 = q(0.75);
  return s;
}

}  // namespace

std::vector<AggregateRow> aggregate_metrics(const std::vector<TrialMetrics>& rows) {
  std::map<EstimatorKind, std::vector<const TrialMetrics*>> by_kind;
  for (const auto& r : rows) by_kind[r.kind].push_back(&r);
  std::vector<AggregateRow> out;
  for (const auto& [kind, list] : by_kind) {
    AggregateRow agg;
    agg.kind = kind;
    std::vector<double> as, ds, sw, pw, mw;
    for (const TrialMetrics* r : list) {
      if (r->failed) continue;
      ++agg.trials_ok;
      as.push_back(r->sqrt_as);
      ds.push_back(r->delta_sigma);
      sw.push_back(r->swamping);
      mw.push_back(r->mean_weight);
      if (r->power) pw.push_back(*r->power);
    }
    agg.sqrt_as = summarize(as);
    agg.delta_sigma = summarize(ds);
    agg.swamping = summarize(sw);
    agg.power = summarize(pw);
    agg.mean_weight_median = summarize(mw).median;
    out.push_back(agg);
  }
  return out;
}

MonitorResult monitor_bandwidth(const Mat& data, const std::vector<double>& h_grid,
                                EstimatorKind kind, const FitConfig& config) {
  if (h_grid.empty())
    throw std::invalid_argument("monitor_bandwidth: empty grid");
  if (!std::is_sorted(h_grid.begin(), h_grid.end()))
    throw std::invalid_argument("monitor_bandwidth: grid must be ascending");
  const int n = static_cast<int>(data.rows());
  const int g = static_cast<int>(h_grid.size());

  MonitorResult out;
  out.h_grid = h_grid;
  out.weights = Mat::Ones(n, g);
  out.downweighting = Vec::Zero(g);
  out.params.resize(static_cast<std::size_t>(g));
  out.converged.assign(static_cast<std::size_t>(g), false);
  out.failed.assign(static_cast<std::size_t>(g), false);

  std::optional<ModelParams> warm;
  for (int i = 0; i < g; ++i) {
    FitConfig cfg = config;
    cfg.bandwidth = h_grid[static_cast<std::size_t>(i)];
    try {
      FitResult res;
      if (warm) {
        // single start from the previous solution
        cfg.n_subsamples = 1;
        res = fit_from_start(data, kind, cfg, *warm);
      } else {
        res = fit(data, kind, cfg);
      }
      out.weights.col(i) = res.weights;
      out.downweighting[i] = 1.0 - res.weights.mean();
      out.params[static_cast<std::size_t>(i)] = res.params;
      out.converged[static_cast<std::size_t>(i)] = res.converged;
      warm = res.params;
    } catch (const std::exception&) {
      out.failed[static_cast<std::size_t>(i)] = true;
    }
  }
  return out;
}

std::vector<double> default_bandwidth_grid(const Mat& data, int size) {
  if (size < 2) throw std::invalid_argument("default_bandwidth_grid: size >= 2");
  const int p = static_cast<int>(data.cols());
  double scale = 0.0;
  for (int d = 0; d < p; ++d) {
    const double rho =
        std::min(mean_resultant_length(data.col(d)), 1.0 - 1e-12);
    scale += std::sqrt(-2.0 * std::log(std::max(rho, 1e-12)));
  }
  scale /= static_cast<double>(p);
  const double lo = std::log(scale / 8.0);
  const double hi = std::log(2.0 * scale);
  std::vector<double> grid(static_cast<std::size_t>(size));
  for (int i = 0; i < size; ++i)
    grid[static_cast<std::size_t>(i)] =
        std::exp(lo + (hi - lo) * static_cast<double>(i) /
                          static_cast<double>(size - 1));
  return grid;
}

double calibrate_bandwidth(const MonitorResult& monitor, double target) {
  double best_h = monitor.h_grid.back();
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < monitor.h_grid.size(); ++i) {
    if (monitor.failed[i]) continue;
    const double err = std::fabs(monitor.downweighting[static_cast<Eigen::Index>(i)] - target);
    if (err < best_err || (err == best_err && monitor.h_grid[i] > best_h)) {
      best_err = err;
      best_h = monitor.h_grid[i];
    }
  }
  if (!std::isfinite(best_err))
    throw std::runtime_error("calibrate_bandwidth: every grid point failed");
  return best_h;
}

double sigma_unwrapped(double sigma0) {
  if (!(sigma0 > 0.0)) throw std::invalid_argument("sigma_unwrapped: sigma0 > 0");
  constexpr double kPi = 3.141592653589793238462643383280;
  const int J = std::max(1, static_cast<int>(std::ceil((kPi + 4.0 * sigma0) / kTwoPi)));
  const double inv = 1.0 / (sigma0 * std::sqrt(kTwoPi));
  auto density = [&](double x) {
    double s = 0.0;
    for (int j = -J; j <= J; ++j) {
      const double u = (x + kTwoPi * j) / sigma0;
      s += std::exp(-0.5 * u * u);
    }
    return inv * s;
  };
  auto integrand = [&](double x) { return x * x * density(x); };

  // adaptive Simpson on [-pi, pi]
  struct Seg { double a, b, fa, fm, fb, whole; };
  auto simpson = [&](double a, double b, double fa, double fm, double fb) {
    return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  };
  std::vector<Seg> stack;
  auto push = [&](double a, double b) {
    const double m = 0.5 * (a + b);
    const double fa = integrand(a), fm = integrand(m), fb = integrand(b);
    stack.push_back({a, b, fa, fm, fb, simpson(a, b, fa, fm, fb)});
  };
  // split the initial interval so the mode is resolved
  for (int k = 0; k < 8; ++k)
    push(-kPi + kTwoPi * k / 8.0, -kPi + kTwoPi * (k + 1) / 8.0);
  double total = 0.0;
  int guard = 0;
  while (!stack.empty()) {
    if (++guard > 200000)
      throw std::runtime_error("sigma_unwrapped: quadrature did not converge");
    const Seg s = stack.back();
    stack.pop_back();
    const double m = 0.5 * (s.a + s.b);
    const double lm = 0.5 * (s.a + m), rm = 0.5 * (m + s.b);
    const double flm = integrand(lm), frm = integrand(rm);
    const double left = simpson(s.a, m, s.fa, flm, s.fm);
    const double right = simpson(m, s.b, s.fm, frm, s.fb);
    if (std::fabs(left + right - s.whole) < 1e-12) {
      total += left + right + (left + right - s.whole) / 15.0;
    } else {
      stack.push_back({s.a, m, s.fa, flm, s.fm, left});
      stack.push_back({m, s.b, s.fm, frm, s.fb, right});
    }
  }
  return std::sqrt(total);
}

}  // namespace wrapfit
