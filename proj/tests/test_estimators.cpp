#include <doctest.h>

#include <algorithm>

#include "test_helpers.hpp"
#include "wrapfit/estimators.hpp"
#include "wrapfit/experiments.hpp"

using namespace wrapfit;
using namespace wrapfit::testing;

namespace {

constexpr double kPi = 3.141592653589793238462643383280;

FitConfig quick_config(std::uint64_t seed, double h = 0.0) {
  FitConfig cfg;
  cfg.seed = seed;
  cfg.bandwidth = h;
  cfg.n_subsamples = 8;
  return cfg;
}

Mat contaminated_sample(int n, double eps, double k, std::uint64_t seed,
                        std::vector<bool>* mask_out = nullptr) {
  ScenarioConfig sc;
  sc.n = n;
  sc.eps = eps;
  sc.k_eps = k;
  Rng rng(seed);
  ContaminatedSample s = generate_contaminated(sc, rng);
  if (mask_out) *mask_out = s.outlier_mask;
  return s.data;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("posterior lattice weights") {
  const ModelParams concentrated = isotropic(3.0, kPi / 8.0, 1);
  auto post = posterior_lattice_weights(Vec::Constant(1, 3.0), concentrated,
                                        EllipticalGenerator::normal(),
                                        LatticeBox{2, 1});
  double total = 0.0;
  double at_zero = 0.0;
  double max_other = 0.0;
  for (const auto& [j, w] : post) {
    total += w;
    if (j[0] == 0)
      at_zero = w;
    else
      max_other = std::max(max_other, w);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(at_zero == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_other < 1e-30);

  const ModelParams diffuse = isotropic(3.0, 5.0, 1);
  auto spread = posterior_lattice_weights(Vec::Constant(1, 1.0), diffuse,
                                          EllipticalGenerator::normal(),
                                          LatticeBox{3, 1});
  double max_w = 0.0, sum_w = 0.0;
  for (const auto& [j, w] : spread) {
    max_w = std::max(max_w, w);
    sum_w += w;
  }
  CHECK(sum_w == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(max_w < 0.5);
}

TEST_CASE("c-step tie breaks toward the smaller wrapping vector") {
  // y - mu = pi exactly: offsets 0 and -2 pi give equal distances
  const ModelParams params = isotropic(0.0, kPi / 8.0, 1);
  WrappedModel model(params, EllipticalGenerator::normal(), LatticeBox{2, 1});
  Mat y(1, 1);
  y << kPi;
  const auto [xhat, jhat] = cstep_unwrap(y, model);
  CHECK(jhat(0, 0) == 0);
  CHECK(xhat(0, 0) == doctest::Approx(kPi));
}

TEST_CASE("check convergence rule") {
  ModelParams a = isotropic(1.0, 0.5, 2);
  ModelParams b = a;
  CHECK(check_convergence(a, b, 1e-6));
  b.mu[0] = wrap_angle(a.mu[0] + kPi);
  CHECK_FALSE(check_convergence(a, b, 1e-6));
  b = a;
  b.sigma(0, 0) += 1e-7;
  CHECK(check_convergence(a, b, 1e-6));
  b.sigma(0, 0) = a.sigma(0, 0) + 1e-5;
  CHECK_FALSE(check_convergence(a, b, 1e-6));
}

TEST_CASE("initialization: resultant shortcuts") {
  // rho = 1: zero diagonal repaired by the ridge
  Mat constant = Mat::Constant(12, 1, 2.0);
  FitConfig cfg = quick_config(3);
  cfg.n_subsamples = 1;
  cfg.subsample_size = 6;
  Rng rng(9);
  auto starts = initialize(constant, cfg, rng);
  REQUIRE(starts.size() == 1);
  CHECK(starts[0].mu[0] == doctest::Approx(2.0));
  CHECK(starts[0].sigma(0, 0) > 0.0);
  CHECK(starts[0].sigma(0, 0) < 1e-6);

  // rho = exp(-1/2) gives unit variance: two points at +-acos spacing
  const double half = std::acos(std::exp(-0.5));
  Mat pair(2, 1);
  pair << wrap_angle(1.0 - half), wrap_angle(1.0 + half);
  cfg.subsample_size = 2;
  Rng rng2(10);
  starts = initialize(pair, cfg, rng2);
  REQUIRE(starts.size() == 1);
  CHECK(starts[0].sigma(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("initialization: perfectly correlated margins are repaired") {
  Rng rng(12);
  Mat data(30, 2);
  for (int i = 0; i < 30; ++i) {
    const double a = wrap_angle(0.5 * rng.normal() + 2.0);
    data(i, 0) = a;
    data(i, 1) = a;  // correlation one
  }
  FitConfig cfg = quick_config(5);
  cfg.n_subsamples = 4;
  Rng init_rng(6);
  auto starts = initialize(data, cfg, init_rng);
  REQUIRE(!starts.empty());
  for (const auto& s : starts) {
    Eigen::LLT<Mat> llt(s.sigma);
    CHECK(llt.info() == Eigen::Success);
    const double prod = std::sqrt(s.sigma(0, 0) * s.sigma(1, 1));
    CHECK(std::fabs(s.sigma(0, 1)) <= prod * (1.0 + 1e-9));
    CHECK(std::fabs(s.sigma(0, 1)) > 0.5 * prod);
  }
}

TEST_CASE("initialization requires enough data") {
  Mat tiny = Mat::Zero(4, 2);
  FitConfig cfg = quick_config(1);
  Rng rng(2);
  CHECK_THROWS_AS(initialize(tiny, cfg, rng), std::invalid_argument);
}

TEST_CASE("em recovers the truth on a clean sample") {
  Rng rng(201);
  ModelParams truth = isotropic(3.0, kPi / 8.0, 2);
  const Mat data = sample_wn(truth, 2000, rng);
  const FitResult res = em_fit(data, quick_config(7));
  CHECK(res.converged);
  CHECK(metric_sqrt_as(res.params.mu, truth.mu) < 0.02);
  CHECK((res.params.sigma - truth.sigma).norm() < 0.02);
  CHECK(res.weights.minCoeff() == 1.0);
  CHECK(res.residuals.size() == 0);
  // j-hat consistency: unwrapped = y + 2 pi j
  for (int i = 0; i < 20; ++i)
    for (int d = 0; d < 2; ++d)
      CHECK(res.unwrapped(i, d) ==
            doctest::Approx(data(i, d) + kTwoPi * res.j_hat(i, d)));
}

TEST_CASE("em log-likelihood never decreases") {
  for (std::uint64_t seed : {11ull, 12ull, 13ull, 14ull, 15ull}) {
    std::vector<bool> mask;
    const Mat data = contaminated_sample(120, 0.1, kPi / 2.0, seed, &mask);
    const FitResult res = em_fit(data, quick_config(seed));
    for (std::size_t it = 1; it < res.trace.size(); ++it)
      CHECK(res.trace[it].log_lik >= res.trace[it - 1].log_lik - 1e-10);
  }
}

TEST_CASE("em satisfies the fixed point at convergence") {
  Rng rng(202);
  const ModelParams truth = isotropic(2.0, kPi / 6.0, 2);
  const Mat data = sample_wn(truth, 400, rng);
  FitConfig cfg = quick_config(8);
  const FitResult res = em_fit(data, cfg);
  REQUIRE(res.converged);
  // one more update step barely moves the estimate
  FitConfig one = cfg;
  one.max_iter = 1;
  const FitResult next = fit_from_start(data, EstimatorKind::Em, one, res.params);
  CHECK(angular_separation(next.params.mu, res.params.mu).maxCoeff() <
        10.0 * cfg.tol);
  CHECK((next.params.sigma - res.params.sigma).norm() < 10.0 * cfg.tol);
}

TEST_CASE("repeated single point drives the degenerate ridge path") {
  Mat data = Mat::Constant(12, 1, 2.5);
  FitConfig cfg = quick_config(3);
  cfg.n_subsamples = 2;
  cfg.subsample_size = 6;
  cfg.max_iter = 60;
  const FitResult res = em_fit(data, cfg);
  CHECK(res.params.mu[0] == doctest::Approx(2.5).epsilon(1e-6));
  CHECK(res.params.sigma(0, 0) < 1e-6);
  bool ridged = false;
  for (const auto& s : res.trace) ridged = ridged || s.ridged;
  CHECK(ridged);
}

TEST_CASE("shift equivariance for all estimator kinds") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(80, 0.1, kPi / 2.0, 303, &mask);
  Vec shift(2);
  shift << 1.3, 4.9;
  Mat shifted = data;
  for (int i = 0; i < shifted.rows(); ++i)
    for (int d = 0; d < 2; ++d)
      shifted(i, d) = wrap_angle(shifted(i, d) + shift[d]);

  for (EstimatorKind kind :
       {EstimatorKind::Em, EstimatorKind::Cem, EstimatorKind::Wem,
        EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap,
        EstimatorKind::WcemDist}) {
    FitConfig cfg = quick_config(21, 0.3);
    cfg.n_subsamples = 6;
    const FitResult base = fit(data, kind, cfg);
    const FitResult moved = fit(shifted, kind, cfg);
    const Vec expected = wrap(base.params.mu + shift);
    CHECK(angular_separation(moved.params.mu, expected).maxCoeff() < 1e-4);
    CHECK((moved.params.sigma - base.params.sigma).norm() < 1e-4);
  }
}

TEST_CASE("cem tracks em for concentrated data") {
  Rng rng(204);
  const ModelParams truth = isotropic(3.0, kPi / 8.0, 1);
  const Mat data = sample_wn(truth, 500, rng);
  const FitResult em = em_fit(data, quick_config(5));
  const FitResult cem = cem_fit(data, quick_config(5));
  CHECK(metric_sqrt_as(em.params.mu, cem.params.mu) < 5e-3);
  CHECK((em.params.sigma - cem.params.sigma).norm() < 5e-3);
}

TEST_CASE("cem scale converges to the unwrapped population value") {
  Rng rng(205);
  const double s0 = kPi / 2.0;
  const Mat data = sample_wn(isotropic(3.0, s0, 1), 20000, rng);
  const FitResult res = cem_fit(data, quick_config(6));
  const double sigma_hat = std::sqrt(res.params.sigma(0, 0));
  CHECK(sigma_hat == doctest::Approx(1.460206).epsilon(0.025));
  CHECK(sigma_hat < 0.96 * s0);
}

TEST_CASE("unit-weight reduction reproduces the unweighted iterates") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(100, 0.0, 0.0, 71, &mask);
  FitConfig cfg = quick_config(31, 0.3);
  cfg.raf = Raf{RafKind::PWD, 0.0};  // A(delta) = delta => weights are one

  const FitResult em = fit(data, EstimatorKind::Em, cfg);
  const FitResult wem = fit(data, EstimatorKind::Wem, cfg);
  CHECK(wem.params.mu == em.params.mu);
  CHECK(wem.params.sigma == em.params.sigma);
  CHECK(wem.iterations == em.iterations);

  const FitResult cem = fit(data, EstimatorKind::Cem, cfg);
  for (EstimatorKind kind : {EstimatorKind::WcemTorus, EstimatorKind::WcemUnwrap,
                             EstimatorKind::WcemDist}) {
    const FitResult wcem = fit(data, kind, cfg);
    CHECK(wcem.params.mu == cem.params.mu);
    CHECK(wcem.params.sigma == cem.params.sigma);
  }
}

TEST_CASE("weighted fits stay close to the unweighted ones on clean data") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(250, 0.0, 0.0, 88, &mask);
  FitConfig cfg = quick_config(41, 0.25);
  const FitResult em = em_fit(data, cfg);
  const FitResult wem = wem_fit(data, cfg);
  CHECK(metric_sqrt_as(wem.params.mu, em.params.mu) < 0.01);

  const FitResult cem = cem_fit(data, cfg);
  for (WcemScheme scheme : {WcemScheme::Torus, WcemScheme::Unwrap}) {
    FitConfig c = cfg;
    const FitResult wcem = wcem_fit(data, c, scheme);
    CHECK(metric_sqrt_as(wcem.params.mu, cem.params.mu) < 0.01);
  }
  FitConfig cd = cfg;
  cd.bandwidth = 0.4;
  const FitResult dist = wcem_fit(data, cd, WcemScheme::Dist);
  CHECK(metric_sqrt_as(dist.params.mu, cem.params.mu) < 0.01);
}

TEST_CASE("weighted fits resist heavy contamination") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(250, 0.2, kPi, 99, &mask);
  FitConfig cfg = quick_config(51, 0.25);
  cfg.n_subsamples = 20;

  const FitResult em = em_fit(data, cfg);
  const double em_err = metric_sqrt_as(em.params.mu, Vec::Zero(2));
  CHECK(em_err > 0.2);

  for (EstimatorKind kind : {EstimatorKind::Wem, EstimatorKind::WcemUnwrap}) {
    const FitResult rob = fit(data, kind, cfg);
    const double err = metric_sqrt_as(rob.params.mu, Vec::Zero(2));
    CHECK(err < 0.1);
    // outliers carry low weights, the bulk keeps high ones
    std::vector<double> out_w, bulk_w;
    for (int i = 0; i < data.rows(); ++i)
      (mask[static_cast<std::size_t>(i)] ? out_w : bulk_w)
          .push_back(rob.weights[i]);
    std::nth_element(out_w.begin(), out_w.begin() + out_w.size() / 2,
                     out_w.end());
    std::nth_element(bulk_w.begin(), bulk_w.begin() + bulk_w.size() / 2,
                     bulk_w.end());
    CHECK(out_w[out_w.size() / 2] < 0.1);
    CHECK(bulk_w[bulk_w.size() / 2] > 0.9);
  }
}

TEST_CASE("select_root basics") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(120, 0.0, 0.0, 61, &mask);
  FitConfig cfg = quick_config(61, 0.3);
  cfg.n_subsamples = 3;
  FitResult fit_a = wem_fit(data, cfg);

  SUBCASE("single candidate is returned unchanged") {
    std::vector<FitResult> one{fit_a};
    const FitResult out = select_root(one, data, cfg);
    CHECK(out.params.mu == fit_a.params.mu);
  }
  SUBCASE("identical candidates: the first wins") {
    FitResult b = fit_a;
    b.candidate_index = 1;
    std::vector<FitResult> two{fit_a, b};
    const FitResult out = select_root(two, data, cfg);
    CHECK(out.candidate_index == fit_a.candidate_index);
  }
  SUBCASE("no converged candidate is an error") {
    FitResult bad = fit_a;
    bad.converged = false;
    std::vector<FitResult> v{bad};
    CHECK_THROWS_AS(select_root(v, data, cfg), std::runtime_error);
  }
}

TEST_CASE("accepted scatter iterates are positive definite") {
  std::vector<bool> mask;
  const Mat data = contaminated_sample(150, 0.2, kPi / 2.0, 77, &mask);
  FitConfig cfg = quick_config(71, 0.25);
  for (EstimatorKind kind : {EstimatorKind::Em, EstimatorKind::Wem,
                             EstimatorKind::WcemDist}) {
    const FitResult res = fit(data, kind, cfg);
    Eigen::LLT<Mat> llt(res.params.sigma);
    CHECK(llt.info() == Eigen::Success);
  }
}

TEST_CASE("estimation error shrinks with the sample size") {
  const ModelParams truth = isotropic(3.0, kPi / 8.0, 1);
  std::vector<double> medians;
  for (int n : {100, 400, 1600}) {
    std::vector<double> errs;
    for (int s = 0; s < 100; ++s) {
      Rng rng(9000 + static_cast<std::uint64_t>(s));
      const Mat data = sample_wn(truth, n, rng);
      FitConfig cfg = quick_config(static_cast<std::uint64_t>(s));
      cfg.n_subsamples = 3;
      const FitResult res = em_fit(data, cfg);
      errs.push_back(metric_sqrt_as(res.params.mu, truth.mu));
    }
    std::nth_element(errs.begin(), errs.begin() + errs.size() / 2, errs.end());
    medians.push_back(errs[errs.size() / 2]);
  }
  CHECK(medians[1] < medians[0]);
  CHECK(medians[2] < medians[1]);
}

TEST_CASE("low mean weight raises the suspicious-fit flag") {
  Rng rng(206);
  Mat data(60, 1);
  for (int i = 0; i < 60; ++i) data(i, 0) = rng.uniform() * kTwoPi;
  FitConfig cfg = quick_config(5, 1e-4);  // absurdly small bandwidth
  cfg.n_subsamples = 3;
  cfg.max_iter = 12;
  const FitResult res = wem_fit(data, cfg);
  CHECK(res.mean_weight() < 0.1);
  CHECK(res.low_weight_warning);
}

TEST_CASE("robust kinds demand a bandwidth") {
  Mat data = Mat::Zero(30, 1);
  FitConfig cfg = quick_config(1);  // bandwidth unset
  CHECK_THROWS_AS(wem_fit(data, cfg), std::invalid_argument);
  CHECK_THROWS_AS(wcem_fit(data, cfg, WcemScheme::Unwrap), std::invalid_argument);
}

}  // TEST_SUITE
