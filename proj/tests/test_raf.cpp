#include <doctest.h>

#include "test_helpers.hpp"
#include "wrapfit/raf.hpp"

using namespace wrapfit;
using namespace wrapfit::testing;

namespace {

constexpr double kPi = 3.141592653589793238462643383280;

const Raf kAll[] = {
    {RafKind::GKL, 0.25}, {RafKind::GKL, 1.0},  {RafKind::PWD, -0.5},
    {RafKind::PWD, 0.0},  {RafKind::PWD, 1.0},  {RafKind::SCHI, 0.0},
};

}  // namespace

TEST_SUITE("raf") {

TEST_CASE("A(0) = 0 exactly and A'(0) = 1 by finite differences") {
  for (const Raf& raf : kAll) {
    CHECK(raf.eval(0.0) == 0.0);
    const double h = 1e-6;
    const double fd = (raf.eval(h) - raf.eval(-h)) / (2.0 * h);
    CHECK(std::fabs(fd - 1.0) < 1e-6);
  }
}

TEST_CASE("GKL closed-form values") {
  const Raf gkl1{RafKind::GKL, 1.0};
  CHECK(gkl1.eval(1.0) == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(weight_from_residual(9.0, gkl1) ==
        doctest::Approx((std::log(10.0) + 1.0) / 10.0).epsilon(1e-12));
}

TEST_CASE("weight boundary behavior") {
  for (const Raf& raf : kAll) CHECK(weight_from_residual(0.0, raf) == 1.0);
  // positive part: A(delta) + 1 < 0 maps to zero
  CHECK(weight_from_residual(-0.999, Raf{RafKind::GKL, 0.25}) == 0.0);
  // boundary residual with tau = 1: A -> -inf, weight 0
  CHECK(weight_from_residual(-1.0, Raf{RafKind::GKL, 1.0}) == 0.0);
  // non-finite residuals are outliers
  CHECK(weight_from_residual(std::numeric_limits<double>::infinity(),
                             Raf{RafKind::GKL, 0.25}) == 0.0);
  CHECK(weight_from_residual(std::numeric_limits<double>::quiet_NaN(),
                             Raf{RafKind::SCHI, 0.0}) == 0.0);
}

TEST_CASE("weights stay in [0, 1] on a dense residual grid") {
  std::vector<double> grid;
  for (double d = -1.0; d <= 10.0; d += 0.001) grid.push_back(d);
  for (double d = 10.0; d <= 1e6; d *= 1.35) grid.push_back(d);
  for (const Raf& raf : kAll) {
    for (double d : grid) {
      const double w = weight_from_residual(d, raf);
      CHECK(w >= 0.0);
      CHECK(w <= 1.0);
    }
  }
}

TEST_CASE("weight is continuous away from the boundary") {
  // successive differences stay Lipschitz-small; a jump would show as O(1)
  for (const Raf& raf : kAll) {
    double prev = weight_from_residual(-0.95, raf);
    double worst = 0.0;
    for (double d = -0.95 + 1e-3; d <= 12.0; d += 1e-3) {
      const double w = weight_from_residual(d, raf);
      worst = std::max(worst, std::fabs(w - prev));
      prev = w;
    }
    CHECK(worst < 0.05);
  }
}

TEST_CASE("analytic derivative matches finite differences") {
  for (const Raf& raf : kAll) {
    for (double d = -0.9; d <= 100.0; d += 0.37) {
      const double h = 1e-5 * (1.0 + std::fabs(d));
      const double fd = (raf.eval(d + h) - raf.eval(d - h)) / (2.0 * h);
      CHECK(raf.deriv(d) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("torus residual vanishes under the model") {
  Rng rng(71);
  const ModelParams params = isotropic(3.0, kPi / 8.0, 1);
  const Mat data = sample_wn(params, 2000, rng);
  const LatticeBox box{2, 1};
  const double h = kPi / 16.0;
  Vec y(1);
  y << 3.0;
  CHECK(std::fabs(residual_torus(y, data, params, h, box)) < 0.15);

  // far empty region reads as an inlier
  y << wrap_angle(3.0 + kPi);
  CHECK(residual_torus(y, data, params, h, box) < -0.9);
}

TEST_CASE("mean weight stays high at the model") {
  Rng rng(72);
  const ModelParams params = isotropic(3.0, kPi / 8.0, 1);
  const Mat data = sample_wn(params, 2000, rng);
  const LatticeBox box{2, 1};
  const Raf raf{RafKind::GKL, 0.25};
  const double h = kPi / 16.0;
  double mean_w = 0.0;
  for (int i = 0; i < data.rows(); ++i) {
    const double delta =
        residual_torus(data.row(i).transpose(), data, params, h, box);
    mean_w += weight_from_residual(delta, raf);
  }
  mean_w /= static_cast<double>(data.rows());
  CHECK(mean_w >= 0.9);
}

TEST_CASE("weight of the torus residual is periodic") {
  Rng rng(73);
  const ModelParams params = isotropic(2.0, 0.5, 2);
  const Mat data = sample_wn(params, 60, rng);
  const LatticeBox box{2, 2};
  const Raf raf{RafKind::GKL, 0.25};
  Vec y(2);
  y << 1.7, 2.4;
  Vec shifted(2);
  shifted << y[0] - kTwoPi, y[1] + kTwoPi;
  const double w0 = weight_from_residual(
      residual_torus(y, data, params, 0.3, box), raf);
  const double w1 = weight_from_residual(
      residual_torus(wrap(shifted), data, params, 0.3, box), raf);
  CHECK(w0 == doctest::Approx(w1).epsilon(1e-12));
}

TEST_CASE("unwrapped residual basics") {
  Rng rng(74);
  const ModelParams params = isotropic(kPi, kPi / 8.0, 1);
  Mat data = sample_wn(params, 2000, rng);
  // concentrated data near pi never wraps, so the sample is its own unwrap
  Vec x(1);
  x << kPi;
  CHECK(std::fabs(residual_unwrapped(x, data, params, kPi / 16.0)) < 0.15);

  x << kPi + 50.0;
  CHECK(residual_unwrapped(x, data, params, kPi / 16.0) ==
        doctest::Approx(-1.0));

  // exact form zeroes the model outside the cube around mu
  x << kPi + 3.5;
  const double exact =
      residual_unwrapped(x, data, params, kPi / 16.0, UnwrapForm::Exact);
  CHECK((std::isinf(exact) || exact == -1.0));
}

TEST_CASE("distance residual flags far distances") {
  Rng rng(75);
  const int n = 500, p = 2;
  Vec d2(n + 1);
  for (int i = 0; i < n; ++i) {
    const double a = rng.normal(), b = rng.normal();
    d2[i] = a * a + b * b;
  }
  const double outlying = 4.0 * 9.21034;  // 4x the 0.99 cutoff
  d2[n] = outlying;
  const ModelParams params = isotropic(0.0, kPi / 8.0, p);
  const double delta =
      residual_distance(outlying, d2, params, p, DistanceReference::Chi2);
  CHECK(weight_from_residual(delta, Raf{RafKind::GKL, 0.25}) < 0.05);

  // residuals near the bulk stay moderate
  const double bulk =
      residual_distance(1.0, d2, params, p, DistanceReference::Chi2);
  CHECK(std::fabs(bulk) < 0.6);
  CHECK_THROWS_AS(residual_distance(-1.0, d2, params, p),
                  std::invalid_argument);
}

TEST_CASE("distance residual vanishes under its model") {
  Rng rng(76);
  const int n = 5000, p = 4;
  Vec d2(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int d = 0; d < p; ++d) {
      const double z = rng.normal();
      s += z * z;
    }
    d2[i] = s;
  }
  const ModelParams params = isotropic(0.0, kPi / 8.0, p);
  const double at_mode =
      residual_distance(p - 2.0, d2, params, p, DistanceReference::Chi2);
  CHECK(std::fabs(at_mode) < 0.2);
}

}  // TEST_SUITE
