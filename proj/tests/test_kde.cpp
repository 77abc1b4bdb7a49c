#include <doctest.h>

#include "test_helpers.hpp"
#include "wrapfit/kde.hpp"
#include "wrapfit/special.hpp"

using namespace wrapfit;
using namespace wrapfit::testing;

namespace {
constexpr double kPi = 3.141592653589793238462643383280;
}

TEST_SUITE("kde") {

TEST_CASE("torus kde with one datum equals the kernel density") {
  Mat data(1, 1);
  data << 2.0;
  Vec y(1);
  y << 2.0;
  // kernel centered at the datum, evaluated there
  CHECK(torus_kde(y, data, kPi / 8.0) ==
        doctest::Approx(1.0158981749478557).epsilon(1e-9));
}

TEST_CASE("torus kde is periodic") {
  Rng rng(31);
  Mat data = sample_wn(isotropic(3.0, 0.5, 2), 40, rng);
  Vec y(2);
  y << 0.3, 5.9;
  Vec shifted(2);
  shifted << y[0] + kTwoPi, y[1] - kTwoPi;
  CHECK(torus_kde_log(wrap(shifted), data, 0.3) ==
        doctest::Approx(torus_kde_log(y, data, 0.3)).epsilon(1e-12));
}

TEST_CASE("torus kde flattens to the uniform as h grows") {
  Rng rng(32);
  Mat data = sample_wn(isotropic(1.0, 0.4, 2), 25, rng);
  Vec y(2);
  y << 0.1, 4.0;
  const double val = torus_kde(y, data, 14.0);
  CHECK(val == doctest::Approx(1.0 / (kTwoPi * kTwoPi)).epsilon(1e-3));
}

TEST_CASE("linear kde basics") {
  Mat data(1, 1);
  data << 0.7;
  Vec x(1);
  x << 0.7;
  CHECK(linear_kde(x, data, 1.0) ==
        doctest::Approx(1.0 / std::sqrt(kTwoPi)).epsilon(1e-12));

  // mirror symmetry of a symmetric two-point sample at the origin
  Mat pair(2, 1), mirrored(2, 1);
  pair << -1.3, 1.3;
  mirrored << 1.3, -1.3;
  Vec zero = Vec::Zero(1);
  CHECK(linear_kde(zero, pair, 0.4) ==
        doctest::Approx(linear_kde(zero, mirrored, 0.4)));

  Rng rng(33);
  Mat sample(5, 1);
  for (int i = 0; i < 5; ++i) sample(i, 0) = rng.normal();
  const double mass = integrate_line(
      [&](double t) {
        Vec q(1);
        q << t;
        return linear_kde(q, sample, 0.8);
      },
      -12.0, 12.0);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("smoothed model matches the h -> 0 limit") {
  const ModelParams params = isotropic(2.0, kPi / 8.0, 1);
  const LatticeBox box{3, 1};
  Vec y(1);
  y << 2.4;
  CHECK(smoothed_wn(y, params, 1e-9, box) ==
        doctest::Approx(wrapped_density(y, params, EllipticalGenerator::normal(),
                                        box))
            .epsilon(1e-8));
}

TEST_CASE("smoothing is convolution: closure within 1e-6") {
  const double sigma = kPi / 8.0;
  const double h = kPi / 10.0;
  const ModelParams params = isotropic(1.5, sigma, 1);
  const LatticeBox box{3, 1};
  // quadrature oracle: convolve the wrapped density with the wrapped kernel
  auto convolved = [&](double y) {
    return integrate_circle(
        [&](double t) {
          Vec a(1), b(1);
          a << t;
          b << wrap_angle(y - t);
          const ModelParams kernel = isotropic(0.0, h, 1);
          return wrapped_density(a, params, EllipticalGenerator::normal(), box) *
                 wrapped_density(b, kernel, EllipticalGenerator::normal(), box);
        },
        2048);
  };
  for (double y : {0.0, 1.0, 1.5, 3.0, 5.5}) {
    Vec q(1);
    q << y;
    CHECK(smoothed_wn(q, params, h, box) ==
          doctest::Approx(convolved(y)).epsilon(1e-6));
  }
}

TEST_CASE("smoothed model integrates to one") {
  const ModelParams params = isotropic(4.0, kPi / 4.0, 1);
  const LatticeBox box{3, 1};
  const double mass = integrate_circle([&](double t) {
    Vec q(1);
    q << t;
    return smoothed_wn(q, params, 0.5, box);
  });
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-8));
}

TEST_CASE("distance kde integrates to one and vanishes in far tails") {
  Rng rng(41);
  Vec sample(400);
  for (int i = 0; i < 400; ++i) {
    const double a = rng.normal(), b = rng.normal();
    sample[i] = a * a + b * b;  // chi-square with 2 dof
  }
  // integrate in log space where the estimate is a smooth Gaussian mixture
  const double mass = integrate_line(
      [&](double u) {
        const double t = std::exp(u);
        return distance_kde(t, sample) * t;
      },
      std::log(1e-8), std::log(200.0), 4001);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(distance_kde(4000.0, sample) < 1e-8);
}

TEST_CASE("distance kde tracks the chi-square density near the mode") {
  Rng rng(42);
  const int n = 20000, p = 4;
  Vec sample(n);
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int d = 0; d < p; ++d) {
      const double z = rng.normal();
      s += z * z;
    }
    sample[i] = s;
  }
  const double mode = p - 2.0;
  CHECK(distance_kde(mode, sample) ==
        doctest::Approx(chi2_pdf(mode, p)).epsilon(0.10));
}

TEST_CASE("distance kde error shrinks as the sample grows") {
  // sup error on a grid roughly halves when n quadruples
  auto sup_error = [&](int n, std::uint64_t seed) {
    Rng rng(seed);
    Vec sample(n);
    for (int i = 0; i < n; ++i) {
      const double a = rng.normal(), b = rng.normal(), c = rng.normal();
      sample[i] = a * a + b * b + c * c;
    }
    double worst = 0.0;
    for (double t = 1.0; t <= 8.0; t += 0.25)
      worst = std::max(worst, std::fabs(distance_kde(t, sample) - chi2_pdf(t, 3)));
    return worst;
  };
  const double e1 = sup_error(2000, 901);
  const double e2 = sup_error(8000, 902);
  CHECK(e2 / e1 > 0.25);
  CHECK(e2 / e1 < 0.85);
}

TEST_CASE("unwrapped distance sample: support estimates") {
  const int p = 6;
  SUBCASE("sigma = pi/2 gives support 24") {
    const auto mc = sample_unwrapped_distances(isotropic(0.0, kPi / 2.0, p),
                                               100000, 20240901);
    CHECK(mc.support_estimate >= 22.0);
    CHECK(mc.support_estimate < 24.0);
    CHECK(mc.d2.maxCoeff() < 24.0);
  }
  SUBCASE("sigma = 3 pi/8 gives support 42.67") {
    const auto mc = sample_unwrapped_distances(isotropic(0.0, 3.0 * kPi / 8.0, p),
                                               100000, 20240901);
    CHECK(mc.support_estimate >= 40.0);
    CHECK(mc.support_estimate < 128.0 / 3.0);
    CHECK(mc.d2.maxCoeff() < 128.0 / 3.0);
  }
  SUBCASE("isotropic bound p pi^2 / sigma^2") {
    const double s = 0.9;
    const auto mc =
        sample_unwrapped_distances(isotropic(0.0, s, 3), 50000, 7);
    const double bound = 3.0 * kPi * kPi / (s * s);
    CHECK(mc.support_estimate <= bound);
    CHECK(mc.support_estimate > 0.9 * bound);
  }
}

TEST_CASE("unwrapped distance machinery rejects tiny Monte Carlo sizes") {
  CHECK_THROWS_AS(sample_unwrapped_distances(isotropic(0.0, 1.0, 2), 500, 1),
                  std::invalid_argument);
  CHECK(chi2_unwrapped_density(1.0, isotropic(0.0, kPi / 4.0, 2), 5000, 3) > 0.0);
}

TEST_CASE("torus and linear kde agree for concentrated data") {
  Rng rng(55);
  const ModelParams params = isotropic(kPi, 0.05, 2);
  Mat data = sample_wn(params, 50, rng);
  for (int i = 0; i < 10; ++i) {
    const Vec y = data.row(i).transpose();
    const double torus = torus_kde_log(y, data, 0.05);
    const double linear = linear_kde_log(y, data, 0.05);
    CHECK(std::fabs(std::exp(torus) - std::exp(linear)) < 1e-8);
  }
}

}  // TEST_SUITE
