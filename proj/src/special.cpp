#include "wrapfit/special.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace wrapfit {

namespace {

// Series expansion, converges for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < 500; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * 1e-16) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction for Q(a, x) via modified Lentz, x >= a + 1.
double gamma_q_cf(double a, double x) {
  const double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < 500; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::fabs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-16) break;
  }
  return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

}  // namespace

double gamma_p(double a, double x) {
  if (!(a > 0.0) || x < 0.0 || !std::isfinite(a) || !std::isfinite(x))
    throw std::invalid_argument("gamma_p: require a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_cf(a, x);
}

double chi2_log_pdf(double x, int k) {
  if (k < 1) throw std::invalid_argument("chi2_log_pdf: k >= 1");
  if (x < 0.0) return -std::numeric_limits<double>::infinity();
  const double a = 0.5 * k;
  if (x == 0.0) {
    if (k == 2) return std::log(0.5);
    if (k < 2) return std::numeric_limits<double>::infinity();
    return -std::numeric_limits<double>::infinity();
  }
  return (a - 1.0) * std::log(x) - 0.5 * x - a * std::log(2.0) - std::lgamma(a);
}

double chi2_pdf(double x, int k) { return std::exp(chi2_log_pdf(x, k)); }

double chi2_cdf(double x, int k) {
  if (k < 1) throw std::invalid_argument("chi2_cdf: k >= 1");
  if (x <= 0.0) return 0.0;
  return gamma_p(0.5 * k, 0.5 * x);
}

double chi2_quantile(double prob, int k) {
  if (!(prob > 0.0) || !(prob < 1.0))
    throw std::invalid_argument("chi2_quantile: require 0 < prob < 1");
  if (k < 1) throw std::invalid_argument("chi2_quantile: k >= 1");

  // Wilson-Hilferty start, then guarded Newton with bisection fallback.
  const double kk = static_cast<double>(k);
  double z;
  {
    // Rational approximation of the standard normal quantile (Acklam-style
    // accuracy is unnecessary here; Newton cleans it up).
    const double p = prob;
    const double t = std::sqrt(-2.0 * std::log(p < 0.5 ? p : 1.0 - p));
    double q = t - (2.30753 + 0.27061 * t) / (1.0 + 0.99229 * t + 0.04481 * t * t);
    z = (p < 0.5) ? -q : q;
  }
  const double c = 2.0 / (9.0 * kk);
  double x = kk * std::pow(1.0 - c + z * std::sqrt(c), 3.0);
  if (!(x > 0.0)) x = 0.5 * kk;

  double lo = 0.0, hi = std::numeric_limits<double>::infinity();
  for (int it = 0; it < 200; ++it) {
    const double f = chi2_cdf(x, k) - prob;
    if (f > 0.0) hi = x; else lo = x;
    const double pdf = chi2_pdf(x, k);
    double step = (pdf > 0.0) ? f / pdf : 0.0;
    double next = x - step;
    if (!(next > lo) || !(next < hi) || pdf <= 0.0)
      next = std::isfinite(hi) ? 0.5 * (lo + hi) : 2.0 * (x + 1.0);
    if (std::fabs(next - x) < 1e-12 * (1.0 + x)) return next;
    x = next;
  }
  return x;
}

}  // namespace wrapfit
