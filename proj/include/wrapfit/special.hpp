#pragma once

namespace wrapfit {

// Regularized lower incomplete gamma P(a, x), a > 0, x >= 0.
double gamma_p(double a, double x);

// Chi-square density, log-density, CDF and quantile with k degrees of freedom.
double chi2_pdf(double x, int k);
double chi2_log_pdf(double x, int k);
double chi2_cdf(double x, int k);

// Inverse CDF; throws std::invalid_argument unless 0 < prob < 1.
double chi2_quantile(double prob, int k);

}  // namespace wrapfit
