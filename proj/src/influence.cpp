#include "wrapfit/influence.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace wrapfit {

namespace {

constexpr double kPi = 3.141592653589793238462643383280;

double phi(double x, double s) {
  const double u = x / s;
  return std::exp(-0.5 * u * u) / (s * std::sqrt(kTwoPi));
}

double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

int lattice_terms(double s) {
  return std::max(2, static_cast<int>(std::ceil((kPi + 4.0 * s) / kTwoPi)) + 1);
}

// Univariate wrapped normal density.
double wn_pdf(double y, double mu, double s) {
  const int J = lattice_terms(s);
  double out = 0.0;
  for (int j = -J; j <= J; ++j) out += phi(y - mu + kTwoPi * j, s);
  return out;
}

// Location score of the univariate wrapped normal.
double wn_score(double y, double mu, double s) {
  const int J = lattice_terms(s);
  double num = 0.0, den = 0.0;
  for (int j = -J; j <= J; ++j) {
    const double e = y - mu + kTwoPi * j;
    const double w = phi(e, s);
    num += w * e;
    den += w;
  }
  return num / (den * s * s);
}

// d/dmu of the score above.
double wn_score_deriv(double y, double mu, double s) {
  const int J = lattice_terms(s);
  double den = 0.0, m1 = 0.0, m2 = 0.0;
  for (int j = -J; j <= J; ++j) {
    const double e = y - mu + kTwoPi * j;
    const double w = phi(e, s);
    den += w;
    m1 += w * e;
    m2 += w * e * e;
  }
  m1 /= den;
  m2 /= den;
  const double s2 = s * s;
  return (m2 - m1 * m1) / (s2 * s2) - 1.0 / s2;
}

// Integral over (a, b] of phi_h(x - t) phi_s(t - c) dt, in closed form.
double gauss_window(double x, double c, double s, double h, double a, double b) {
  const double v = s * s + h * h;
  const double m = (x * s * s + c * h * h) / v;
  const double tau = h * s / std::sqrt(v);
  return phi(x - c, std::sqrt(v)) *
         (norm_cdf((b - m) / tau) - norm_cdf((a - m) / tau));
}

struct MixtureComponent {
  double weight;
  double mu;
  double sigma;
};

std::vector<MixtureComponent> mixture_components(const MixtureSpec& mix) {
  std::vector<MixtureComponent> out;
  if (mix.eps < 1.0)
    out.push_back({1.0 - mix.eps, 0.0, mix.sigma0});
  if (mix.eps > 0.0)
    out.push_back({mix.eps, mix.contam_mu, mix.contam_sigma});
  return out;
}

double mixture_pdf(const std::vector<MixtureComponent>& comps, double y) {
  double f = 0.0;
  for (const auto& c : comps) f += c.weight * wn_pdf(y, c.mu, c.sigma);
  return f;
}

double mixture_smoothed_pdf(const std::vector<MixtureComponent>& comps, double y,
                            double h) {
  double f = 0.0;
  for (const auto& c : comps)
    f += c.weight * wn_pdf(y, c.mu, std::hypot(c.sigma, h));
  return f;
}

// Convolution of the mixture restricted to (lo, hi] with a Gaussian kernel.
double truncated_smoothed_pdf(const std::vector<MixtureComponent>& comps,
                              double x, double h, double lo, double hi) {
  double f = 0.0;
  for (const auto& c : comps) {
    const int J = lattice_terms(c.sigma);
    for (int j = -J; j <= J; ++j)
      f += c.weight * gauss_window(x, c.mu - kTwoPi * j, c.sigma, h, lo, hi);
  }
  return f;
}

double bisect(const std::function<double(double)>& g, double lo, double hi) {
  double flo = g(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double fm = g(mid);
    if (flo * fm <= 0.0) {
      hi = mid;
    } else {
      lo = mid;
      flo = fm;
    }
    if (hi - lo < 1e-12) break;
  }
  return 0.5 * (lo + hi);
}

// Root of g nearest zero on a coarse scan of [-1.2, 1.2].
double solve_location(const std::function<double(double)>& g) {
  const int steps = 97;
  double prev_mu = -1.2;
  double prev_g = g(prev_mu);
  double best_root = std::numeric_limits<double>::quiet_NaN();
  for (int i = 1; i <= steps; ++i) {
    const double mu = -1.2 + 2.4 * i / steps;
    const double cur = g(mu);
    if (prev_g == 0.0) best_root = prev_mu;
    if (prev_g * cur < 0.0) {
      const double root = bisect(g, prev_mu, mu);
      if (!std::isfinite(best_root) || std::fabs(root) < std::fabs(best_root))
        best_root = root;
    }
    prev_mu = mu;
    prev_g = cur;
  }
  if (!std::isfinite(best_root))
    throw std::runtime_error("influence: location equation has no root in range");
  return best_root;
}

}  // namespace

LocationInfluence::LocationInfluence(InfluenceScheme scheme,
                                     const MixtureSpec& mixture, const Raf& raf,
                                     double bandwidth, int grid_size)
    : scheme_(scheme), mix_(mixture), raf_(raf), h_(bandwidth), m_(grid_size) {
  if (!(h_ > 0.0)) throw std::invalid_argument("influence: bandwidth > 0");
  if (!(mix_.sigma0 > 0.0)) throw std::invalid_argument("influence: sigma0 > 0");
  if (mix_.eps < 0.0 || mix_.eps >= 0.5)
    throw std::invalid_argument("influence: eps in [0, 0.5)");
  // the distance scheme pays O(M^2) per estimating-equation evaluation
  if (scheme_ == InfluenceScheme::WcemDist) m_ = std::min(m_, 1024);
  if (scheme_ == InfluenceScheme::Wem)
    build_wem();
  else
    build_linear();
}

void LocationInfluence::build_wem() {
  const auto comps = mixture_components(mix_);
  const double s0 = mix_.sigma0;
  const double st = std::hypot(s0, h_);
  dx_ = kTwoPi / m_;
  grid_.resize(m_);
  f_.resize(m_);
  fhat_.resize(m_);
  for (int i = 0; i < m_; ++i) {
    grid_[i] = dx_ * i;
    f_[i] = mixture_pdf(comps, grid_[i]);
    fhat_[i] = mixture_smoothed_pdf(comps, grid_[i], h_);
  }

  auto estimating = [&](double mu) {
    double g = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double delta = fhat_[i] / wn_pdf(grid_[i], mu, st) - 1.0;
      g += weight_from_residual(delta, raf_) * wn_score(grid_[i], mu, s0) * f_[i];
    }
    return g * dx_;
  };
  mu_ = solve_location(estimating);

  score_.resize(m_);
  coeff_.resize(m_);
  denom_ = 0.0;
  for (int i = 0; i < m_; ++i) {
    const double delta = fhat_[i] / wn_pdf(grid_[i], mu_, st) - 1.0;
    const double w = weight_from_residual(delta, raf_);
    const double ap = raf_.deriv(delta);
    score_[i] = wn_score(grid_[i], mu_, s0);
    const double uhat = wn_score(grid_[i], mu_, st);
    coeff_[i] = (ap - w) * score_[i] * f_[i] * dx_;
    denom_ += (ap - w) * uhat * score_[i] * f_[i] * dx_ -
              w * wn_score_deriv(grid_[i], mu_, s0) * f_[i] * dx_;
  }
}

void LocationInfluence::build_linear() {
  const auto comps = mixture_components(mix_);
  const double s0 = mix_.sigma0;
  const double st = std::hypot(s0, h_);

  auto build_grid = [&](double mu, Vec& grid, Vec& f) {
    dx_ = kTwoPi / m_;
    grid.resize(m_);
    f.resize(m_);
    for (int i = 0; i < m_; ++i) {
      grid[i] = mu - kPi + dx_ * (i + 0.5);
      f[i] = mixture_pdf(comps, grid[i]);
    }
  };

  if (scheme_ == InfluenceScheme::WcemUnwrap) {
    auto estimating = [&](double mu) {
      Vec grid, f;
      build_grid(mu, grid, f);
      double g = 0.0;
      for (int i = 0; i < m_; ++i) {
        const double fh =
            truncated_smoothed_pdf(comps, grid[i], h_, mu - kPi, mu + kPi);
        const double delta = fh / phi(grid[i] - mu, st) - 1.0;
        g += weight_from_residual(delta, raf_) * (grid[i] - mu) * f[i];
      }
      return g * dx_ / (s0 * s0);
    };
    mu_ = solve_location(estimating);

    build_grid(mu_, grid_, f_);
    fhat_.resize(m_);
    score_.resize(m_);
    coeff_.resize(m_);
    denom_ = 0.0;
    for (int i = 0; i < m_; ++i) {
      fhat_[i] =
          truncated_smoothed_pdf(comps, grid_[i], h_, mu_ - kPi, mu_ + kPi);
      const double delta = fhat_[i] / phi(grid_[i] - mu_, st) - 1.0;
      const double w = weight_from_residual(delta, raf_);
      const double ap = raf_.deriv(delta);
      score_[i] = (grid_[i] - mu_) / (s0 * s0);
      const double uhat = (grid_[i] - mu_) / (st * st);
      coeff_[i] = (ap - w) * score_[i] * f_[i] * dx_;
      denom_ += (ap - w) * uhat * score_[i] * f_[i] * dx_ +
                w * f_[i] * dx_ / (s0 * s0);
    }
    return;
  }

  // distance scheme: residuals compare the smoothed law of d^2 under the
  // data distribution with the same smoothing of the model law
  dist_bw_ = h_;
  auto smoothed_d2_density = [&](const Vec& d2_nodes, const Vec& dens,
                                 const Vec& grid, double mu,
                                 double t) {
    // integral over the cube of K_b(log t - log d2(x)) / t * dens(x) dx
    if (!(t > 0.0)) return 0.0;
    const double lt = std::log(t);
    double s = 0.0;
    for (int i = 0; i < static_cast<int>(d2_nodes.size()); ++i) {
      const double u = (lt - std::log(d2_nodes[i])) / dist_bw_;
      s += std::exp(-0.5 * u * u) * dens[i];
    }
    (void)grid;
    (void)mu;
    return s * dx_ / (std::sqrt(kTwoPi) * dist_bw_ * t);
  };

  auto make_d2 = [&](const Vec& grid, double mu) {
    Vec d2(m_);
    for (int i = 0; i < m_; ++i) {
      const double e = (grid[i] - mu) / s0;
      d2[i] = std::max(e * e, 1e-300);
    }
    return d2;
  };

  auto estimating = [&](double mu) {
    Vec grid, f;
    build_grid(mu, grid, f);
    const Vec d2 = make_d2(grid, mu);
    Vec model(m_);
    for (int i = 0; i < m_; ++i) model[i] = wn_pdf(grid[i], mu, s0);
    double g = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double num = smoothed_d2_density(d2, f, grid, mu, d2[i]);
      const double den = smoothed_d2_density(d2, model, grid, mu, d2[i]);
      const double delta = den > 0.0 ? num / den - 1.0
                                     : std::numeric_limits<double>::infinity();
      g += weight_from_residual(delta, raf_) * (grid[i] - mu) * f[i];
    }
    return g * dx_ / (s0 * s0);
  };
  mu_ = solve_location(estimating);

  build_grid(mu_, grid_, f_);
  d2_ = make_d2(grid_, mu_);
  Vec model(m_);
  for (int i = 0; i < m_; ++i) model[i] = wn_pdf(grid_[i], mu_, s0);
  fhat_.resize(m_);
  Vec mhat(m_);
  for (int i = 0; i < m_; ++i) {
    fhat_[i] = smoothed_d2_density(d2_, f_, grid_, mu_, d2_[i]);
    mhat[i] = smoothed_d2_density(d2_, model, grid_, mu_, d2_[i]);
  }
  score_.resize(m_);
  coeff_.resize(m_);
  denom_ = 0.0;
  for (int i = 0; i < m_; ++i) {
    const double delta = mhat[i] > 0.0
                             ? fhat_[i] / mhat[i] - 1.0
                             : std::numeric_limits<double>::infinity();
    const double w = weight_from_residual(delta, raf_);
    const double ap = raf_.deriv(delta);
    score_[i] = (grid_[i] - mu_) / (s0 * s0);
    coeff_[i] = (ap - w) * score_[i] * f_[i] * dx_;
    // d/dmu log mhat(d2(x; mu)) via the chain rule on t = d2
    const double t = d2_[i];
    const double dt = std::max(1e-6 * t, 1e-12);
    const double m_plus = smoothed_d2_density(d2_, model, grid_, mu_, t + dt);
    const double m_minus =
        smoothed_d2_density(d2_, model, grid_, mu_, std::max(t - dt, 1e-300));
    const double dlog_m =
        mhat[i] > 0.0 ? (m_plus - m_minus) / (2.0 * dt * mhat[i]) : 0.0;
    const double uhat = dlog_m * (-2.0) * (grid_[i] - mu_) / (s0 * s0);
    denom_ += (ap - w) * uhat * score_[i] * f_[i] * dx_ +
              w * f_[i] * dx_ / (s0 * s0);
  }
}

double LocationInfluence::operator()(double z) const {
  const auto comps = mixture_components(mix_);
  const double s0 = mix_.sigma0;
  const double st = std::hypot(s0, h_);

  double first = 0.0;
  double corr = 0.0;
  if (scheme_ == InfluenceScheme::Wem) {
    const double zw = wrap_angle(z);
    const double delta =
        mixture_smoothed_pdf(comps, zw, h_) / wn_pdf(zw, mu_, st) - 1.0;
    first = weight_from_residual(delta, raf_) * wn_score(zw, mu_, s0);
    for (int i = 0; i < m_; ++i) {
      const double k = wn_pdf(grid_[i] - zw, 0.0, h_);
      corr += coeff_[i] * (k / fhat_[i] - 1.0);
    }
  } else if (scheme_ == InfluenceScheme::WcemUnwrap) {
    // smoothed model truncated to the support cube: contamination beyond
    // it reads as an of-the-charts residual and gets weight zero
    double delta;
    if (z <= mu_ - kPi || z > mu_ + kPi) {
      delta = std::numeric_limits<double>::infinity();
    } else {
      const double fh =
          truncated_smoothed_pdf(comps, z, h_, mu_ - kPi, mu_ + kPi);
      delta = fh / phi(z - mu_, st) - 1.0;
    }
    first = weight_from_residual(delta, raf_) * (z - mu_) / (s0 * s0);
    for (int i = 0; i < m_; ++i) {
      const double k = phi(grid_[i] - z, h_);
      corr += coeff_[i] * (fhat_[i] > 0.0 ? k / fhat_[i] - 1.0 : -1.0);
    }
  } else {
    const double e = (z - mu_) / s0;
    const double t_z = std::max(e * e, 1e-300);
    // smoothed data / model densities of d^2 at t_z (the common scale
    // factor of the two cancels in the ratio)
    Vec model(m_);
    for (int i = 0; i < m_; ++i) model[i] = wn_pdf(grid_[i], mu_, s0);
    const double lt = std::log(t_z);
    double num = 0.0, den = 0.0;
    for (int i = 0; i < m_; ++i) {
      const double u = (lt - std::log(d2_[i])) / dist_bw_;
      const double k = std::exp(-0.5 * u * u);
      num += k * f_[i];
      den += k * model[i];
    }
    const double delta = den > 0.0 ? num / den - 1.0
                                   : std::numeric_limits<double>::infinity();
    first = weight_from_residual(delta, raf_) * (z - mu_) / (s0 * s0);
    for (int i = 0; i < m_; ++i) {
      const double u = (std::log(d2_[i]) - lt) / dist_bw_;
      const double k =
          std::exp(-0.5 * u * u) / (std::sqrt(kTwoPi) * dist_bw_ * d2_[i]);
      corr += coeff_[i] * (fhat_[i] > 0.0 ? k / fhat_[i] - 1.0 : -1.0);
    }
  }
  return (first + corr) / denom_;
}

double LocationInfluence::mle_influence(double z, double sigma0) {
  const int m = 4096;
  const double dx = kTwoPi / m;
  double info = 0.0;
  for (int i = 0; i < m; ++i) {
    const double y = dx * i;
    const double u = wn_score(y, 0.0, sigma0);
    info += u * u * wn_pdf(y, 0.0, sigma0) * dx;
  }
  return wn_score(wrap_angle(z), 0.0, sigma0) / info;
}

double influence_location(double z, InfluenceScheme scheme,
                          const MixtureSpec& mixture, const Raf& raf,
                          double bandwidth) {
  return LocationInfluence(scheme, mixture, raf, bandwidth)(z);
}

}  // namespace wrapfit
