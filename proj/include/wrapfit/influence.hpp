#pragma once

#include "wrapfit/raf.hpp"
#include "wrapfit/torus.hpp"

namespace wrapfit {

enum class InfluenceScheme { Wem, WcemUnwrap, WcemDist };

// Two-component wrapped normal mixture used as the data-generating law for
// the univariate location functional: (1 - eps) WN(0, sigma0^2) +
// eps WN(contam_mu, contam_sigma^2).
struct MixtureSpec {
  double eps = 0.0;
  double sigma0 = 0.39269908169872414;  // pi / 8
  double contam_mu = 1.5707963267948966;  // pi / 2
  double contam_sigma = 0.19634954084936207;  // pi / 16
};

// Numeric influence function of the weighted-likelihood location functional
// for the univariate wrapped normal with known scale. The functional value
// T(F) is found by quadrature root search; IF(z) = N(z, F) / D(F).
class LocationInfluence {
 public:
  LocationInfluence(InfluenceScheme scheme, const MixtureSpec& mixture,
                    const Raf& raf, double bandwidth, int grid_size = 4096);

  double location() const { return mu_; }
  double denominator() const { return denom_; }
  double operator()(double z) const;

  // Classical score-over-information influence of the location MLE at the
  // clean model (eps = 0 reference curve).
  static double mle_influence(double z, double sigma0);

 private:
  void build_wem();
  void build_linear();  // shared machinery for the unwrap / distance schemes

  InfluenceScheme scheme_;
  MixtureSpec mix_;
  Raf raf_;
  double h_;
  int m_;
  double mu_ = 0.0;
  double denom_ = 0.0;

  // quadrature grid and per-node factors reused by every z evaluation
  Vec grid_;        // integration nodes (torus or the cube around mu)
  Vec f_;           // data density at the nodes
  Vec fhat_;        // smoothed data density at the nodes
  Vec score_;       // model score u at the nodes
  Vec coeff_;       // (A'(delta) - w(delta)) u f dx at the nodes
  double dx_ = 0.0;
  Vec d2_;          // squared standardized distances (distance scheme)
  double dist_bw_ = 0.0;
};

// Convenience wrapper; builds the context and evaluates one point.
double influence_location(double z, InfluenceScheme scheme,
                          const MixtureSpec& mixture, const Raf& raf,
                          double bandwidth);

}  // namespace wrapfit
