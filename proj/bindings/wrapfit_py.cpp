#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "wrapfit/influence.hpp"
#include "wrapfit/io.hpp"
#include "wrapfit/special.hpp"

namespace py = pybind11;
using namespace wrapfit;

namespace {

FitConfig config_from_kwargs(double bandwidth, int lattice_J, double tol,
                             int max_iter, int n_subsamples, int subsample_size,
                             const std::string& raf, double raf_param,
                             std::uint64_t seed, double root_delta_star) {
  FitConfig cfg;
  cfg.bandwidth = bandwidth;
  cfg.lattice_J = lattice_J;
  cfg.tol = tol;
  cfg.max_iter = max_iter;
  cfg.n_subsamples = n_subsamples;
  cfg.subsample_size = subsample_size;
  cfg.raf = Raf{raf_from_name(raf), raf_param};
  cfg.seed = seed;
  cfg.root_delta_star = root_delta_star;
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_wrapfit, m) {
  m.doc() = "robust weighted-likelihood fitting of wrapped models on the p-torus";

  py::register_exception<NotPositiveDefinite>(m, "NotPositiveDefiniteError");
  py::register_exception<LatticeCapExceeded>(m, "LatticeCapError");
  py::register_exception<DegenerateSample>(m, "DegenerateSampleError");

  py::class_<ModelParams>(m, "ModelParams")
      .def(py::init([](const Vec& mu, const Mat& sigma) {
             ModelParams p{mu, sigma};
             p.validate();
             return p;
           }),
           py::arg("mu"), py::arg("sigma"))
      .def_readonly("mu", &ModelParams::mu)
      .def_readonly("sigma", &ModelParams::sigma)
      .def("__repr__", [](const ModelParams& p) {
        return "ModelParams(p=" + std::to_string(p.dim()) + ")";
      });

  py::class_<FitResult>(m, "FitResult")
      .def_property_readonly("mu", [](const FitResult& r) { return r.params.mu; })
      .def_property_readonly("sigma",
                             [](const FitResult& r) { return r.params.sigma; })
      .def_readonly("weights", &FitResult::weights)
      .def_readonly("unwrapped", &FitResult::unwrapped)
      .def_readonly("j_hat", &FitResult::j_hat)
      .def_readonly("residuals", &FitResult::residuals)
      .def_readonly("iterations", &FitResult::iterations)
      .def_readonly("converged", &FitResult::converged)
      .def_readonly("log_likelihood", &FitResult::log_lik)
      .def_property_readonly("estimator", [](const FitResult& r) {
        return estimator_name(r.kind);
      })
      .def("mean_weight", &FitResult::mean_weight);

  m.def("wrap", [](const Vec& x) { return wrap(x); }, py::arg("x"),
        "componentwise reduction modulo 2 pi into [0, 2 pi)");

  m.def(
      "wrapped_density",
      [](const Vec& y, const Vec& mu, const Mat& sigma, int J) {
        ModelParams params{mu, sigma};
        params.validate();
        return wrapped_density(y, params, EllipticalGenerator::normal(),
                               LatticeBox::adequate(params, J));
      },
      py::arg("y"), py::arg("mu"), py::arg("sigma"), py::arg("J") = -1);

  m.def(
      "log_likelihood",
      [](const Mat& data, const Vec& mu, const Mat& sigma, int J) {
        ModelParams params{mu, sigma};
        params.validate();
        return log_likelihood(data, params, EllipticalGenerator::normal(),
                              LatticeBox::adequate(params, J));
      },
      py::arg("data"), py::arg("mu"), py::arg("sigma"), py::arg("J") = -1);

  m.def("circular_mean",
        [](const Vec& a) { return circular_mean(a); }, py::arg("angles"));
  m.def("mean_resultant_length",
        [](const Vec& a) { return mean_resultant_length(a); }, py::arg("angles"));
  m.def("circular_correlation",
        [](const Vec& a, const Vec& b) { return circular_correlation(a, b); },
        py::arg("a"), py::arg("b"));
  m.def("chi2_quantile", &chi2_quantile, py::arg("prob"), py::arg("dof"));
  m.def("sigma_unwrapped", &sigma_unwrapped, py::arg("sigma0"));

  m.def(
      "fit",
      [](const Mat& data, const std::string& estimator, double bandwidth,
         int lattice_J, double tol, int max_iter, int n_subsamples,
         int subsample_size, const std::string& raf, double raf_param,
         std::uint64_t seed, double root_delta_star) {
        const FitConfig cfg = config_from_kwargs(
            bandwidth, lattice_J, tol, max_iter, n_subsamples, subsample_size,
            raf, raf_param, seed, root_delta_star);
        return fit(data, estimator_from_name(estimator), cfg);
      },
      py::arg("data"), py::arg("estimator") = "wcem-unwrap",
      py::arg("bandwidth") = 0.0, py::arg("lattice_J") = 2,
      py::arg("tol") = 1e-6, py::arg("max_iter") = 500,
      py::arg("n_subsamples") = 20, py::arg("subsample_size") = 0,
      py::arg("raf") = "gkl", py::arg("raf_param") = 0.25, py::arg("seed") = 0,
      py::arg("root_delta_star") = -0.5,
      "fit a wrapped normal model; estimator is one of em, cem, wem, "
      "wcem-torus, wcem-unwrap, wcem-dist");

  m.def(
      "detect_outliers",
      [](const FitResult& res, double alpha, double weight_threshold) {
        const DetectionReport rep =
            detect_by_distance(res, alpha, DistanceReference::Chi2,
                               weight_threshold);
        py::dict out;
        out["d2"] = rep.d2;
        out["cutoff"] = rep.cutoff;
        out["flags"] = rep.flags;
        out["weight_flags"] = rep.weight_flags;
        return out;
      },
      py::arg("fit"), py::arg("alpha") = 0.01, py::arg("weight_threshold") = 0.5);

  m.def(
      "generate_contaminated",
      [](int n, int p, double sigma, double eps, double k_eps, double sigma_eps,
         double condition_number, std::uint64_t seed) {
        ScenarioConfig sc;
        sc.n = n;
        sc.p = p;
        sc.sigma = sigma;
        sc.eps = eps;
        sc.k_eps = k_eps;
        sc.sigma_eps = sigma_eps;
        sc.condition_number = condition_number;
        Rng rng(seed);
        const ContaminatedSample s = generate_contaminated(sc, rng);
        return py::make_tuple(s.data, s.outlier_mask, s.truth.mu, s.truth.sigma);
      },
      py::arg("n"), py::arg("p"), py::arg("sigma"), py::arg("eps") = 0.0,
      py::arg("k_eps") = 0.0, py::arg("sigma_eps") = 0.05,
      py::arg("condition_number") = 20.0, py::arg("seed") = 1);

  m.def("sqrt_average_separation", &metric_sqrt_as, py::arg("mu_hat"),
        py::arg("mu_true"));
  m.def("scatter_divergence", &metric_divergence, py::arg("sigma_hat"),
        py::arg("sigma_true"));

  m.def(
      "monitor",
      [](const Mat& data, const std::vector<double>& grid,
         const std::string& estimator, double raf_param, std::uint64_t seed) {
        FitConfig cfg;
        cfg.raf.param = raf_param;
        cfg.seed = seed;
        std::vector<double> g = grid;
        if (g.empty()) g = default_bandwidth_grid(data);
        const MonitorResult mon =
            monitor_bandwidth(data, g, estimator_from_name(estimator), cfg);
        py::dict out;
        out["h"] = mon.h_grid;
        out["weights"] = mon.weights;
        out["downweighting"] = mon.downweighting;
        return out;
      },
      py::arg("data"), py::arg("grid") = std::vector<double>{},
      py::arg("estimator") = "wem", py::arg("raf_param") = 0.25,
      py::arg("seed") = 0);

  m.def(
      "influence_location",
      [](const Vec& z, const std::string& scheme, double eps, double sigma0,
         double bandwidth, double raf_param) {
        InfluenceScheme s = InfluenceScheme::Wem;
        if (scheme == "wcem-unwrap") s = InfluenceScheme::WcemUnwrap;
        else if (scheme == "wcem-dist") s = InfluenceScheme::WcemDist;
        else if (scheme != "wem")
          throw std::invalid_argument("scheme must be wem|wcem-unwrap|wcem-dist");
        MixtureSpec mix;
        mix.eps = eps;
        mix.sigma0 = sigma0;
        LocationInfluence ctx(s, mix, Raf{RafKind::GKL, raf_param}, bandwidth);
        Vec out(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) out[i] = ctx(z[i]);
        return out;
      },
      py::arg("z"), py::arg("scheme") = "wem", py::arg("eps") = 0.0,
      py::arg("sigma0") = 0.39269908169872414,
      py::arg("bandwidth") = 0.19634954084936207, py::arg("raf_param") = 0.25);
}
