// Command line front end: fit, simulate, monitor, flat-torus, ingest.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wrapfit/io.hpp"

namespace {

using namespace wrapfit;

struct CommonOpts {
  std::string config_path;
  std::string data_path;
  bool degrees = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out_prefix;
};

RunConfig resolve_config(const CommonOpts& opts) {
  RunConfig cfg;
  if (!opts.config_path.empty()) cfg = load_run_config(opts.config_path);
  if (opts.seed_set) cfg.seed = opts.seed;
  if (!opts.out_prefix.empty()) cfg.output_prefix = opts.out_prefix;
  return cfg;
}

void add_common(CLI::App* cmd, CommonOpts& opts, bool needs_data) {
  cmd->add_option("--config", opts.config_path, "JSON run configuration");
  if (needs_data) {
    cmd->add_option("--data", opts.data_path, "delimited angle table")
        ->required();
    cmd->add_flag("--degrees", opts.degrees, "input angles are in degrees");
  }
  cmd->add_option("--seed", opts.seed, "RNG seed (overrides config)")
      ->each([&](const std::string&) { opts.seed_set = true; });
  cmd->add_option("--out", opts.out_prefix, "output path prefix");
}

int cmd_fit(const CommonOpts& opts, const std::string& estimator_flag,
            double bandwidth_flag, double alpha_flag, bool want_ellipse) {
  RunConfig cfg = resolve_config(opts);
  if (!estimator_flag.empty()) cfg.estimator = estimator_flag;
  if (bandwidth_flag > 0.0) cfg.fit.bandwidth = bandwidth_flag;
  if (alpha_flag > 0.0) cfg.alpha = alpha_flag;
  cfg.fit.seed = cfg.seed;

  const AngleTable table = ingest(opts.data_path, opts.degrees);
  std::cerr << "ingested " << table.n() << " rows, p = " << table.p() << "\n";
  const EstimatorKind kind = estimator_from_name(cfg.estimator);
  const FitResult res = fit(table.angles, kind, cfg.fit);
  const DetectionReport report = detect_by_distance(
      res, cfg.alpha, cfg.detection_reference, cfg.weight_threshold);

  const std::string prefix = cfg.output_prefix;
  write_observation_csv(prefix + "_obs.csv", table, res, report);
  if (want_ellipse && table.p() == 2)
    write_ellipse_csv(prefix + "_ellipse.csv", res.params, report.cutoff);
  const std::string report_json = fit_report_json(res, report, table, cfg.seed);
  std::ofstream(prefix + "_report.json") << report_json << "\n";
  std::cout << report_json << "\n";
  return 0;
}

int cmd_simulate(const CommonOpts& opts, const std::string& estimators_flag,
                 int trials_flag, int threads) {
  RunConfig cfg = resolve_config(opts);
  if (trials_flag > 0) cfg.scenario.n_trials = trials_flag;
  if (opts.seed_set) cfg.scenario.seed = cfg.seed;

  std::vector<EstimatorKind> kinds;
  {
    std::string names = estimators_flag.empty()
                            ? "em,wem,wcem-torus,wcem-unwrap,wcem-dist"
                            : estimators_flag;
    std::size_t pos = 0;
    while (pos != std::string::npos) {
      const std::size_t next = names.find(',', pos);
      kinds.push_back(estimator_from_name(
          names.substr(pos, next == std::string::npos ? next : next - pos)));
      pos = next == std::string::npos ? next : next + 1;
    }
  }

  MonteCarloConfig mc;
  mc.base = cfg.fit;
  mc.alpha = cfg.alpha;
  mc.n_threads = threads;
  const auto rows = run_monte_carlo(cfg.scenario, kinds, mc);
  const auto agg = aggregate_metrics(rows);

  const std::string prefix = cfg.output_prefix;
  write_trials_csv(prefix + "_trials.csv", rows);
  std::ofstream(prefix + "_summary.json")
      << aggregate_json(agg, cfg.scenario) << "\n";
  int failures = 0;
  for (const auto& r : rows) failures += r.failed ? 1 : 0;
  std::cerr << rows.size() << " rows written; " << failures
            << " failed fits (recorded, non-fatal)\n";
  std::cout << aggregate_json(agg, cfg.scenario) << "\n";
  return 0;
}

int cmd_monitor(const CommonOpts& opts, const std::string& estimator_flag,
                bool want_svg) {
  RunConfig cfg = resolve_config(opts);
  if (!estimator_flag.empty()) cfg.estimator = estimator_flag;
  cfg.fit.seed = cfg.seed;

  const AngleTable table = ingest(opts.data_path, opts.degrees);
  std::vector<double> grid = cfg.monitor_grid;
  if (grid.empty())
    grid = default_bandwidth_grid(table.angles, cfg.monitor_grid_size);
  if (grid.empty()) throw std::invalid_argument("monitor: empty bandwidth grid");

  const EstimatorKind kind = estimator_from_name(cfg.estimator);
  const MonitorResult mon = monitor_bandwidth(table.angles, grid, kind, cfg.fit);

  const std::string prefix = cfg.output_prefix;
  write_monitor_csv(prefix + "_monitor.csv", mon);
  write_monitor_curve_csv(prefix + "_curve.csv", mon);
  const double selected =
      cfg.fit.bandwidth > 0.0 ? cfg.fit.bandwidth : 0.0;
  if (want_svg) write_monitor_svg(prefix + "_monitor.svg", mon, selected);
  for (std::size_t g = 0; g < mon.h_grid.size(); ++g)
    std::cout << "h = " << mon.h_grid[g]
              << "  downweighting = " << mon.downweighting[static_cast<Eigen::Index>(g)]
              << (mon.failed[g] ? "  (failed)" : "") << "\n";
  return 0;
}

int cmd_flat_torus(const CommonOpts& opts, const std::string& estimator_flag,
                   int j_min, int j_max) {
  RunConfig cfg = resolve_config(opts);
  if (!estimator_flag.empty()) cfg.estimator = estimator_flag;
  cfg.fit.seed = cfg.seed;

  const AngleTable table = ingest(opts.data_path, opts.degrees);
  const EstimatorKind kind = estimator_from_name(cfg.estimator);
  const FitResult res = fit(table.angles, kind, cfg.fit);
  write_flat_torus_csv(cfg.output_prefix + "_flat_torus.csv", table, res, j_min,
                       j_max);
  std::cerr << "wrote " << (j_max - j_min + 1) << "^" << table.p() << " x "
            << table.n() << " rows\n";
  return 0;
}

int cmd_ingest(const CommonOpts& opts) {
  RunConfig cfg = resolve_config(opts);
  const AngleTable table = ingest(opts.data_path, opts.degrees);
  export_table(table, cfg.output_prefix + "_normalized.csv");
  std::cout << "rows = " << table.n() << ", p = " << table.p() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"robust fitting of wrapped models on the p-torus"};
  app.require_subcommand(1);

  CommonOpts fit_opts, sim_opts, mon_opts, flat_opts, ingest_opts;
  std::string fit_estimator, sim_estimators, mon_estimator, flat_estimator;
  double fit_bandwidth = 0.0, fit_alpha = 0.0;
  bool fit_ellipse = false, mon_svg = false;
  int sim_trials = 0, sim_threads = 1;
  int flat_jmin = -1, flat_jmax = 1;

  auto* c_fit = app.add_subcommand("fit", "fit one estimator and detect outliers");
  add_common(c_fit, fit_opts, true);
  c_fit->add_option("--estimator", fit_estimator,
                    "em|cem|wem|wcem-torus|wcem-unwrap|wcem-dist");
  c_fit->add_option("--bandwidth", fit_bandwidth, "kernel bandwidth h");
  c_fit->add_option("--alpha", fit_alpha, "detection level");
  c_fit->add_flag("--ellipse", fit_ellipse, "emit the tolerance ellipse (p = 2)");

  auto* c_sim = app.add_subcommand("simulate", "Monte Carlo contamination study");
  add_common(c_sim, sim_opts, false);
  c_sim->add_option("--estimators", sim_estimators, "comma separated kinds");
  c_sim->add_option("--trials", sim_trials, "number of trials");
  c_sim->add_option("--threads", sim_threads, "worker threads");

  auto* c_mon = app.add_subcommand("monitor", "weight paths across a bandwidth grid");
  add_common(c_mon, mon_opts, true);
  c_mon->add_option("--estimator", mon_estimator, "estimator kind");
  c_mon->add_flag("--svg", mon_svg, "emit an SVG of the trajectories");

  auto* c_flat = app.add_subcommand("flat-torus", "replicate data over a j-grid");
  add_common(c_flat, flat_opts, true);
  c_flat->add_option("--estimator", flat_estimator, "estimator kind");
  c_flat->add_option("--j-min", flat_jmin, "smallest wrapping coefficient");
  c_flat->add_option("--j-max", flat_jmax, "largest wrapping coefficient");

  auto* c_ing = app.add_subcommand("ingest", "normalize an angle table");
  add_common(c_ing, ingest_opts, true);

  CLI11_PARSE(app, argc, argv);

  try {
    if (c_fit->parsed())
      return cmd_fit(fit_opts, fit_estimator, fit_bandwidth, fit_alpha, fit_ellipse);
    if (c_sim->parsed())
      return cmd_simulate(sim_opts, sim_estimators, sim_trials, sim_threads);
    if (c_mon->parsed()) return cmd_monitor(mon_opts, mon_estimator, mon_svg);
    if (c_flat->parsed())
      return cmd_flat_torus(flat_opts, flat_estimator, flat_jmin, flat_jmax);
    if (c_ing->parsed()) return cmd_ingest(ingest_opts);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
