#pragma once

#include <string>
#include <vector>

#include "wrapfit/detection.hpp"
#include "wrapfit/experiments.hpp"

namespace wrapfit {

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AngleTable {
  std::vector<std::string> columns;
  Mat angles;  // n x p, radians in [0, 2pi)

  int n() const { return static_cast<int>(angles.rows()); }
  int p() const { return static_cast<int>(angles.cols()); }
};

// Delimited text with a header row; comma or tab separated (autodetected).
// Values are converted to radians when degrees = true and wrapped to
// [0, 2pi). Parse failures carry the 1-based line number.
AngleTable ingest(const std::string& path, bool degrees = false);

// Full-precision export; re-ingesting reproduces the values bit-for-bit
// up to the usual 1e-12 round-trip slack.
void export_table(const AngleTable& table, const std::string& path);

// Per-observation results of a fit: angles, weight, j-hat, x-hat, d2, flags.
void write_observation_csv(const std::string& path, const AngleTable& table,
                           const FitResult& fit, const DetectionReport& report);

// Tolerance ellipse polyline (p = 2 only) at the given squared-distance cutoff.
void write_ellipse_csv(const std::string& path, const ModelParams& params,
                       double cutoff, int segments = 256);

// Data replicated over a lattice j-range together with the fitted x-hat.
void write_flat_torus_csv(const std::string& path, const AngleTable& table,
                          const FitResult& fit, int j_min, int j_max);

void write_trials_csv(const std::string& path,
                      const std::vector<TrialMetrics>& rows);

void write_monitor_csv(const std::string& path, const MonitorResult& monitor);
void write_monitor_curve_csv(const std::string& path, const MonitorResult& monitor);

// Line plot of the per-observation weight trajectories against log h, with
// an optional vertical marker at the selected bandwidth.
void write_monitor_svg(const std::string& path, const MonitorResult& monitor,
                       double selected_h = 0.0);

std::string fit_report_json(const FitResult& fit, const DetectionReport& report,
                            const AngleTable& table, std::uint64_t seed);

std::string aggregate_json(const std::vector<AggregateRow>& rows,
                           const ScenarioConfig& scenario);

// Key-value run configuration document (JSON object with sections "fit",
// "scenario", "detection", "monitor", "output" plus a top-level "seed").
// Unknown keys are rejected.
struct RunConfig {
  FitConfig fit;
  ScenarioConfig scenario;
  double alpha = 0.01;
  double weight_threshold = 0.5;
  DistanceReference detection_reference = DistanceReference::Chi2;
  std::vector<double> monitor_grid;  // empty: default grid from the data
  int monitor_grid_size = 15;
  std::string estimator = "wcem-unwrap";
  std::uint64_t seed = 0;
  std::string output_prefix = "wrapfit";
};

RunConfig load_run_config(const std::string& path);
RafKind raf_from_name(const std::string& name);
std::string raf_name(RafKind kind);

}  // namespace wrapfit
