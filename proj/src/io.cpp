#include "wrapfit/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace wrapfit {

namespace {

using nlohmann::json;

std::vector<std::string> split_line(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::string strip(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_double(const std::string& cell, int line_no) {
  const std::string t = strip(cell);
  double value = 0.0;
  const char* begin = t.data();
  const char* end = t.data() + t.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end)
    throw ParseError("line " + std::to_string(line_no) +
                     ": not a number: '" + t + "'");
  return value;
}

}  // namespace

AngleTable ingest(const std::string& path, bool degrees) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line) || strip(line).empty())
    throw ParseError("line 1: missing header row");

  const char sep =
      std::count(line.begin(), line.end(), '\t') >
              std::count(line.begin(), line.end(), ',')
          ? '\t'
          : ',';
  AngleTable table;
  for (const auto& name : split_line(line, sep))
    table.columns.push_back(strip(name));
  const int p = static_cast<int>(table.columns.size());
  if (p < 1) throw ParseError("line 1: empty header");

  std::vector<Vec> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (strip(line).empty()) continue;
    const auto cells = split_line(line, sep);
    if (static_cast<int>(cells.size()) != p)
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(p) + " columns, got " +
                       std::to_string(cells.size()));
    Vec row(p);
    for (int d = 0; d < p; ++d) {
      double v = parse_double(cells[static_cast<std::size_t>(d)], line_no);
      if (degrees) v *= kTwoPi / 360.0;
      if (!std::isfinite(v))
        throw ParseError("line " + std::to_string(line_no) + ": non-finite value");
      row[d] = wrap_angle(v);
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ParseError("no data rows in " + path);
  table.angles.resize(static_cast<Eigen::Index>(rows.size()), p);
  for (std::size_t i = 0; i < rows.size(); ++i)
    table.angles.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
  return table;
}

void export_table(const AngleTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(17);
  for (std::size_t d = 0; d < table.columns.size(); ++d)
    out << (d ? "," : "") << table.columns[d];
  out << "\n";
  for (Eigen::Index i = 0; i < table.angles.rows(); ++i) {
    for (Eigen::Index d = 0; d < table.angles.cols(); ++d)
      out << (d ? "," : "") << table.angles(i, d);
    out << "\n";
  }
}

void write_observation_csv(const std::string& path, const AngleTable& table,
                           const FitResult& fit, const DetectionReport& report) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  const int p = table.p();
  out << "index";
  for (int d = 0; d < p; ++d) out << ",y_" << d + 1;
  out << ",weight";
  for (int d = 0; d < p; ++d) out << ",j_" << d + 1;
  for (int d = 0; d < p; ++d) out << ",xhat_" << d + 1;
  out << ",d2,flag_distance,flag_weight\n";
  for (int i = 0; i < table.n(); ++i) {
    out << i;
    for (int d = 0; d < p; ++d) out << "," << table.angles(i, d);
    out << "," << fit.weights[i];
    for (int d = 0; d < p; ++d) out << "," << fit.j_hat(i, d);
    for (int d = 0; d < p; ++d) out << "," << fit.unwrapped(i, d);
    out << "," << report.d2[i] << "," << (report.flags[static_cast<std::size_t>(i)] ? 1 : 0)
        << "," << (report.weight_flags[static_cast<std::size_t>(i)] ? 1 : 0) << "\n";
  }
}

void write_ellipse_csv(const std::string& path, const ModelParams& params,
                       double cutoff, int segments) {
  if (params.dim() != 2)
    throw std::invalid_argument("write_ellipse_csv: p == 2 only");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  Eigen::LLT<Mat> llt(params.sigma);
  const Mat L = llt.matrixL();
  const double r = std::sqrt(cutoff);
  out << "x_1,x_2\n";
  for (int i = 0; i <= segments; ++i) {
    const double a = kTwoPi * i / segments;
    Vec u(2);
    u << std::cos(a), std::sin(a);
    const Vec x = params.mu + r * (L * u);
    out << x[0] << "," << x[1] << "\n";
  }
}

void write_flat_torus_csv(const std::string& path, const AngleTable& table,
                          const FitResult& fit, int j_min, int j_max) {
  if (j_min > j_max)
    throw std::invalid_argument("write_flat_torus_csv: empty j range");
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  const int p = table.p();
  out << "index";
  for (int d = 0; d < p; ++d) out << ",j_" << d + 1;
  for (int d = 0; d < p; ++d) out << ",x_" << d + 1;
  for (int d = 0; d < p; ++d) out << ",xhat_" << d + 1;
  out << "\n";
  std::vector<int> j(static_cast<std::size_t>(p), j_min);
  while (true) {
    for (int i = 0; i < table.n(); ++i) {
      out << i;
      for (int d = 0; d < p; ++d) out << "," << j[static_cast<std::size_t>(d)];
      for (int d = 0; d < p; ++d)
        out << "," << table.angles(i, d) + kTwoPi * j[static_cast<std::size_t>(d)];
      for (int d = 0; d < p; ++d) out << "," << fit.unwrapped(i, d);
      out << "\n";
    }
    int d = p - 1;
    while (d >= 0 && j[static_cast<std::size_t>(d)] == j_max) {
      j[static_cast<std::size_t>(d)] = j_min;
      --d;
    }
    if (d < 0) break;
    ++j[static_cast<std::size_t>(d)];
  }
}

void write_trials_csv(const std::string& path,
                      const std::vector<TrialMetrics>& rows) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  out << "trial,estimator,sqrt_as,delta_sigma,swamping,power,mean_weight,"
         "iterations,converged,failed,elapsed_seconds,seed\n";
  for (const auto& r : rows) {
    out << r.trial << "," << estimator_name(r.kind) << "," << r.sqrt_as << ","
        << r.delta_sigma << "," << r.swamping << ",";
    if (r.power) out << *r.power;
    out << "," << r.mean_weight << "," << r.iterations << ","
        << (r.converged ? 1 : 0) << "," << (r.failed ? 1 : 0) << ","
        << r.elapsed_seconds << "," << r.seed << "\n";
  }
}

void write_monitor_csv(const std::string& path, const MonitorResult& monitor) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  out << "observation,h,weight\n";
  for (Eigen::Index i = 0; i < monitor.weights.rows(); ++i)
    for (std::size_t g = 0; g < monitor.h_grid.size(); ++g)
      out << i << "," << monitor.h_grid[g] << ","
          << monitor.weights(i, static_cast<Eigen::Index>(g)) << "\n";
}

void write_monitor_curve_csv(const std::string& path,
                             const MonitorResult& monitor) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  out.precision(12);
  out << "h,mean_weight,downweighting,converged,failed\n";
  for (std::size_t g = 0; g < monitor.h_grid.size(); ++g)
    out << monitor.h_grid[g] << ","
        << 1.0 - monitor.downweighting[static_cast<Eigen::Index>(g)] << ","
        << monitor.downweighting[static_cast<Eigen::Index>(g)] << ","
        << (monitor.converged[g] ? 1 : 0) << "," << (monitor.failed[g] ? 1 : 0)
        << "\n";
}

void write_monitor_svg(const std::string& path, const MonitorResult& monitor,
                       double selected_h) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write " + path);
  const int width = 720, height = 480, margin = 50;
  const double x0 = std::log(monitor.h_grid.front());
  const double x1 = std::log(monitor.h_grid.back());
  auto sx = [&](double h) {
    return margin + (std::log(h) - x0) / (x1 - x0) * (width - 2 * margin);
  };
  auto sy = [&](double w) { return height - margin - w * (height - 2 * margin); };

  out << "<svg xmlns='http://www.w3.org/2000/svg' width='" << width
      << "' height='" << height << "'>\n";
  out << "<rect width='100%' height='100%' fill='white'/>\n";
  out << "<line x1='" << margin << "' y1='" << height - margin << "' x2='"
      << width - margin << "' y2='" << height - margin
      << "' stroke='black'/>\n";
  out << "<line x1='" << margin << "' y1='" << margin << "' x2='" << margin
      << "' y2='" << height - margin << "' stroke='black'/>\n";
  out << "<text x='" << width / 2 << "' y='" << height - 12
      << "' font-size='13' text-anchor='middle'>bandwidth h (log scale)"
         "</text>\n";
  out << "<text x='14' y='" << height / 2
      << "' font-size='13' text-anchor='middle' transform='rotate(-90 14 "
      << height / 2 << ")'>weight</text>\n";
  for (Eigen::Index i = 0; i < monitor.weights.rows(); ++i) {
    out << "<polyline fill='none' stroke='"
        << (monitor.weights(i, monitor.weights.cols() - 1) > 0.5 ? "#777777"
                                                                 : "#c04040")
        << "' stroke-width='0.7' points='";
    for (std::size_t g = 0; g < monitor.h_grid.size(); ++g)
      out << sx(monitor.h_grid[g]) << ","
          << sy(monitor.weights(i, static_cast<Eigen::Index>(g))) << " ";
    out << "'/>\n";
  }
  if (selected_h > 0.0) {
    out << "<line x1='" << sx(selected_h) << "' y1='" << margin << "' x2='"
        << sx(selected_h) << "' y2='" << height - margin
        << "' stroke='blue' stroke-dasharray='4 3'/>\n";
  }
  out << "</svg>\n";
}

namespace {

json params_to_json(const ModelParams& params) {
  json mu = json::array();
  for (Eigen::Index d = 0; d < params.mu.size(); ++d) mu.push_back(params.mu[d]);
  json sigma = json::array();
  for (Eigen::Index r = 0; r < params.sigma.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < params.sigma.cols(); ++c)
      row.push_back(params.sigma(r, c));
    sigma.push_back(row);
  }
  return json{{"mu", mu}, {"sigma", sigma}};
}

}  // namespace

std::string fit_report_json(const FitResult& fit, const DetectionReport& report,
                            const AngleTable& table, std::uint64_t seed) {
  int flagged = 0;
  for (bool f : report.flags) flagged += f ? 1 : 0;
  json doc{
      {"schema_version", 1},
      {"estimator", estimator_name(fit.kind)},
      {"n", table.n()},
      {"p", table.p()},
      {"columns", table.columns},
      {"converged", fit.converged},
      {"iterations", fit.iterations},
      {"estimates", params_to_json(fit.params)},
      {"log_likelihood", fit.log_lik},
      {"mean_weight", fit.mean_weight()},
      {"low_weight_warning", fit.low_weight_warning},
      {"alpha", report.alpha},
      {"cutoff", report.cutoff},
      {"flagged_fraction",
       static_cast<double>(flagged) / static_cast<double>(table.n())},
      {"seed", seed},
  };
  return doc.dump(2);
}

std::string aggregate_json(const std::vector<AggregateRow>& rows,
                           const ScenarioConfig& scenario) {
  json per_kind = json::object();
  auto summary = [](const MetricSummary& s) {
    return json{{"median", s.median}, {"q25", s.q25}, {"q75", s.q75}};
  };
  for (const auto& r : rows) {
    per_kind[estimator_name(r.kind)] = json{
        {"trials_ok", r.trials_ok},
        {"sqrt_as", summary(r.sqrt_as)},
        {"delta_sigma", summary(r.delta_sigma)},
        {"swamping", summary(r.swamping)},
        {"power", summary(r.power)},
        {"mean_weight_median", r.mean_weight_median},
    };
  }
  json doc{
      {"schema_version", 1},
      {"scenario",
       {{"n", scenario.n},
        {"p", scenario.p},
        {"sigma", scenario.sigma},
        {"eps", scenario.eps},
        {"k_eps", scenario.k_eps},
        {"sigma_eps", scenario.sigma_eps},
        {"condition_number", scenario.condition_number},
        {"lattice_J", scenario.lattice_J},
        {"n_trials", scenario.n_trials},
        {"seed", scenario.seed}}},
      {"estimators", per_kind},
  };
  return doc.dump(2);
}

RafKind raf_from_name(const std::string& name) {
  if (name == "gkl") return RafKind::GKL;
  if (name == "pwd") return RafKind::PWD;
  if (name == "schi") return RafKind::SCHI;
  throw std::invalid_argument("unknown RAF: " + name);
}

std::string raf_name(RafKind kind) {
  switch (kind) {
    case RafKind::GKL: return "gkl";
    case RafKind::PWD: return "pwd";
    case RafKind::SCHI: return "schi";
  }
  return "gkl";
}

namespace {

void require_keys(const json& obj, const std::string& section,
                  std::initializer_list<const char*> allowed) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool ok = false;
    for (const char* k : allowed)
      if (it.key() == k) {
        ok = true;
        break;
      }
    if (!ok)
      throw ParseError("config: unknown key '" + it.key() + "' in section '" +
                       section + "'");
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config " + path);
  json doc;
  try {
    in >> doc;
  } catch (const json::exception& e) {
    throw ParseError(std::string("config: ") + e.what());
  }
  if (!doc.is_object()) throw ParseError("config: top level must be an object");
  require_keys(doc, "top level",
               {"fit", "scenario", "detection", "monitor", "output", "seed",
                "estimator"});

  RunConfig cfg;
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("estimator")) cfg.estimator = doc["estimator"].get<std::string>();
  if (doc.contains("fit")) {
    const json& f = doc["fit"];
    require_keys(f, "fit",
                 {"raf", "raf_param", "bandwidth", "lattice_J", "tol",
                  "max_iter", "n_subsamples", "subsample_size", "ridge",
                  "root_delta_star", "root_mc_draws", "unwrap_form"});
    if (f.contains("raf")) cfg.fit.raf.kind = raf_from_name(f["raf"]);
    if (f.contains("raf_param")) cfg.fit.raf.param = f["raf_param"];
    if (f.contains("bandwidth")) cfg.fit.bandwidth = f["bandwidth"];
    if (f.contains("lattice_J")) cfg.fit.lattice_J = f["lattice_J"];
    if (f.contains("tol")) cfg.fit.tol = f["tol"];
    if (f.contains("max_iter")) cfg.fit.max_iter = f["max_iter"];
    if (f.contains("n_subsamples")) cfg.fit.n_subsamples = f["n_subsamples"];
    if (f.contains("subsample_size")) cfg.fit.subsample_size = f["subsample_size"];
    if (f.contains("ridge")) cfg.fit.ridge = f["ridge"];
    if (f.contains("root_delta_star")) cfg.fit.root_delta_star = f["root_delta_star"];
    if (f.contains("root_mc_draws")) cfg.fit.root_mc_draws = f["root_mc_draws"];
    if (f.contains("unwrap_form"))
      cfg.fit.unwrap_form = f["unwrap_form"] == "exact" ? UnwrapForm::Exact
                                                        : UnwrapForm::Approximate;
    if (!(cfg.fit.tol > 0.0)) throw ParseError("config: fit.tol must be > 0");
  }
  if (doc.contains("scenario")) {
    const json& s = doc["scenario"];
    require_keys(s, "scenario",
                 {"n", "p", "sigma", "eps", "k_eps", "sigma_eps", "lattice_J",
                  "condition_number", "n_trials", "seed", "contaminated_dims"});
    if (s.contains("n")) cfg.scenario.n = s["n"];
    if (s.contains("p")) cfg.scenario.p = s["p"];
    if (s.contains("sigma")) cfg.scenario.sigma = s["sigma"];
    if (s.contains("eps")) cfg.scenario.eps = s["eps"];
    if (s.contains("k_eps")) cfg.scenario.k_eps = s["k_eps"];
    if (s.contains("sigma_eps")) cfg.scenario.sigma_eps = s["sigma_eps"];
    if (s.contains("lattice_J")) cfg.scenario.lattice_J = s["lattice_J"];
    if (s.contains("condition_number"))
      cfg.scenario.condition_number = s["condition_number"];
    if (s.contains("n_trials")) cfg.scenario.n_trials = s["n_trials"];
    if (s.contains("seed")) cfg.scenario.seed = s["seed"].get<std::uint64_t>();
    if (s.contains("contaminated_dims"))
      cfg.scenario.contaminated_dims =
          s["contaminated_dims"].get<std::vector<int>>();
    if (cfg.scenario.eps < 0.0 || cfg.scenario.eps >= 0.5)
      throw ParseError("config: scenario.eps must be in [0, 0.5)");
  }
  if (doc.contains("detection")) {
    const json& d = doc["detection"];
    require_keys(d, "detection", {"alpha", "weight_threshold", "reference"});
    if (d.contains("alpha")) cfg.alpha = d["alpha"];
    if (d.contains("weight_threshold")) cfg.weight_threshold = d["weight_threshold"];
    if (d.contains("reference"))
      cfg.detection_reference = d["reference"] == "chi2-unwrapped"
                                    ? DistanceReference::Chi2Unwrapped
                                    : DistanceReference::Chi2;
    if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0))
      throw ParseError("config: detection.alpha must be in (0, 1)");
  }
  if (doc.contains("monitor")) {
    const json& m = doc["monitor"];
    require_keys(m, "monitor", {"grid", "grid_size"});
    if (m.contains("grid")) cfg.monitor_grid = m["grid"].get<std::vector<double>>();
    if (m.contains("grid_size")) cfg.monitor_grid_size = m["grid_size"];
  }
  if (doc.contains("output")) {
    const json& o = doc["output"];
    require_keys(o, "output", {"prefix"});
    if (o.contains("prefix")) cfg.output_prefix = o["prefix"];
  }
  return cfg;
}

}  // namespace wrapfit
