#include "swarical/cli.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "swarical/core_model.hpp"
#include "swarical/localization.hpp"
#include "swarical/mesh.hpp"
#include "swarical/plan_io.hpp"
#include "swarical/planner.hpp"
#include "swarical/sensor_noise.hpp"
#include "swarical/sim.hpp"
#include "swarical/text.hpp"

#ifndef SWARICAL_VERSION
#define SWARICAL_VERSION "0.0.0-unknown"
#endif

namespace swarical::cli {

namespace fs = std::filesystem;

namespace {

enum class Level { Error = 0, Info = 1, Debug = 2 };

// Diagnostics on stderr, filtered by SWARICAL_LOG.
class Logger {
 public:
  explicit Logger(std::ostream& err) : err_(err) {
    const char* env = std::getenv("SWARICAL_LOG");
    if (!env) return;
    const std::string_view v(env);
    if (v == "error") {
      level_ = Level::Error;
    } else if (v == "debug") {
      level_ = Level::Debug;
    } else if (v != "info") {
      err_ << "warning: SWARICAL_LOG=" << v << " not understood, using info\n";
    }
  }

  void error(const std::string& msg) { write(Level::Error, "error", msg); }
  void info(const std::string& msg) { write(Level::Info, "info", msg); }
  void debug(const std::string& msg) { write(Level::Debug, "debug", msg); }

 private:
  void write(Level l, const char* tag, const std::string& msg) {
    if (l > level_) return;
    const std::lock_guard lock(mu_);
    err_ << tag << ": " << msg << '\n';
  }

  std::ostream& err_;
  Level level_ = Level::Info;
  std::mutex mu_;
};

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
  if (!out) throw Error("write failed: " + path.string());
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error("cannot create " + dir.string() + ": " + ec.message());
}

RunManifest manifest_for(std::string command) {
  RunManifest m;
  m.command = std::move(command);
  m.version = version_string();
  m.started_at = utc_now();
  return m;
}

// ---- plan ----

struct PlanArgs {
  std::string mesh, cloud, out, calibration;
  int g = 0;
  std::optional<double> t_min, t_max, error_pct;
  double radius = SensorSpec{}.radius_r;
  double fov = SensorSpec{}.fov_half_angle;
  std::uint64_t seed = 1;
  std::optional<long> count;
};

int cmd_plan(const PlanArgs& a, std::ostream& out, Logger& log) {
  auto manifest = manifest_for("plan");
  manifest.seed = a.seed;

  SensorSpec spec;
  spec.radius_r = a.radius;
  spec.fov_half_angle = a.fov;
  if (a.error_pct) {
    const auto curve = a.calibration.empty() ? default_calibration() : load_calibration(a.calibration);
    const auto range = range_for_error_pct(curve, *a.error_pct);
    if (!range) throw ValidationError("no distance keeps the error within " + fmt17(*a.error_pct) + "%");
    spec.t_min = range->first;
    spec.t_max = range->second;
    if (!a.calibration.empty()) manifest.config_path = a.calibration;
    log.info("error " + fmt17(*a.error_pct) + "% -> range [" + fmt17(spec.t_min) + ", " + fmt17(spec.t_max) + "] mm");
  }
  if (a.t_min) spec.t_min = *a.t_min;
  if (a.t_max) spec.t_max = *a.t_max;
  spec.validate();

  make_dir(a.out);
  PointCloud cloud;
  if (!a.mesh.empty()) {
    manifest.inputs.push_back(a.mesh);
    const auto mesh = load_obj(a.mesh);
    const auto bounds = density_bounds(spec, mesh.total_area());
    const long n = a.count.value_or((bounds.n_min + bounds.n_max) / 2);
    if (n < 1) throw ValidationError("sample count must be positive");
    log.info("mesh area " + fmt17(mesh.total_area()) + " mm^2, FLS count bounds [" + std::to_string(bounds.n_min) +
             ", " + std::to_string(bounds.n_max) + "], sampling " + std::to_string(n));
    const auto report = sample_surface_report(mesh, static_cast<int>(n), a.seed);
    if (report.relaxations > 0)
      log.info("sampler relaxed its radius " + std::to_string(report.relaxations) + " times");
    cloud = report.cloud;
    const auto cloud_path = fs::path(a.out) / "cloud.csv";
    save_cloud_csv(cloud, cloud_path);
    manifest.outputs.push_back(cloud_path.string());
  } else {
    manifest.inputs.push_back(a.cloud);
    cloud = load_cloud_csv(a.cloud);
  }

  const auto result = plan(cloud, a.g, spec, a.seed);
  const auto plan_path = fs::path(a.out) / "plan.json";
  const auto summary_path = fs::path(a.out) / "summary.json";
  save_plan(result.plan, plan_path);
  write_text(summary_path, result.summary.to_json().dump(2) + "\n");
  manifest.outputs.push_back(plan_path.string());
  manifest.outputs.push_back(summary_path.string());
  write_manifest(manifest, a.out);

  const auto& s = result.summary;
  out << "swarms: " << s.n_swarms << "  illuminating: " << s.f << "\n";
  out << "mounts: top=" << s.top << " side=" << s.side << " bottom=" << s.bottom
      << " (side fraction " << fmt17(s.side_fraction()) << ")\n";
  out << "dark: " << s.dark_count << "\n";
  return kOk;
}

// ---- simulate ----

struct SimulateArgs {
  std::string plan, config, out;
  std::optional<std::uint64_t> seed;
  std::vector<std::uint64_t> seeds;
  int jobs = 1;
  bool events = true;
  bool trace = false;
  bool exclude_dark = false;
};

// Per-message bookkeeping; it dominates the log, so it is only kept with --trace.
bool is_trace_kind(std::string_view kind) {
  return kind == "table_set" || kind == "table_shift" || kind == "deliver_pose";
}

void simulate_one(const DeploymentPlan& plan, SimConfig cfg, const SimulateArgs& a, const fs::path& dir,
                  std::ostream& out, std::mutex& out_mu, Logger& log) {
  auto manifest = manifest_for("simulate");
  manifest.config_path = a.config;
  manifest.inputs = {a.plan, a.config};
  manifest.seed = cfg.seed;
  make_dir(dir);

  const auto events_path = dir / "events.jsonl";
  const auto series_path = dir / "series.csv";
  std::ofstream events;
  LogSink sink;
  if (a.events) {
    events.open(events_path, std::ios::binary);
    if (!events) throw Error("cannot write " + events_path.string());
    sink = [&events, trace = a.trace](const LogRecord& r) {
      if (trace || !is_trace_kind(r.kind)) write_log_line(r, events);
    };
    manifest.outputs.push_back(events_path.string());
  }

  log.debug("seed " + std::to_string(cfg.seed) + ": running " + std::string(to_string(cfg.technique)) + " for " +
            fmt17(cfg.run_ms) + " ms");
  const auto t0 = std::chrono::steady_clock::now();
  const auto result = simulate(plan, cfg, sink);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (events.is_open()) {
    events.close();
    if (!events) throw Error("write failed: " + events_path.string());
  }

  std::ostringstream csv;
  write_series_csv(result.series, csv);
  write_text(series_path, csv.str());
  manifest.outputs.push_back(series_path.string());
  write_manifest(manifest, dir);

  log.info("seed " + std::to_string(cfg.seed) + ": " + std::to_string(result.events) + " events in " +
           fmt17(std::round(wall * 1000.0) / 1000.0) + " s");
  const std::lock_guard lock(out_mu);
  if (!result.series.empty()) {
    const auto& last = result.series.back();
    out << "seed " << cfg.seed << ": final hd_mm=" << fmt17(last.hd_mm) << " cd_mm2=" << fmt17(last.cd_mm2)
        << " total_distance_mm=" << fmt17(last.total_distance_mm) << "\n";
  }
}

int cmd_simulate(const SimulateArgs& a, std::ostream& out, Logger& log) {
  const auto plan = load_plan(a.plan);
  validate_plan(plan);
  auto base = load_sim_config(a.config);
  if (a.seed) base.seed = *a.seed;
  if (a.exclude_dark) base.exclude_dark_from_metrics = true;
  base.validate();

  std::mutex out_mu;
  if (a.seeds.size() <= 1) {
    if (a.seeds.size() == 1) base.seed = a.seeds.front();
    simulate_one(plan, base, a, a.out, out, out_mu, log);
    return kOk;
  }

  // Sweep: one subdirectory per seed, each with its own manifest.
  make_dir(a.out);
  auto top = manifest_for("simulate");
  top.config_path = a.config;
  top.inputs = {a.plan, a.config};
  for (auto s : a.seeds) top.outputs.push_back((fs::path(a.out) / ("seed-" + std::to_string(s))).string());
  write_manifest(top, a.out);

  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(a.seeds.size());
  auto worker = [&] {
    for (std::size_t i = next++; i < a.seeds.size(); i = next++) {
      try {
        auto cfg = base;
        cfg.seed = a.seeds[i];
        simulate_one(plan, cfg, a, fs::path(a.out) / ("seed-" + std::to_string(cfg.seed)), out, out_mu, log);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const auto n_threads = static_cast<std::size_t>(std::clamp<int>(a.jobs, 1, static_cast<int>(a.seeds.size())));
  {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  return kOk;
}

// ---- analyze ----

struct AnalyzeArgs {
  std::vector<std::string> series, labels;
  std::string out;
  double threshold_mm = 1.0;
};

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, Logger& log) {
  if (!a.labels.empty() && a.labels.size() != a.series.size())
    throw ValidationError("--label must be given once per --series");

  std::vector<std::pair<std::string, MetricSeries>> groups;
  for (std::size_t i = 0; i < a.series.size(); ++i) {
    std::string label = a.labels.empty() ? a.series[i] : a.labels[i];
    for (const auto& g : groups)
      if (g.first == label) throw ValidationError("duplicate series label '" + label + "'");
    log.debug("reading " + a.series[i]);
    groups.emplace_back(std::move(label), load_series_csv(a.series[i]));
  }

  make_dir(a.out);
  const auto joined_path = fs::path(a.out) / "joined.csv";
  const auto summary_path = fs::path(a.out) / "summary.json";
  std::ostringstream csv;
  write_joined_csv(groups, csv);
  write_text(joined_path, csv.str());

  auto summaries = nlohmann::json::array();
  for (const auto& [label, series] : groups) {
    const auto s = summarize_series(label, series, a.threshold_mm);
    summaries.push_back(s.to_json());
    out << label << ": final hd_mm=" << fmt17(s.final_hd_mm) << " cd_mm2=" << fmt17(s.final_cd_mm2)
        << " total_distance_mm=" << fmt17(s.total_distance_mm) << " time_to_threshold_ms="
        << (s.time_to_threshold_ms ? fmt17(*s.time_to_threshold_ms) : std::string("not reached")) << "\n";
  }
  nlohmann::json doc;
  doc["threshold_mm"] = a.threshold_mm;
  doc["series"] = std::move(summaries);
  write_text(summary_path, doc.dump(2) + "\n");

  auto manifest = manifest_for("analyze");
  manifest.inputs = a.series;
  manifest.outputs = {joined_path.string(), summary_path.string()};
  write_manifest(manifest, a.out);
  return kOk;
}

// ---- estimate-error ----

struct EstimateArgs {
  std::string plan, out;
  double epsilon_pct = 0.0;
};

int cmd_estimate(const EstimateArgs& a, std::ostream& out) {
  const auto plan = load_plan(a.plan);
  std::vector<Vec3> cloud;
  cloud.reserve(plan.fls.size());
  for (const auto& f : plan.fls) cloud.push_back(f.coordinate);
  nlohmann::json j;
  j["epsilon_pct"] = a.epsilon_pct;
  j["estimated_hd_mm"] = estimate_hd(cloud, a.epsilon_pct);
  out << j.dump() << "\n";
  if (!a.out.empty()) {
    make_dir(a.out);
    const auto path = fs::path(a.out) / "estimate.json";
    write_text(path, j.dump(2) + "\n");
    auto manifest = manifest_for("estimate-error");
    manifest.inputs = {a.plan};
    manifest.outputs = {path.string()};
    write_manifest(manifest, a.out);
  }
  return kOk;
}

}  // namespace

nlohmann::json RunManifest::to_json() const {
  nlohmann::json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["inputs"] = inputs;
  j["outputs"] = outputs;
  j["seed"] = seed ? nlohmann::json(*seed) : nlohmann::json(nullptr);
  j["version"] = version;
  j["started_at"] = started_at;
  return j;
}

void write_manifest(const RunManifest& m, const fs::path& dir) {
  write_text(dir / "manifest.json", m.to_json().dump(2) + "\n");
}

std::string version_string() { return SWARICAL_VERSION; }

nlohmann::json SeriesSummary::to_json() const {
  nlohmann::json j;
  j["label"] = label;
  j["final_hd_mm"] = final_hd_mm;
  j["final_cd_mm2"] = final_cd_mm2;
  j["total_distance_mm"] = total_distance_mm;
  j["moves"] = moves;
  j["steady_hd_mm"] = steady_hd_mm;
  j["time_to_threshold_ms"] = time_to_threshold_ms ? nlohmann::json(*time_to_threshold_ms) : nlohmann::json("not reached");
  return j;
}

SeriesSummary summarize_series(const std::string& label, const MetricSeries& series, double hd_threshold_mm) {
  if (series.empty()) throw ValidationError("series '" + label + "' has no samples");
  SeriesSummary s;
  s.label = label;
  const auto& last = series.back();
  s.final_hd_mm = last.hd_mm;
  s.final_cd_mm2 = last.cd_mm2;
  s.total_distance_mm = last.total_distance_mm;
  s.moves = last.moves;
  s.steady_hd_mm = steady_state_hd(series);
  for (const auto& m : series)
    if (m.hd_mm <= hd_threshold_mm) {
      s.time_to_threshold_ms = m.t_ms;
      break;
    }
  return s;
}

void write_joined_csv(const std::vector<std::pair<std::string, MetricSeries>>& groups, std::ostream& out) {
  out << "label,t_ms,hd_mm,cd_mm2,total_distance_mm,moves\n";
  for (const auto& [label, series] : groups) {
    // Labels are paths or user text; quote when a comma or quote would break the row.
    std::string cell = label;
    if (cell.find_first_of(",\"\n") != std::string::npos) {
      std::string q = "\"";
      for (char c : cell) q += c == '"' ? std::string("\"\"") : std::string(1, c);
      cell = q + "\"";
    }
    for (const auto& m : series)
      out << cell << ',' << fmt17(m.t_ms) << ',' << fmt17(m.hd_mm) << ',' << fmt17(m.cd_mm2) << ','
          << fmt17(m.total_distance_mm) << ',' << m.moves << '\n';
  }
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  Logger log(err);

  CLI::App app{"Swarical swarm localization simulator"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  PlanArgs pa;
  auto* plan_cmd = app.add_subcommand("plan", "Build a deployment plan from a mesh or point cloud");
  auto* in_opt = plan_cmd->add_option("--mesh", pa.mesh, "OBJ mesh to sample")->check(CLI::ExistingFile);
  plan_cmd->add_option("--cloud", pa.cloud, "point cloud CSV")->check(CLI::ExistingFile)->excludes(in_opt);
  plan_cmd->add_option("--g", pa.g, "FLSs per swarm")->required()->check(CLI::PositiveNumber);
  plan_cmd->add_option("--tmin", pa.t_min, "minimum sensing distance (mm)");
  plan_cmd->add_option("--tmax", pa.t_max, "maximum sensing distance (mm)");
  auto* err_opt = plan_cmd->add_option("--error-pct", pa.error_pct,
                                       "derive --tmin/--tmax from the calibration curve instead");
  plan_cmd->add_option("--calibration", pa.calibration, "calibration CSV for --error-pct")
      ->check(CLI::ExistingFile)
      ->needs(err_opt);
  plan_cmd->add_option("--radius", pa.radius, "FLS radius (mm)")->capture_default_str();
  plan_cmd->add_option("--fov", pa.fov, "camera half field of view (degrees)")->capture_default_str();
  plan_cmd->add_option("--seed", pa.seed, "random seed")->capture_default_str();
  plan_cmd->add_option("--count", pa.count, "FLS count when sampling a mesh");
  plan_cmd->add_option("--out", pa.out, "output directory")->required();

  SimulateArgs sa;
  auto* sim_cmd = app.add_subcommand("simulate", "Run a localization technique on a plan");
  sim_cmd->add_option("--plan", sa.plan, "plan JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--config", sa.config, "simulation config JSON")->required()->check(CLI::ExistingFile);
  sim_cmd->add_option("--out", sa.out, "output directory")->required();
  auto* seed_opt = sim_cmd->add_option("--seed", sa.seed, "override the config seed");
  sim_cmd->add_option("--seeds", sa.seeds, "run several seeds, one subdirectory each")->excludes(seed_opt);
  sim_cmd->add_option("--jobs", sa.jobs, "parallel runs for --seeds")->capture_default_str()->check(CLI::PositiveNumber);
  sim_cmd->add_flag("--events,!--no-events", sa.events, "write the event log (default on)");
  sim_cmd->add_flag("--exclude-dark", sa.exclude_dark, "leave dark FLSs out of the metrics");
  sim_cmd->add_flag("--trace", sa.trace, "also log every pose-table update and delivery");

  AnalyzeArgs aa;
  auto* an_cmd = app.add_subcommand("analyze", "Join metric series and summarize them");
  an_cmd->add_option("--series", aa.series, "series CSV files")->required()->check(CLI::ExistingFile);
  an_cmd->add_option("--label", aa.labels, "label per series (default: the path)");
  an_cmd->add_option("--threshold", aa.threshold_mm, "HD level for time-to-threshold (mm)")->capture_default_str();
  an_cmd->add_option("--out", aa.out, "output directory")->required();

  EstimateArgs ea;
  auto* est_cmd = app.add_subcommand("estimate-error", "Analytical HD for a uniform percentage error");
  est_cmd->add_option("--plan", ea.plan, "plan JSON")->required()->check(CLI::ExistingFile);
  est_cmd->add_option("--epsilon-pct", ea.epsilon_pct, "sensing error (%)")
      ->required()
      ->check(CLI::NonNegativeNumber);
  est_cmd->add_option("--out", ea.out, "also write estimate.json and a manifest here");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
    if (plan_cmd->parsed()) {
      if (pa.mesh.empty() && pa.cloud.empty()) throw CLI::ValidationError("plan", "give --mesh or --cloud");
      if (!pa.error_pct && (!pa.t_min || !pa.t_max))
        throw CLI::RequiredError("plan: --tmin and --tmax (or --error-pct)");
    }
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (plan_cmd->parsed()) return cmd_plan(pa, out, log);
    if (sim_cmd->parsed()) return cmd_simulate(sa, out, log);
    if (an_cmd->parsed()) return cmd_analyze(aa, out, log);
    if (est_cmd->parsed()) return cmd_estimate(ea, out);
  } catch (const ValidationError& e) {
    log.error(e.what());
    return kUsage;
  } catch (const nlohmann::json::exception& e) {
    log.error(std::string("malformed JSON: ") + e.what());
    return kUsage;
  } catch (const std::exception& e) {
    log.error(e.what());
    return kRuntime;
  }
  return kUsage;
}

}  // namespace swarical::cli
