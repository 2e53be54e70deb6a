// Acceptance checks. One line per criterion; exit status is non-zero if any
// criterion fails. Pass criterion numbers as arguments to run a subset.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <unistd.h>

#include "support.hpp"
#include "swarical/cli.hpp"
#include "swarical/localization.hpp"
#include "swarical/metrics.hpp"
#include "swarical/plan_io.hpp"

using namespace swarical;
namespace fs = std::filesystem;

namespace {

enum class Verdict { Pass, Fail, NotReproduced };

struct Outcome {
  Verdict verdict;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double rel_err(double got, double want) { return std::abs(got - want) / std::max(1e-300, std::abs(want)); }

// 1 ------------------------------------------------------------------------

Outcome metric_oracles() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 200; ++i) {
    const auto a = testing::random_cloud(rng, 1 + static_cast<int>(rng.below(100)));
    const auto b = testing::random_cloud(rng, 1 + static_cast<int>(rng.below(100)));
    worst = std::max({worst, rel_err(hausdorff(a, b), testing::brute_hausdorff(a, b)),
                      rel_err(chamfer(a, b), testing::brute_chamfer(a, b))});
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-9 && secs < 10 ? Verdict::Pass : Verdict::Fail,
          fmt("200 pairs, worst relative error %.1e, %.2f s", worst, secs)};
}

// 2 ------------------------------------------------------------------------

Outcome mst_oracle() {
  const auto t0 = Clock::now();
  Rng rng(102);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = 2 + static_cast<int>(rng.below(7));
    const auto pts = testing::random_cloud(rng, n);
    worst = std::max(worst, rel_err(total_weight(build_mst(pts)), testing::exhaustive_mst_weight(pts)));
  }
  const double secs = seconds_since(t0);
  return {worst <= 1e-12 && secs < 30 ? Verdict::Pass : Verdict::Fail,
          fmt("100 instances of 2..8 points, worst relative error %.1e, %.2f s", worst, secs)};
}

// 3 ------------------------------------------------------------------------

Outcome correction_oracle() {
  PointCloud cloud;
  for (int i = 0; i < 6; ++i) cloud.push_back({{70.0 * (i % 3), 70.0 * (i / 3), 1000}, {0, 0, 1}});
  const auto pr = plan(cloud, 6, SensorSpec{}, 1);
  SimConfig cfg;
  cfg.technique = Technique::HC;
  cfg.seed = 3;
  cfg.run_ms = 20000;
  testing::CorrectionReplay replay(pr.plan);
  simulate(pr.plan, cfg, std::ref(replay));
  return {replay.checked > 0 && replay.mismatches == 0 ? Verdict::Pass : Verdict::Fail,
          fmt("%ld corrections replayed, %ld mismatches, worst abs diff %.1e mm", replay.checked, replay.mismatches,
              replay.worst_abs)};
}

// 4 ------------------------------------------------------------------------

Outcome planner_invariant() {
  const auto t0 = Clock::now();
  Rng rng(104);
  const int groups[] = {5, 10, 50, 150};
  long far_pairs = 0, pairs = 0, non_monotone = 0;
  for (int i = 0; i < 20; ++i) {
    const int f = 100 + static_cast<int>(rng.below(701));
    const int g = groups[i % 4];
    PointCloud cloud;
    for (int k = 0; k < f; ++k)
      cloud.push_back({{rng.uniform(0, 1500), rng.uniform(0, 1500), rng.uniform(0, 300)}, {0, 0, 1}});
    int prev_dark = std::numeric_limits<int>::max();
    for (double t_max : {80.0, 120.0, 200.0}) {
      SensorSpec s;
      s.t_min = 60;
      s.t_max = t_max;
      const auto pr = plan(cloud, g, s, static_cast<std::uint64_t>(i));
      for (const auto& [u, v] : localizing_pairs(pr.plan)) {
        ++pairs;
        if (distance(pr.plan.at(u).coordinate, pr.plan.at(v).coordinate) > t_max * (1 + 1e-12)) ++far_pairs;
      }
      if (pr.summary.dark_count > prev_dark) ++non_monotone;
      prev_dark = pr.summary.dark_count;
    }
  }
  const double secs = seconds_since(t0);
  return {far_pairs == 0 && non_monotone == 0 && secs < 60 ? Verdict::Pass : Verdict::Fail,
          fmt("%ld pairs, %ld beyond t_max, %ld dark-count increases with t_max, %.1f s", pairs, far_pairs,
              non_monotone, secs)};
}

// 5 ------------------------------------------------------------------------

// Skateboard sampled at the midpoint of the density bounds for [60, 80] mm.
PointCloud skateboard_cloud() { return sample_surface(shapes::skateboard(), 1275, 1); }

Outcome dark_trend() {
  const auto cloud = skateboard_cloud();
  std::string counts;
  int prev = std::numeric_limits<int>::max();
  bool monotone = true;
  for (int g : {5, 10, 50, 150, 200}) {
    const auto pr = plan(cloud, g, SensorSpec{}, 1);
    monotone = monotone && pr.summary.dark_count <= prev;
    prev = pr.summary.dark_count;
    counts += (counts.empty() ? "" : ", ") + std::to_string(pr.summary.dark_count);
  }
  return {monotone ? Verdict::Pass : Verdict::Fail, "dark FLSs for G = 5, 10, 50, 150, 200: " + counts};
}

// 6 ------------------------------------------------------------------------

Outcome mount_mix() {
  const auto pr = plan(skateboard_cloud(), 25, SensorSpec{}, 1);
  const double side = pr.summary.side_fraction();
  return {side >= 0.6 ? Verdict::Pass : Verdict::Fail,
          fmt("top %d, side %d, bottom %d, side fraction %.3f", pr.summary.top, pr.summary.side, pr.summary.bottom,
              side)};
}

// 7 ------------------------------------------------------------------------

Outcome noiseless_convergence() {
  const auto t0 = Clock::now();
  const auto pr = testing::reference_plan();
  SimConfig cfg;
  cfg.technique = Technique::ISR;
  cfg.seed = 1;
  cfg.noise = NoiseModel::noiseless();
  cfg.dr_epsilon_deg = 5;
  cfg.threshold_mm = 1;
  cfg.run_ms = 120000;
  const auto r = simulate(pr.plan, cfg);
  const double secs = seconds_since(t0);
  double reached = -1;
  for (const auto& s : r.series)
    if (s.hd_mm <= 2.0) {
      reached = s.t_ms;
      break;
    }
  const double final_hd = r.series.back().hd_mm;
  return {final_hd <= 2.0 && secs < 120 ? Verdict::Pass : Verdict::Fail,
          fmt("%zu FLSs, final HD %.3g mm, HD <= 2 mm from t = %.1f s, %.1f s wall", pr.plan.fls.size(), final_hd,
              reached / 1000.0, secs)};
}

// 8 and 9 share the ISR runs --------------------------------------------------

struct TechniqueRun {
  double steady_hd = 0.0;
  double distance = 0.0;
};

TechniqueRun run_default_noise(Technique t, std::uint64_t seed) {
  static const auto pr = testing::reference_plan();
  SimConfig cfg;
  cfg.technique = t;
  cfg.seed = seed;
  cfg.run_ms = 60000;
  const auto r = simulate(pr.plan, cfg);
  return {steady_state_hd(r.series), r.series.back().total_distance_mm};
}

Outcome technique_ordering() {
  const auto t0 = Clock::now();
  bool isr_le_hc = true, hc_lt_rsf = true, rsf_farther = true;
  std::string detail;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto isr = run_default_noise(Technique::ISR, seed);
    const auto hc = run_default_noise(Technique::HC, seed);
    const auto rsf = run_default_noise(Technique::RSF, seed);
    isr_le_hc = isr_le_hc && isr.steady_hd <= hc.steady_hd;
    hc_lt_rsf = hc_lt_rsf && hc.steady_hd < rsf.steady_hd;
    rsf_farther = rsf_farther && rsf.distance > isr.distance;
    detail += fmt("seed %d HD ISR %.1f HC %.1f RSF %.1f mm, distance ISR %.0f RSF %.0f mm; ", static_cast<int>(seed),
                  isr.steady_hd, hc.steady_hd, rsf.steady_hd, isr.distance, rsf.distance);
  }
  detail += fmt("ISR<=HC %s, HC<RSF %s, RSF distance>ISR %s, %.0f s", isr_le_hc ? "yes" : "no",
                hc_lt_rsf ? "yes" : "no", rsf_farther ? "yes" : "no", seconds_since(t0));
  return {isr_le_hc && hc_lt_rsf && rsf_farther ? Verdict::Pass : Verdict::Fail, detail};
}

Outcome error_amplification() {
  const auto pr = testing::reference_plan();
  SimConfig cfg;
  cfg.technique = Technique::ISR;
  cfg.seed = 1;
  cfg.run_ms = 60000;
  cfg.noise.curve = CalibrationCurve::flat(1.15);
  const auto r = simulate(pr.plan, cfg);
  const double hd = steady_state_hd(r.series);
  // Worst single-pair error: the full percentage at the longest allowed range.
  const double pair = 0.0115 * pr.plan.sensor.t_max;
  return {hd > 5 * pair ? Verdict::Pass : Verdict::Fail,
          fmt("steady HD %.2f mm vs single-pair error %.2f mm (%.1fx)", hd, pair, hd / pair)};
}

// 10 -----------------------------------------------------------------------

Outcome analytical_model() {
  const auto pr = testing::reference_plan();
  const auto truth = pr.plan.ground_truth();
  bool ok = true;
  std::string detail;
  for (double eps : {0.5, 1.15, 2.0}) {
    SimConfig cfg;
    cfg.technique = Technique::ISR;
    cfg.seed = 1;
    cfg.run_ms = 60000;
    cfg.dr_epsilon_deg = 0;
    cfg.noise.curve = CalibrationCurve::flat(eps);
    cfg.noise.sd_factor = 0;
    const auto r = simulate(pr.plan, cfg);
    const double sim = steady_state_hd(r.series);
    const double est = estimate_hd(truth, eps);
    const double rel = std::abs(sim - est) / est;
    ok = ok && rel <= 0.10;
    detail += fmt("eps %.2f%% simulated %.2f estimated %.2f mm (%.1f%%); ", eps, sim, est, 100 * rel);
  }
  // Closed form: every cube corner moves eps% of its distance to the centre.
  std::vector<Vec3> cube;
  for (int i = 0; i < 8; ++i) cube.push_back({100.0 * (i & 1), 100.0 * ((i >> 1) & 1), 100.0 * ((i >> 2) & 1)});
  double worst = 0.0;
  for (double eps : {0.5, 1.15, 2.0, 2.5})
    worst = std::max(worst, rel_err(estimate_hd(cube, eps), eps / 100 * 50 * std::sqrt(3.0)));
  ok = ok && worst <= 1e-9;
  detail += fmt("cube closed form worst relative error %.1e", worst);
  return {ok ? Verdict::Pass : Verdict::Fail, detail};
}

// 11 -----------------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome determinism() {
  const fs::path dir = fs::temp_directory_path() / fmt("swarical-acceptance-%ld", static_cast<long>(::getpid()));
  fs::create_directories(dir);
  save_plan(testing::reference_plan().plan, dir / "plan.json");
  std::ofstream(dir / "config.json") << R"({"technique": "ISR", "run_ms": 10000})";
  std::vector<std::string> csv;
  for (int i = 0; i < 3; ++i) {
    const auto out = dir / fmt("run%d", i);
    std::ostringstream o, e;
    const int code = cli::run({"simulate", "--plan", (dir / "plan.json").string(), "--config",
                               (dir / "config.json").string(), "--seed", "11", "--no-events", "--out", out.string()},
                              o, e);
    if (code != 0) return {Verdict::Fail, "simulate exited with " + std::to_string(code) + ": " + e.str()};
    csv.push_back(slurp(out / "series.csv"));
  }
  const std::string golden = slurp(fs::path(SWARICAL_TEST_DATA_DIR) / "golden_series_isr_seed11.csv");
  std::error_code ec;
  fs::remove_all(dir, ec);
  const bool same = csv[0] == csv[1] && csv[1] == csv[2];
  const bool matches = !golden.empty() && csv[0] == golden;
  return {same && matches ? Verdict::Pass : Verdict::Fail,
          fmt("3 runs %s, golden file %s (compare on a second platform by running this binary there)",
              same ? "byte-identical" : "differ", golden.empty() ? "missing" : matches ? "matches" : "differs")};
}

// 12 -----------------------------------------------------------------------

Outcome baseline_comparison() {
  return {Verdict::NotReproduced, "comparison against the other swarm system is out of scope, see README"};
}

}  // namespace

int main(int argc, char** argv) {
  struct Criterion {
    int id;
    const char* name;
    Outcome (*run)();
  };
  const Criterion all[] = {
      {1, "metric oracles", metric_oracles},
      {2, "MST oracle", mst_oracle},
      {3, "correction vector oracle", correction_oracle},
      {4, "planner hard invariant", planner_invariant},
      {5, "dark FLS trend", dark_trend},
      {6, "mount mix", mount_mix},
      {7, "noiseless convergence", noiseless_convergence},
      {8, "technique ordering", technique_ordering},
      {9, "error amplification", error_amplification},
      {10, "analytical model", analytical_model},
      {11, "determinism", determinism},
      {12, "baseline comparison", baseline_comparison},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::stoi(argv[i]));

  int failed = 0;
  for (const auto& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {Verdict::Fail, std::string("threw: ") + e.what()};
    }
    const char* tag = o.verdict == Verdict::Pass ? "PASS" : o.verdict == Verdict::Fail ? "FAIL" : "NOT REPRODUCED";
    if (o.verdict == Verdict::Fail) ++failed;
    std::cout << "criterion " << c.id << " [" << tag << "] " << c.name << ": " << o.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
