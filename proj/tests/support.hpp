#pragma once

// Independent reference implementations used as test oracles, plus the
// reference scenario shared by the unit and acceptance suites.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "swarical/localization.hpp"
#include "swarical/mesh.hpp"
#include "swarical/planner.hpp"
#include "swarical/rng.hpp"
#include "swarical/shapes.hpp"

namespace swarical::testing {

inline std::vector<Vec3> random_cloud(Rng& rng, int n, double lo = 0.0, double hi = 1000.0) {
  std::vector<Vec3> out;
  for (int i = 0; i < n; ++i) out.push_back({rng.uniform(lo, hi), rng.uniform(lo, hi), rng.uniform(lo, hi)});
  return out;
}

inline double brute_hausdorff(std::span<const Vec3> a, std::span<const Vec3> b) {
  auto directed = [](std::span<const Vec3> x, std::span<const Vec3> y) {
    double worst = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) best = std::min(best, std::sqrt((p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z)));
      worst = std::max(worst, best);
    }
    return worst;
  };
  return std::max(directed(a, b), directed(b, a));
}

inline double brute_chamfer(std::span<const Vec3> a, std::span<const Vec3> b) {
  auto directed = [](std::span<const Vec3> x, std::span<const Vec3> y) {
    double sum = 0.0;
    for (const auto& p : x) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& q : y) best = std::min(best, (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y) + (p.z - q.z) * (p.z - q.z));
      sum += best;
    }
    return sum / static_cast<double>(x.size());
  };
  return directed(a, b) + directed(b, a);
}

/// Minimum spanning-tree weight by enumerating every labelled tree on n
/// vertices through its Pruefer sequence (n^(n-2) trees).
inline double exhaustive_mst_weight(std::span<const Vec3> pts) {
  const int n = static_cast<int>(pts.size());
  if (n <= 1) return 0.0;
  auto w = [&](int a, int b) {
    const Vec3 d = pts[static_cast<std::size_t>(a)] - pts[static_cast<std::size_t>(b)];
    return std::sqrt(d.x * d.x + d.y * d.y + d.z * d.z);
  };
  if (n == 2) return w(0, 1);
  const int len = n - 2;
  std::vector<int> seq(static_cast<std::size_t>(len), 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> degree(static_cast<std::size_t>(n), 1);
    for (int s : seq) ++degree[static_cast<std::size_t>(s)];
    double total = 0.0;
    for (int s : seq) {
      int leaf = 0;
      while (degree[static_cast<std::size_t>(leaf)] != 1) ++leaf;
      total += w(leaf, s);
      --degree[static_cast<std::size_t>(leaf)];
      --degree[static_cast<std::size_t>(s)];
    }
    int u = -1, v = -1;
    for (int i = 0; i < n; ++i)
      if (degree[static_cast<std::size_t>(i)] == 1) (u < 0 ? u : v) = i;
    total += w(u, v);
    best = std::min(best, total);

    int i = len - 1;
    while (i >= 0 && seq[static_cast<std::size_t>(i)] == n - 1) seq[static_cast<std::size_t>(i--)] = 0;
    if (i < 0) break;
    ++seq[static_cast<std::size_t>(i)];
  }
  return best;
}

/// Correction by explicit path sums: for every member j whose tree path to
/// `self` has all poses known, walk both ends up to their lowest common
/// ancestor and add the poses along the way.
inline std::optional<CorrectionVector> brute_correction(const SwarmTopology& topo, int self,
                                                        const std::vector<std::optional<Vec3>>& table) {
  const int n = static_cast<int>(topo.members.size());
  auto ancestors = [&](int x) {
    std::vector<int> chain{x};
    while (topo.parent[static_cast<std::size_t>(chain.back())] >= 0)
      chain.push_back(topo.parent[static_cast<std::size_t>(chain.back())]);
    return chain;
  };
  const auto up_self = ancestors(self);
  Vec3 sum;
  int count = 1;
  for (int j = 0; j < n; ++j) {
    if (j == self) continue;
    const auto up_j = ancestors(j);
    int lca = -1;
    for (int a : up_self)
      if (std::find(up_j.begin(), up_j.end(), a) != up_j.end()) {
        lca = a;
        break;
      }
    // self - j = (self - lca) - (j - lca); each term is a sum of child-to-parent poses.
    Vec3 est;
    bool known = true;
    for (int x = self; x != lca && known; x = topo.parent[static_cast<std::size_t>(x)]) {
      if (!table[static_cast<std::size_t>(x)]) known = false;
      else est += *table[static_cast<std::size_t>(x)];
    }
    for (int x = j; x != lca && known; x = topo.parent[static_cast<std::size_t>(x)]) {
      if (!table[static_cast<std::size_t>(x)]) known = false;
      else est -= *table[static_cast<std::size_t>(x)];
    }
    if (!known) continue;
    sum += (topo.ground_truth[static_cast<std::size_t>(self)] - topo.ground_truth[static_cast<std::size_t>(j)]) - est;
    ++count;
  }
  if (count == 1) return std::nullopt;
  return CorrectionVector{sum / static_cast<double>(count), count};
}

/// Rebuilds every agent's pose table from table_set, table_shift,
/// measure_fail and clear records, and checks each logged HC/ISR
/// correction against brute_correction.
class CorrectionReplay {
 public:
  explicit CorrectionReplay(const DeploymentPlan& plan) : topo_(build_topologies(plan)) {
    where_.assign(plan.fls.size(), {-1, -1});
    for (std::size_t s = 0; s < topo_.size(); ++s)
      for (std::size_t k = 0; k < topo_[s].members.size(); ++k)
        where_[static_cast<std::size_t>(topo_[s].members[k])] = {static_cast<int>(s), static_cast<int>(k)};
    tables_.resize(plan.fls.size());
    for (std::size_t i = 0; i < plan.fls.size(); ++i)
      tables_[i].assign(topo_[static_cast<std::size_t>(where_[i].first)].members.size(), std::nullopt);
  }

  void operator()(const LogRecord& r) {
    if (r.agent < 0) return;
    auto& table = tables_[static_cast<std::size_t>(r.agent)];
    const std::string kind(r.kind);
    if (kind == "table_set") {
      table[static_cast<std::size_t>(where_[static_cast<std::size_t>(r.other)].second)] = *r.vec;
    } else if (kind == "table_shift") {
      *table[static_cast<std::size_t>(where_[static_cast<std::size_t>(r.other)].second)] += *r.vec;
    } else if (kind == "measure_fail") {
      table[static_cast<std::size_t>(where_[static_cast<std::size_t>(r.agent)].second)].reset();
    } else if (kind == "clear") {
      std::fill(table.begin(), table.end(), std::nullopt);
    } else if (kind == "correction" && averaging_) {
      check(r, table);
    }
  }

  /// RSF corrections are single-anchor, not averages; turn checking off for them.
  void averaging(bool on) { averaging_ = on; }

  long checked = 0;
  long mismatches = 0;
  double worst_abs = 0.0;

 private:
  void check(const LogRecord& r, const std::vector<std::optional<Vec3>>& table) {
    const auto [s, k] = where_[static_cast<std::size_t>(r.agent)];
    const auto ref = brute_correction(topo_[static_cast<std::size_t>(s)], k, table);
    ++checked;
    if (!ref || ref->contributor_count != *r.count) {
      ++mismatches;
      return;
    }
    const Vec3 d = ref->v - *r.vec;
    const double err = std::max({std::abs(d.x), std::abs(d.y), std::abs(d.z)});
    const double scale = std::max(1.0, ref->v.norm());
    worst_abs = std::max(worst_abs, err);
    if (err > 1e-9 * scale) ++mismatches;
  }

  std::vector<SwarmTopology> topo_;
  std::vector<std::pair<int, int>> where_;
  std::vector<std::vector<std::optional<Vec3>>> tables_;
  bool averaging_ = true;
};

/// Bounding-box minimum of a plan's coordinates.
inline Vec3 plan_min_corner(const DeploymentPlan& plan) {
  Vec3 lo = plan.fls.front().coordinate;
  for (const auto& r : plan.fls)
    lo = {std::min(lo.x, r.coordinate.x), std::min(lo.y, r.coordinate.y), std::min(lo.z, r.coordinate.z)};
  return lo;
}

/// Reference scenario: 150 samples on the flat panel, sensor range
/// [80, 120] mm, swarms of 25.
inline SensorSpec reference_sensor() {
  SensorSpec s;
  s.t_min = 80.0;
  s.t_max = 120.0;
  return s;
}

inline PlanResult reference_plan() {
  const auto cloud = sample_surface(shapes::panel(), 150, 7);
  return plan(cloud, 25, reference_sensor(), 7);
}

}  // namespace swarical::testing
