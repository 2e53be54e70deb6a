#include "swarical/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <tuple>

#include "swarical/rng.hpp"

namespace swarical {

namespace {

constexpr int kMaxLloydIterations = 300;

double sse_of(std::span<const Vec3> pts, const std::vector<int>& labels,
              const std::vector<Vec3>& centroids) {
  double sse = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i)
    sse += distance2(pts[i], centroids[static_cast<std::size_t>(labels[i])]);
  return sse;
}

int nearest_centroid(const Vec3& p, const std::vector<Vec3>& centroids) {
  int best = 0;
  double best_d = distance2(p, centroids[0]);
  for (std::size_t c = 1; c < centroids.size(); ++c) {
    const double d = distance2(p, centroids[c]);
    if (d < best_d) {
      best_d = d;
      best = static_cast<int>(c);
    }
  }
  return best;
}

}  // namespace

ClusterAssignment cluster_kmeans(std::span<const Vec3> points, int g, std::uint64_t seed) {
  if (g < 1) throw ValidationError("group size g must be >= 1");
  if (points.empty()) throw ValidationError("cannot cluster an empty cloud");
  const std::size_t n = points.size();
  const int k = static_cast<int>((n + static_cast<std::size_t>(g) - 1) / static_cast<std::size_t>(g));

  ClusterAssignment out;
  out.k = k;
  Rng rng(derive_seed(seed, 0x6b6d65616e73));

  // k-means++ seeding.
  std::vector<Vec3>& cent = out.centroids;
  cent.push_back(points[rng.below(n)]);
  std::vector<double> d2(n);
  for (std::size_t i = 0; i < n; ++i) d2[i] = distance2(points[i], cent[0]);
  while (static_cast<int>(cent.size()) < k) {
    double total = 0.0;
    for (double v : d2) total += v;
    std::size_t pick = 0;
    if (total > 0.0) {
      const double u = rng.uniform() * total;
      double acc = 0.0;
      pick = n - 1;
      for (std::size_t i = 0; i < n; ++i) {
        acc += d2[i];
        if (u < acc && d2[i] > 0.0) {
          pick = i;
          break;
        }
      }
    } else {
      pick = rng.below(n);  // all points coincide with centroids
    }
    cent.push_back(points[pick]);
    for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], distance2(points[i], cent.back()));
  }

  out.labels.assign(n, -1);
  for (int iter = 0; iter < kMaxLloydIterations; ++iter) {
    bool changed = false;
    std::vector<int> labels(n);
    for (std::size_t i = 0; i < n; ++i) labels[i] = nearest_centroid(points[i], cent);

    // Reseed empty clusters with the point farthest from its centroid.
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = n;
      double far_d = -1.0;
      for (std::size_t i = 0; i < n; ++i) {
        if (counts[static_cast<std::size_t>(labels[i])] <= 1) continue;
        const double d = distance2(points[i], cent[static_cast<std::size_t>(labels[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      if (far == n) continue;  // fewer distinct points than clusters
      --counts[static_cast<std::size_t>(labels[far])];
      labels[far] = c;
      counts[static_cast<std::size_t>(c)] = 1;
      cent[static_cast<std::size_t>(c)] = points[far];
      ++out.reseeds;
    }

    for (std::size_t i = 0; i < n; ++i)
      if (labels[i] != out.labels[i]) changed = true;
    out.labels = std::move(labels);

    std::vector<Vec3> sum(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < n; ++i) sum[static_cast<std::size_t>(out.labels[i])] += points[i];
    for (int c = 0; c < k; ++c)
      if (counts[static_cast<std::size_t>(c)] > 0)
        cent[static_cast<std::size_t>(c)] =
            sum[static_cast<std::size_t>(c)] / counts[static_cast<std::size_t>(c)];
    out.sse_history.push_back(sse_of(points, out.labels, cent));
    out.iterations = iter + 1;
    if (!changed) break;
  }
  return out;
}

std::vector<MstEdge> build_mst(std::span<const Vec3> points) {
  const int n = static_cast<int>(points.size());
  if (n == 0) throw ValidationError("MST needs at least one point");
  // Heap entries are ordered by (weight, min endpoint, max endpoint).
  using Entry = std::tuple<double, int, int, int>;  // weight, lo, hi, target vertex
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  std::vector<char> in_tree(static_cast<std::size_t>(n), 0);
  std::vector<MstEdge> edges;
  edges.reserve(static_cast<std::size_t>(n - 1));

  auto add_vertex = [&](int v) {
    in_tree[static_cast<std::size_t>(v)] = 1;
    for (int u = 0; u < n; ++u) {
      if (in_tree[static_cast<std::size_t>(u)]) continue;
      heap.emplace(distance(points[static_cast<std::size_t>(v)], points[static_cast<std::size_t>(u)]),
                   std::min(u, v), std::max(u, v), u);
    }
  };
  add_vertex(0);
  while (static_cast<int>(edges.size()) < n - 1) {
    const auto [w, lo, hi, target] = heap.top();
    heap.pop();
    if (in_tree[static_cast<std::size_t>(target)]) continue;
    edges.push_back({lo, hi, w});
    add_vertex(target);
  }
  return edges;
}

double total_weight(std::span<const MstEdge> edges) {
  double s = 0.0;
  for (const auto& e : edges) s += e.weight;
  return s;
}

RootedTree orient_tree(int n, std::span<const MstEdge> edges, int root) {
  RootedTree t;
  t.root = root;
  t.parent.assign(static_cast<std::size_t>(n), -1);
  t.children.assign(static_cast<std::size_t>(n), {});
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const auto& e : edges) {
    adj[static_cast<std::size_t>(e.a)].push_back(e.b);
    adj[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& a : adj) std::sort(a.begin(), a.end());
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<int> q;
  q.push(root);
  seen[static_cast<std::size_t>(root)] = 1;
  while (!q.empty()) {
    const int v = q.front();
    q.pop();
    t.bfs_order.push_back(v);
    for (int u : adj[static_cast<std::size_t>(v)]) {
      if (seen[static_cast<std::size_t>(u)]) continue;
      seen[static_cast<std::size_t>(u)] = 1;
      t.parent[static_cast<std::size_t>(u)] = v;
      t.children[static_cast<std::size_t>(v)].push_back(u);
      q.push(u);
    }
  }
  if (static_cast<int>(t.bfs_order.size()) != n) throw ValidationError("tree is not connected");
  return t;
}

RootedTree orient_swarm_tree(int n_swarms, std::span<const MstEdge> mst) {
  std::vector<int> degree(static_cast<std::size_t>(n_swarms), 0);
  for (const auto& e : mst) {
    ++degree[static_cast<std::size_t>(e.a)];
    ++degree[static_cast<std::size_t>(e.b)];
  }
  int root = 0;
  for (int s = 1; s < n_swarms; ++s)
    if (degree[static_cast<std::size_t>(s)] > degree[static_cast<std::size_t>(root)]) root = s;
  return orient_tree(n_swarms, mst, root);
}

std::pair<FlsId, FlsId> select_primary_anchor(std::span<const FlsRecord> parent_members,
                                              std::span<const FlsRecord> child_members) {
  if (parent_members.empty() || child_members.empty())
    throw ValidationError("select_primary_anchor needs non-empty swarms");
  std::tuple<double, FlsId, FlsId> best{std::numeric_limits<double>::infinity(), 0, 0};
  for (const auto& a : parent_members)
    for (const auto& p : child_members) {
      const std::tuple<double, FlsId, FlsId> cand{distance2(a.coordinate, p.coordinate), a.id, p.id};
      if (cand < best) best = cand;
    }
  return {std::get<1>(best), std::get<2>(best)};
}

FlsTree build_fls_tree(std::span<const FlsRecord> members, FlsId root_id) {
  std::vector<const FlsRecord*> sorted;
  for (const auto& m : members) sorted.push_back(&m);
  std::sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->id < b->id; });
  std::vector<Vec3> pts;
  int root_local = -1;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    pts.push_back(sorted[i]->coordinate);
    if (sorted[i]->id == root_id) root_local = static_cast<int>(i);
  }
  if (root_local < 0) throw ValidationError("fls-tree root is not a member");
  const auto mst = build_mst(pts);
  const auto rooted = orient_tree(static_cast<int>(pts.size()), mst, root_local);

  FlsTree tree;
  tree.swarm_id = sorted.front()->swarm_id;
  tree.root_id = root_id;
  for (int v : rooted.bfs_order) {
    tree.members.push_back(sorted[static_cast<std::size_t>(v)]->id);
    for (int c : rooted.children[static_cast<std::size_t>(v)])
      tree.edges.emplace_back(sorted[static_cast<std::size_t>(v)]->id,
                              sorted[static_cast<std::size_t>(c)]->id);
  }
  return tree;
}

MountType assign_mount_type(const Vec3& child_pos, const Vec3& parent_pos) {
  const Vec3 d = parent_pos - child_pos;
  if (d.norm2() == 0.0) throw ValidationError("mount type undefined for coincident FLSs");
  const double elevation = std::asin(std::clamp(d.normalized().z, -1.0, 1.0)) * 180.0 / std::numbers::pi;
  if (elevation > 45.0) return MountType::Top;
  if (elevation < -45.0) return MountType::Bottom;
  return MountType::Side;
}

std::vector<Vec3> insert_dark_fls(const Vec3& a, const Vec3& b, double t_max) {
  if (!(t_max > 0.0)) throw ValidationError("t_max must be positive");
  const double len = distance(a, b);
  const long m = static_cast<long>(std::ceil(len / t_max)) - 1;
  std::vector<Vec3> out;
  for (long k = 1; k <= m; ++k) out.push_back(a + (b - a) * (static_cast<double>(k) / static_cast<double>(m + 1)));
  return out;
}

double PlanSummary::side_fraction() const {
  const int total = top + side + bottom;
  return total > 0 ? static_cast<double>(side) / total : 0.0;
}

nlohmann::json PlanSummary::to_json() const {
  return {{"f", f},
          {"g", g},
          {"n_swarms", n_swarms},
          {"dark_count", dark_count},
          {"mount_counts", {{"top", top}, {"side", side}, {"bottom", bottom}}},
          {"swarm_sizes", swarm_sizes},
          {"pairs_below_t_min", pairs_below_t_min},
          {"max_fls_branching", max_fls_branching},
          {"max_swarm_branching", max_swarm_branching},
          {"kmeans_iterations", kmeans_iterations}};
}

std::vector<std::pair<FlsId, FlsId>> localizing_pairs(const DeploymentPlan& plan) {
  std::vector<std::pair<FlsId, FlsId>> out;
  for (const auto& r : plan.fls)
    if (r.parent_id) out.emplace_back(r.id, *r.parent_id);
  for (const auto& e : plan.swarm_tree.edges) out.emplace_back(e.primary_id, e.anchor_id);
  return out;
}

PlanSummary summarize(const DeploymentPlan& plan, int f) {
  PlanSummary s;
  s.f = f;
  s.g = plan.g;
  s.n_swarms = static_cast<int>(plan.fls_trees.size());
  for (const auto& r : plan.fls) {
    if (r.is_dark) ++s.dark_count;
    switch (r.mount) {
      case MountType::Top:
        ++s.top;
        break;
      case MountType::Side:
        ++s.side;
        break;
      case MountType::Bottom:
        ++s.bottom;
        break;
    }
    s.max_fls_branching = std::max(s.max_fls_branching, static_cast<int>(r.children_ids.size()));
  }
  for (const auto& t : plan.fls_trees) s.swarm_sizes.push_back(static_cast<int>(t.members.size()));
  for (const auto& [loc, anc] : localizing_pairs(plan))
    if (distance(plan.at(loc).coordinate, plan.at(anc).coordinate) < plan.sensor.t_min)
      ++s.pairs_below_t_min;
  std::vector<int> swarm_children(plan.fls_trees.size(), 0);
  for (const auto& e : plan.swarm_tree.edges) ++swarm_children[static_cast<std::size_t>(e.parent_swarm)];
  for (int c : swarm_children) s.max_swarm_branching = std::max(s.max_swarm_branching, c);
  return s;
}

namespace {

// Rebuilds an FlsTree's member/edge lists from the records' links.
void refresh_tree(const std::vector<FlsRecord>& fls, FlsTree& tree) {
  tree.members.clear();
  tree.edges.clear();
  std::queue<FlsId> q;
  q.push(tree.root_id);
  while (!q.empty()) {
    const FlsId id = q.front();
    q.pop();
    tree.members.push_back(id);
    for (FlsId c : fls[static_cast<std::size_t>(id)].children_ids) {
      tree.edges.emplace_back(id, c);
      q.push(c);
    }
  }
}

double heading_towards(const Vec3& from, const Vec3& to) {
  const Vec3 d = to - from;
  if (d.x == 0.0 && d.y == 0.0) return 0.0;
  return std::atan2(d.y, d.x) * 180.0 / std::numbers::pi;
}

}  // namespace

PlanResult plan(const PointCloud& cloud, int g, const SensorSpec& spec, std::uint64_t seed) {
  spec.validate();
  if (g < 1) throw ValidationError("group size g must be >= 1");
  if (cloud.empty()) throw ValidationError("point cloud is empty");
  const int f = static_cast<int>(cloud.size());
  const auto pts = positions(cloud);

  const auto clusters = cluster_kmeans(pts, g, seed);
  const int k = clusters.k;

  DeploymentPlan dp;
  dp.sensor = spec;
  dp.g = g;
  dp.fls.resize(static_cast<std::size_t>(f));
  for (int i = 0; i < f; ++i) {
    auto& r = dp.fls[static_cast<std::size_t>(i)];
    r.id = i;
    r.coordinate = cloud[static_cast<std::size_t>(i)].position;
    r.normal = cloud[static_cast<std::size_t>(i)].normal;
    r.swarm_id = clusters.labels[static_cast<std::size_t>(i)];
  }

  std::vector<std::vector<FlsRecord>> members(static_cast<std::size_t>(k));
  for (const auto& r : dp.fls) members[static_cast<std::size_t>(r.swarm_id)].push_back(r);
  std::vector<Vec3> centers(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    const auto& m = members[static_cast<std::size_t>(s)];
    if (m.empty()) throw Error("k-means produced an empty cluster");
    Vec3 sum;
    for (const auto& r : m) sum += r.coordinate;
    centers[static_cast<std::size_t>(s)] = sum / static_cast<double>(m.size());
  }

  // Swarm-tree.
  const auto swarm_mst = build_mst(centers);
  const auto swarm_rooted = orient_swarm_tree(k, swarm_mst);
  dp.swarm_tree.root = swarm_rooted.root;
  for (int s = 0; s < k; ++s) dp.swarm_tree.nodes.push_back(s);
  std::vector<FlsId> tree_root(static_cast<std::size_t>(k), -1);
  for (int s : swarm_rooted.bfs_order) {
    for (int c : swarm_rooted.children[static_cast<std::size_t>(s)]) {
      const auto [anchor, primary] =
          select_primary_anchor(members[static_cast<std::size_t>(s)], members[static_cast<std::size_t>(c)]);
      dp.swarm_tree.edges.push_back({s, c, anchor, primary});
      tree_root[static_cast<std::size_t>(c)] = primary;
      dp.fls[static_cast<std::size_t>(primary)].is_primary = true;
    }
  }
  {
    const int rs = swarm_rooted.root;
    const auto& m = members[static_cast<std::size_t>(rs)];
    FlsId best = m.front().id;
    double best_d = distance2(m.front().coordinate, centers[static_cast<std::size_t>(rs)]);
    for (const auto& r : m) {
      const double d = distance2(r.coordinate, centers[static_cast<std::size_t>(rs)]);
      if (d < best_d) {
        best_d = d;
        best = r.id;
      }
    }
    tree_root[static_cast<std::size_t>(rs)] = best;
  }

  // FLS-trees.
  dp.fls_trees.resize(static_cast<std::size_t>(k));
  for (int s = 0; s < k; ++s) {
    auto tree = build_fls_tree(members[static_cast<std::size_t>(s)], tree_root[static_cast<std::size_t>(s)]);
    for (const auto& [p, c] : tree.edges) {
      dp.fls[static_cast<std::size_t>(c)].parent_id = p;
      dp.fls[static_cast<std::size_t>(p)].children_ids.push_back(c);
    }
    dp.fls_trees[static_cast<std::size_t>(s)] = std::move(tree);
  }

  // Dark FLSs on intra-swarm edges: parent -> d1 -> ... -> dm -> child.
  auto new_dark = [&](const Vec3& pos, SwarmId swarm) {
    FlsRecord r;
    r.id = static_cast<FlsId>(dp.fls.size());
    r.coordinate = pos;
    r.swarm_id = swarm;
    r.is_dark = true;
    dp.fls.push_back(r);
    return r.id;
  };
  for (int s = 0; s < k; ++s) {
    const auto edges = dp.fls_trees[static_cast<std::size_t>(s)].edges;
    for (const auto& [p, c] : edges) {
      const auto darks = insert_dark_fls(dp.fls[static_cast<std::size_t>(p)].coordinate,
                                         dp.fls[static_cast<std::size_t>(c)].coordinate, spec.t_max);
      if (darks.empty()) continue;
      FlsId prev = p;
      std::vector<FlsId> chain;
      for (const auto& pos : darks) chain.push_back(new_dark(pos, s));
      for (FlsId d : chain) {
        dp.fls[static_cast<std::size_t>(d)].parent_id = prev;
        if (prev != p) dp.fls[static_cast<std::size_t>(prev)].children_ids.push_back(d);
        prev = d;
      }
      auto& pc = dp.fls[static_cast<std::size_t>(p)].children_ids;
      *std::find(pc.begin(), pc.end(), c) = chain.front();
      dp.fls[static_cast<std::size_t>(chain.back())].children_ids.push_back(c);
      dp.fls[static_cast<std::size_t>(c)].parent_id = chain.back();
    }
  }

  // Dark FLSs between anchor and primary join the parent swarm; the last one
  // becomes the anchor.
  for (auto& e : dp.swarm_tree.edges) {
    const auto darks = insert_dark_fls(dp.fls[static_cast<std::size_t>(e.anchor_id)].coordinate,
                                       dp.fls[static_cast<std::size_t>(e.primary_id)].coordinate, spec.t_max);
    FlsId prev = e.anchor_id;
    for (const auto& pos : darks) {
      const FlsId d = new_dark(pos, e.parent_swarm);
      dp.fls[static_cast<std::size_t>(d)].parent_id = prev;
      dp.fls[static_cast<std::size_t>(prev)].children_ids.push_back(d);
      prev = d;
    }
    e.anchor_id = prev;
    dp.fls[static_cast<std::size_t>(prev)].inter_swarm_anchor_for.push_back(e.child_swarm);
  }

  for (auto& t : dp.fls_trees) refresh_tree(dp.fls, t);

  // Mount types follow the direction each localizing FLS looks at its anchor.
  for (auto& r : dp.fls) {
    std::optional<FlsId> anchor = r.parent_id;
    if (r.is_primary) anchor = dp.swarm_tree.edge_into(r.swarm_id)->anchor_id;
    if (!anchor) {
      r.mount = MountType::Side;
      r.heading_deg = 0.0;
      continue;
    }
    const Vec3& target = dp.fls[static_cast<std::size_t>(*anchor)].coordinate;
    r.mount = assign_mount_type(r.coordinate, target);
    r.heading_deg = heading_towards(r.coordinate, target);
  }

  validate_plan(dp);
  PlanResult result;
  result.summary = summarize(dp, f);
  result.summary.kmeans_iterations = clusters.iterations;
  result.plan = std::move(dp);
  return result;
}

}  // namespace swarical
