#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include <json.hpp>

#include "swarical/core_model.hpp"
#include "swarical/mesh.hpp"

namespace swarical {

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;  // per point, in [0, k)
  std::vector<Vec3> centroids;
  std::vector<double> sse_history;  // after each Lloyd update
  int iterations = 0;
  int reseeds = 0;
};

/// k-means with k = ceil(F / g): k-means++ seeding, Lloyd iterations until
/// the labels are stable or 300 iterations. Empty clusters take the point
/// farthest from its centroid.
ClusterAssignment cluster_kmeans(std::span<const Vec3> points, int g, std::uint64_t seed);

struct MstEdge {
  int a = 0;  // a < b
  int b = 0;
  double weight = 0.0;

  friend bool operator==(const MstEdge&, const MstEdge&) = default;
};

/// Euclidean minimum spanning tree (Prim, binary heap). Equal weights are
/// ordered by (min endpoint, max endpoint), which makes the tree unique.
std::vector<MstEdge> build_mst(std::span<const Vec3> points);
double total_weight(std::span<const MstEdge> edges);

/// Tree rooted at `root` with parent links and BFS order. Children are kept
/// in ascending index order.
struct RootedTree {
  int root = 0;
  std::vector<int> parent;  // -1 for the root
  std::vector<std::vector<int>> children;
  std::vector<int> bfs_order;
};

RootedTree orient_tree(int n, std::span<const MstEdge> edges, int root);

/// Roots the swarm MST at its highest-degree vertex (lowest id on ties).
RootedTree orient_swarm_tree(int n_swarms, std::span<const MstEdge> mst);

/// Closest (anchor, primary) pair between a parent and a child swarm.
std::pair<FlsId, FlsId> select_primary_anchor(std::span<const FlsRecord> parent_members,
                                              std::span<const FlsRecord> child_members);

/// MST over the members re-rooted at `root_id`, parents oriented by BFS.
FlsTree build_fls_tree(std::span<const FlsRecord> members, FlsId root_id);

/// Camera placement that keeps the parent in view: Top when the parent is
/// more than 45 degrees above the child, Bottom when more than 45 below.
MountType assign_mount_type(const Vec3& child_pos, const Vec3& parent_pos);

/// Evenly spaced interior points splitting a->b into segments <= t_max.
std::vector<Vec3> insert_dark_fls(const Vec3& a, const Vec3& b, double t_max);

struct PlanSummary {
  int f = 0;
  int g = 0;
  int n_swarms = 0;
  int dark_count = 0;
  int top = 0;
  int side = 0;
  int bottom = 0;
  std::vector<int> swarm_sizes;
  int pairs_below_t_min = 0;
  int max_fls_branching = 0;
  int max_swarm_branching = 0;
  int kmeans_iterations = 0;

  [[nodiscard]] double side_fraction() const;
  [[nodiscard]] nlohmann::json to_json() const;
};

struct PlanResult {
  DeploymentPlan plan;
  PlanSummary summary;
};

/// Full offline pipeline: cluster, swarm-tree, FLS-trees, primaries and
/// anchors, dark FLS insertion and mount assignment.
PlanResult plan(const PointCloud& cloud, int g, const SensorSpec& spec, std::uint64_t seed);

/// Every localizing pair of a plan (FLS-tree edges and swarm-tree pairs)
/// as (localizing FLS, anchor FLS).
std::vector<std::pair<FlsId, FlsId>> localizing_pairs(const DeploymentPlan& plan);

PlanSummary summarize(const DeploymentPlan& plan, int f);

}  // namespace swarical
