#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "swarical/vec3.hpp"

namespace swarical {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when an input violates a documented precondition or invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

using FlsId = int;
using SwarmId = int;

/// Position of one FLS relative to another: `vec` = pos(self) - pos(other).
/// Orientation is measurement metadata only; corrections are translational.
struct RelativePose {
  Vec3 vec;
  Vec3 orientation_deg;  // roll, pitch, yaw error of the observation
  double error_pct = 0.0;

  friend bool operator==(const RelativePose&, const RelativePose&) = default;
};

/// Pose of v relative to u given the pose of u relative to v.
RelativePose pose_negate(const RelativePose& p);

/// Sum of the poses along a path; the empty path is the zero pose.
RelativePose compose_path(std::span<const RelativePose> poses);

struct SensorSpec {
  double t_min = 60.0;          // mm
  double t_max = 80.0;          // mm
  double radius_r = 25.0;       // mm, FLS body radius
  double fov_half_angle = 60.0; // degrees

  /// Throws ValidationError when the ranges are inconsistent.
  void validate() const;
  friend bool operator==(const SensorSpec&, const SensorSpec&) = default;
};

enum class MountType { Top, Side, Bottom };

std::string_view to_string(MountType m);
MountType parse_mount_type(std::string_view s);

struct FlsRecord {
  FlsId id = 0;
  Vec3 coordinate;  // ground truth
  Vec3 normal;      // surface normal from sampling, zero for dark FLSs
  MountType mount = MountType::Side;
  double heading_deg = 0.0;  // azimuth a Side camera faces
  SwarmId swarm_id = 0;
  std::optional<FlsId> parent_id;
  std::vector<FlsId> children_ids;
  bool is_primary = false;
  bool is_dark = false;
  std::vector<SwarmId> inter_swarm_anchor_for;

  friend bool operator==(const FlsRecord&, const FlsRecord&) = default;
};

struct SwarmEdge {
  SwarmId parent_swarm = 0;
  SwarmId child_swarm = 0;
  FlsId anchor_id = 0;
  FlsId primary_id = 0;

  friend bool operator==(const SwarmEdge&, const SwarmEdge&) = default;
};

struct SwarmTree {
  std::vector<SwarmId> nodes;
  SwarmId root = 0;
  std::vector<SwarmEdge> edges;  // BFS order from the root

  /// Edge whose child is `s`, or nullptr for the root.
  [[nodiscard]] const SwarmEdge* edge_into(SwarmId s) const;
  friend bool operator==(const SwarmTree&, const SwarmTree&) = default;
};

struct FlsTree {
  SwarmId swarm_id = 0;
  FlsId root_id = 0;
  std::vector<FlsId> members;                  // BFS order from the root
  std::vector<std::pair<FlsId, FlsId>> edges;  // (parent, child), BFS order

  friend bool operator==(const FlsTree&, const FlsTree&) = default;
};

struct DeploymentPlan {
  std::vector<FlsRecord> fls;  // indexed by id
  SwarmTree swarm_tree;
  std::vector<FlsTree> fls_trees;  // indexed by swarm id
  SensorSpec sensor;
  int g = 0;

  [[nodiscard]] const FlsRecord& at(FlsId id) const;
  [[nodiscard]] std::vector<Vec3> ground_truth() const;

  friend bool operator==(const DeploymentPlan&, const DeploymentPlan&) = default;
};

/// Structural checks on a plan: ids dense, trees spanning and acyclic,
/// swarm-tree pairs consistent, no localizing pair beyond t_max.
/// Throws ValidationError describing the first violation.
void validate_plan(const DeploymentPlan& plan);

/// Depth-first visit order of an FLS-tree from its root; used to confirm
/// each member is reached exactly once.
std::vector<FlsId> depth_first_order(const DeploymentPlan& plan, const FlsTree& tree);

}  // namespace swarical
