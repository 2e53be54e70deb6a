#include "swarical/core_model.hpp"

#include <algorithm>
#include <string>

namespace swarical {

RelativePose pose_negate(const RelativePose& p) {
  RelativePose out = p;
  out.vec = -p.vec;
  return out;
}

RelativePose compose_path(std::span<const RelativePose> poses) {
  RelativePose out;
  for (const auto& p : poses) out.vec += p.vec;
  return out;
}

void SensorSpec::validate() const {
  if (!(t_min > 0.0) || !(t_min <= t_max))
    throw ValidationError("sensor: require 0 < t_min <= t_max");
  if (!(radius_r > 0.0)) throw ValidationError("sensor: radius must be positive");
  if (!(fov_half_angle > 0.0 && fov_half_angle <= 90.0))
    throw ValidationError("sensor: fov_half_angle must be in (0, 90]");
}

std::string_view to_string(MountType m) {
  switch (m) {
    case MountType::Top:
      return "top";
    case MountType::Side:
      return "side";
    case MountType::Bottom:
      return "bottom";
  }
  return "side";
}

MountType parse_mount_type(std::string_view s) {
  if (s == "top") return MountType::Top;
  if (s == "side") return MountType::Side;
  if (s == "bottom") return MountType::Bottom;
  throw ValidationError("unknown mount type '" + std::string(s) + "'");
}

const SwarmEdge* SwarmTree::edge_into(SwarmId s) const {
  for (const auto& e : edges)
    if (e.child_swarm == s) return &e;
  return nullptr;
}

const FlsRecord& DeploymentPlan::at(FlsId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= fls.size())
    throw ValidationError("fls id " + std::to_string(id) + " out of range");
  return fls[static_cast<std::size_t>(id)];
}

std::vector<Vec3> DeploymentPlan::ground_truth() const {
  std::vector<Vec3> out;
  out.reserve(fls.size());
  for (const auto& r : fls) out.push_back(r.coordinate);
  return out;
}

std::vector<FlsId> depth_first_order(const DeploymentPlan& plan, const FlsTree& tree) {
  std::vector<FlsId> order;
  std::vector<FlsId> stack{tree.root_id};
  std::vector<char> seen(plan.fls.size(), 0);
  while (!stack.empty()) {
    const FlsId id = stack.back();
    stack.pop_back();
    const auto& rec = plan.at(id);
    if (seen[static_cast<std::size_t>(id)]) {
      throw ValidationError("fls-tree of swarm " + std::to_string(tree.swarm_id) +
                            " revisits fls " + std::to_string(id));
    }
    seen[static_cast<std::size_t>(id)] = 1;
    order.push_back(id);
    for (auto it = rec.children_ids.rbegin(); it != rec.children_ids.rend(); ++it)
      stack.push_back(*it);
  }
  return order;
}

void validate_plan(const DeploymentPlan& plan) {
  plan.sensor.validate();
  const auto n = plan.fls.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto& r = plan.fls[i];
    if (r.id != static_cast<FlsId>(i)) throw ValidationError("fls ids must be dense");
    if (!r.coordinate.finite()) throw ValidationError("non-finite coordinate");
    if (r.swarm_id < 0 || static_cast<std::size_t>(r.swarm_id) >= plan.fls_trees.size())
      throw ValidationError("fls " + std::to_string(r.id) + " has unknown swarm");
    if (r.parent_id) {
      const auto& p = plan.at(*r.parent_id);
      if (p.swarm_id != r.swarm_id)
        throw ValidationError("fls-tree parent crosses swarms at fls " + std::to_string(r.id));
      if (std::find(p.children_ids.begin(), p.children_ids.end(), r.id) == p.children_ids.end())
        throw ValidationError("parent/child links disagree at fls " + std::to_string(r.id));
      if (distance(r.coordinate, p.coordinate) > plan.sensor.t_max * (1.0 + 1e-12))
        throw ValidationError("fls-tree edge longer than t_max at fls " + std::to_string(r.id));
    }
  }

  std::vector<int> tree_count(n, 0);
  for (std::size_t s = 0; s < plan.fls_trees.size(); ++s) {
    const auto& t = plan.fls_trees[s];
    if (t.swarm_id != static_cast<SwarmId>(s)) throw ValidationError("fls_trees out of order");
    if (plan.at(t.root_id).parent_id)
      throw ValidationError("root of swarm " + std::to_string(s) + " has a parent");
    const auto order = depth_first_order(plan, t);
    if (order.size() != t.members.size())
      throw ValidationError("fls-tree of swarm " + std::to_string(s) + " is not spanning");
    for (FlsId id : t.members) {
      if (plan.at(id).swarm_id != t.swarm_id)
        throw ValidationError("member swarm mismatch");
      ++tree_count[static_cast<std::size_t>(id)];
    }
    if (t.edges.size() + 1 != t.members.size())
      throw ValidationError("fls-tree edge count mismatch in swarm " + std::to_string(s));
  }
  for (std::size_t i = 0; i < n; ++i)
    if (tree_count[i] != 1)
      throw ValidationError("fls " + std::to_string(i) + " is not in exactly one fls-tree");

  const auto& st = plan.swarm_tree;
  if (st.nodes.size() != plan.fls_trees.size())
    throw ValidationError("swarm-tree node count mismatch");
  if (st.edges.size() + 1 != st.nodes.size())
    throw ValidationError("swarm-tree must have |nodes|-1 edges");
  std::vector<int> into(st.nodes.size(), 0);
  for (const auto& e : st.edges) {
    if (e.child_swarm < 0 || static_cast<std::size_t>(e.child_swarm) >= into.size())
      throw ValidationError("swarm-tree edge references unknown swarm");
    ++into[static_cast<std::size_t>(e.child_swarm)];
    const auto& a = plan.at(e.anchor_id);
    const auto& p = plan.at(e.primary_id);
    if (a.swarm_id != e.parent_swarm || p.swarm_id != e.child_swarm)
      throw ValidationError("anchor/primary swarm mismatch");
    if (!p.is_primary || plan.fls_trees[static_cast<std::size_t>(e.child_swarm)].root_id != p.id)
      throw ValidationError("primary must root its swarm's fls-tree");
    if (distance(a.coordinate, p.coordinate) > plan.sensor.t_max * (1.0 + 1e-12))
      throw ValidationError("anchor/primary pair longer than t_max");
  }
  for (std::size_t s = 0; s < into.size(); ++s) {
    const int expected = static_cast<SwarmId>(s) == st.root ? 0 : 1;
    if (into[s] != expected)
      throw ValidationError("swarm " + std::to_string(s) + " has wrong number of parents");
  }
  // Connectivity: walk parents from every swarm up to the root.
  for (SwarmId s : st.nodes) {
    SwarmId cur = s;
    std::size_t steps = 0;
    while (cur != st.root) {
      const auto* e = st.edge_into(cur);
      if (!e || ++steps > st.nodes.size()) throw ValidationError("swarm-tree is not connected");
      cur = e->parent_swarm;
    }
  }
}

}  // namespace swarical
