#include "swarical/plan_io.hpp"

#include <fstream>
#include <sstream>

namespace swarical {

using nlohmann::json;

json vec_to_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from_json(const json& j) {
  if (!j.is_array() || j.size() != 3) throw ValidationError("expected [x, y, z]");
  return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

json to_json(const DeploymentPlan& plan) {
  json fls = json::array();
  for (const auto& r : plan.fls) {
    fls.push_back({
        {"id", r.id},
        {"coordinate", vec_to_json(r.coordinate)},
        {"normal", vec_to_json(r.normal)},
        {"mount", std::string(to_string(r.mount))},
        {"heading_deg", r.heading_deg},
        {"swarm_id", r.swarm_id},
        {"parent_id", r.parent_id ? json(*r.parent_id) : json(nullptr)},
        {"children_ids", r.children_ids},
        {"is_primary", r.is_primary},
        {"is_dark", r.is_dark},
        {"inter_swarm_anchor_for", r.inter_swarm_anchor_for},
    });
  }

  json st_edges = json::array();
  for (const auto& e : plan.swarm_tree.edges) {
    st_edges.push_back({{"parent_swarm", e.parent_swarm},
                        {"child_swarm", e.child_swarm},
                        {"anchor_id", e.anchor_id},
                        {"primary_id", e.primary_id}});
  }

  json trees = json::array();
  for (const auto& t : plan.fls_trees) {
    json edges = json::array();
    for (const auto& [p, c] : t.edges) edges.push_back(json::array({p, c}));
    trees.push_back({{"swarm_id", t.swarm_id},
                     {"root_id", t.root_id},
                     {"members", t.members},
                     {"edges", edges}});
  }

  return {
      {"fls", fls},
      {"swarm_tree",
       {{"nodes", plan.swarm_tree.nodes}, {"root", plan.swarm_tree.root}, {"edges", st_edges}}},
      {"fls_trees", trees},
      {"sensor",
       {{"t_min", plan.sensor.t_min},
        {"t_max", plan.sensor.t_max},
        {"radius_r", plan.sensor.radius_r},
        {"fov_half_angle", plan.sensor.fov_half_angle}}},
      {"g", plan.g},
  };
}

DeploymentPlan plan_from_json(const json& j) {
  DeploymentPlan plan;
  try {
    for (const auto& r : j.at("fls")) {
      FlsRecord rec;
      rec.id = r.at("id").get<FlsId>();
      rec.coordinate = vec_from_json(r.at("coordinate"));
      if (r.contains("normal")) rec.normal = vec_from_json(r.at("normal"));
      rec.mount = parse_mount_type(r.at("mount").get<std::string>());
      rec.heading_deg = r.value("heading_deg", 0.0);
      rec.swarm_id = r.at("swarm_id").get<SwarmId>();
      if (!r.at("parent_id").is_null()) rec.parent_id = r.at("parent_id").get<FlsId>();
      rec.children_ids = r.at("children_ids").get<std::vector<FlsId>>();
      rec.is_primary = r.at("is_primary").get<bool>();
      rec.is_dark = r.at("is_dark").get<bool>();
      rec.inter_swarm_anchor_for = r.at("inter_swarm_anchor_for").get<std::vector<SwarmId>>();
      plan.fls.push_back(std::move(rec));
    }

    const auto& st = j.at("swarm_tree");
    plan.swarm_tree.nodes = st.at("nodes").get<std::vector<SwarmId>>();
    plan.swarm_tree.root = st.at("root").get<SwarmId>();
    for (const auto& e : st.at("edges")) {
      plan.swarm_tree.edges.push_back({e.at("parent_swarm").get<SwarmId>(),
                                       e.at("child_swarm").get<SwarmId>(),
                                       e.at("anchor_id").get<FlsId>(),
                                       e.at("primary_id").get<FlsId>()});
    }

    for (const auto& t : j.at("fls_trees")) {
      FlsTree tree;
      tree.swarm_id = t.at("swarm_id").get<SwarmId>();
      tree.root_id = t.at("root_id").get<FlsId>();
      tree.members = t.at("members").get<std::vector<FlsId>>();
      for (const auto& e : t.at("edges"))
        tree.edges.emplace_back(e.at(0).get<FlsId>(), e.at(1).get<FlsId>());
      plan.fls_trees.push_back(std::move(tree));
    }

    const auto& s = j.at("sensor");
    plan.sensor.t_min = s.at("t_min").get<double>();
    plan.sensor.t_max = s.at("t_max").get<double>();
    plan.sensor.radius_r = s.at("radius_r").get<double>();
    plan.sensor.fov_half_angle = s.at("fov_half_angle").get<double>();
    plan.g = j.at("g").get<int>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed plan JSON: ") + e.what());
  }
  return plan;
}

std::string dump_plan(const DeploymentPlan& plan) { return to_json(plan).dump(1) + "\n"; }

DeploymentPlan parse_plan(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("plan is not valid JSON: ") + e.what());
  }
  return plan_from_json(j);
}

void save_plan(const DeploymentPlan& plan, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << dump_plan(plan);
}

DeploymentPlan load_plan(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_plan(ss.str());
}

}  // namespace swarical
