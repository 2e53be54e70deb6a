#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "swarical/core_model.hpp"

namespace swarical {

nlohmann::json to_json(const DeploymentPlan& plan);
DeploymentPlan plan_from_json(const nlohmann::json& j);

/// Serialized plan text. Doubles use the shortest representation that
/// parses back to the same bits.
std::string dump_plan(const DeploymentPlan& plan);
DeploymentPlan parse_plan(const std::string& text);

void save_plan(const DeploymentPlan& plan, const std::filesystem::path& path);
DeploymentPlan load_plan(const std::filesystem::path& path);

nlohmann::json vec_to_json(const Vec3& v);
Vec3 vec_from_json(const nlohmann::json& j);

}  // namespace swarical
