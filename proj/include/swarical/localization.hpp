#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "swarical/sim.hpp"

namespace swarical {

struct CorrectionVector {
  Vec3 v;
  int contributor_count = 1;  // reachable members plus self
};

/// Average correction for member `self` of a swarm.
///
/// `table[k]` is the believed pose of member k relative to its FLS-tree
/// parent. Members are reachable through tree edges whose pose is known.
/// Returns nullopt when nothing besides `self` is reachable.
std::optional<CorrectionVector> compute_correction(const SwarmTopology& topo, int self,
                                                   std::span<const std::optional<Vec3>> table);

std::unique_ptr<Policy> make_policy(Technique t);

struct SimResult {
  MetricSeries series;
  std::vector<Vec3> final_positions;
  std::vector<double> odometers;
  std::uint64_t events = 0;
};

SimResult simulate(const DeploymentPlan& plan, const SimConfig& cfg, LogSink sink = {});

}  // namespace swarical
