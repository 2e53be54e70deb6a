#include "swarical/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <ostream>
#include <string>

#include "swarical/plan_io.hpp"
#include "swarical/text.hpp"

namespace swarical {

std::string_view to_string(Technique t) {
  switch (t) {
    case Technique::HC:
      return "HC";
    case Technique::ISR:
      return "ISR";
    case Technique::RSF:
      return "RSF";
  }
  return "?";
}

Technique parse_technique(std::string_view s) {
  if (s == "HC") return Technique::HC;
  if (s == "ISR") return Technique::ISR;
  if (s == "RSF") return Technique::RSF;
  throw ValidationError("unknown technique '" + std::string(s) + "' (expected HC, ISR or RSF)");
}

std::string_view to_string(MsgType t) {
  switch (t) {
    case MsgType::Pose: return "pose";
    case MsgType::Freeze: return "freeze";
    case MsgType::FreezeAck: return "freeze_ack";
    case MsgType::SwarmMove: return "swarm_move";
    case MsgType::Unfreeze: return "unfreeze";
    case MsgType::Notify: return "notify";
    case MsgType::HoldRequest: return "hold_request";
    case MsgType::HoldAck: return "hold_ack";
    case MsgType::Release: return "release";
    case MsgType::RoundRequest: return "round_request";
    case MsgType::SubtreeDone: return "subtree_done";
  }
  return "?";
}

void SimConfig::validate() const {
  if (!(speed_mm_s > 0.0)) throw ValidationError("speed_mm_s must be > 0");
  if (!(latency_ms >= 0.0) || !(latency_max_ms >= latency_ms))
    throw ValidationError("latency must satisfy 0 <= min <= max");
  if (!(threshold_mm > 0.0)) throw ValidationError("threshold_mm must be > 0 (inf allowed)");
  if (!(run_ms >= 0.0) || !std::isfinite(run_ms)) throw ValidationError("run_ms must be finite and >= 0");
  if (!(metric_sample_ms > 0.0)) throw ValidationError("metric_sample_ms must be > 0");
  if (!(idle_timeout_ms > 0.0)) throw ValidationError("idle_timeout_ms must be > 0");
  if (!(localize_ms >= 0.0) || !(min_cycle_interval_ms >= 0.0) || !(rsf_round_gap_ms >= 0.0))
    throw ValidationError("policy delays must be >= 0");
  if (!(dr_epsilon_deg >= 0.0 && dr_epsilon_deg < 90.0)) throw ValidationError("dr_epsilon_deg must be in [0, 90)");
  if (!(launch_interval_ms >= 0.0)) throw ValidationError("launch_interval_ms must be >= 0");
  if (dispatcher && !dispatcher->finite()) throw ValidationError("dispatcher must be finite");
  if (!(noise.sd_factor >= 0.0)) throw ValidationError("noise sd_factor must be >= 0");
  noise.curve.validate();
}

namespace {

double json_threshold(const nlohmann::json& v) {
  if (v.is_string() && (v == "inf" || v == "infinity")) return std::numeric_limits<double>::infinity();
  if (v.is_null()) return std::numeric_limits<double>::infinity();
  return v.get<double>();
}

void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> known, std::string_view where) {
  for (const auto& [key, _] : j.items())
    if (std::find(known.begin(), known.end(), key) == known.end())
      throw ValidationError("unknown " + std::string(where) + " key '" + key + "'");
}

}  // namespace

SimConfig sim_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ValidationError("sim config must be a JSON object");
  reject_unknown(j,
                 {"seed", "speed_mm_s", "latency_ms", "threshold_mm", "run_ms", "technique", "metric_sample_ms",
                  "policy", "deploy", "dr_epsilon_deg", "dispatcher", "launch_interval_ms", "noise",
                  "exclude_dark_from_metrics"},
                 "config");
  SimConfig c;
  try {
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("speed_mm_s")) c.speed_mm_s = j.at("speed_mm_s").get<double>();
    if (j.contains("latency_ms")) {
      const auto& l = j.at("latency_ms");
      if (l.is_array()) {
        if (l.size() != 2) throw ValidationError("latency_ms range must be [min, max]");
        c.latency_ms = l[0].get<double>();
        c.latency_max_ms = l[1].get<double>();
      } else {
        c.latency_ms = c.latency_max_ms = l.get<double>();
      }
    }
    if (j.contains("threshold_mm")) c.threshold_mm = json_threshold(j.at("threshold_mm"));
    if (j.contains("run_ms")) c.run_ms = j.at("run_ms").get<double>();
    if (j.contains("technique")) c.technique = parse_technique(j.at("technique").get<std::string>());
    if (j.contains("metric_sample_ms")) c.metric_sample_ms = j.at("metric_sample_ms").get<double>();
    if (j.contains("policy")) {
      const auto& p = j.at("policy");
      reject_unknown(p, {"threshold_mm", "idle_timeout_ms", "localize_ms", "min_cycle_interval_ms", "rsf_round_gap_ms"},
                     "policy");
      if (p.contains("threshold_mm")) c.threshold_mm = json_threshold(p.at("threshold_mm"));
      if (p.contains("idle_timeout_ms")) c.idle_timeout_ms = p.at("idle_timeout_ms").get<double>();
      if (p.contains("localize_ms")) c.localize_ms = p.at("localize_ms").get<double>();
      if (p.contains("min_cycle_interval_ms")) c.min_cycle_interval_ms = p.at("min_cycle_interval_ms").get<double>();
      if (p.contains("rsf_round_gap_ms")) c.rsf_round_gap_ms = p.at("rsf_round_gap_ms").get<double>();
    }
    if (j.contains("deploy")) c.deploy = j.at("deploy").get<bool>();
    if (j.contains("dr_epsilon_deg")) c.dr_epsilon_deg = j.at("dr_epsilon_deg").get<double>();
    if (j.contains("dispatcher")) c.dispatcher = vec_from_json(j.at("dispatcher"));
    if (j.contains("launch_interval_ms")) c.launch_interval_ms = j.at("launch_interval_ms").get<double>();
    if (j.contains("exclude_dark_from_metrics"))
      c.exclude_dark_from_metrics = j.at("exclude_dark_from_metrics").get<bool>();
    if (j.contains("noise")) {
      const auto& n = j.at("noise");
      reject_unknown(n, {"calibration", "flat_pct", "sd_factor", "orientation_sigma_deg", "fov_gating"}, "noise");
      if (n.contains("calibration") && n.contains("flat_pct"))
        throw ValidationError("noise: give either calibration or flat_pct");
      if (n.contains("calibration")) {
        const auto name = n.at("calibration").get<std::string>();
        if (name == "none") {
          c.noise.curve = CalibrationCurve::flat(0.0);
        } else if (name != "default") {
          std::filesystem::path p(name);
          if (p.is_relative()) p = base_dir / p;
          c.noise.curve = load_calibration(p);
        }
      }
      if (n.contains("flat_pct")) c.noise.curve = CalibrationCurve::flat(n.at("flat_pct").get<double>());
      if (n.contains("sd_factor")) c.noise.sd_factor = n.at("sd_factor").get<double>();
      if (n.contains("orientation_sigma_deg")) c.noise.orientation_sigma_deg = vec_from_json(n.at("orientation_sigma_deg"));
      if (n.contains("fov_gating")) c.noise.fov_gating = n.at("fov_gating").get<bool>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("sim config: ") + e.what());
  }
  c.validate();
  return c;
}

SimConfig load_sim_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  return sim_config_from_json(j, path.parent_path());
}

std::vector<SwarmTopology> build_topologies(const DeploymentPlan& plan) {
  std::vector<SwarmTopology> out;
  out.reserve(plan.fls_trees.size());
  for (const auto& tree : plan.fls_trees) {
    SwarmTopology t;
    t.id = tree.swarm_id;
    t.members = tree.members;
    const auto n = t.members.size();
    std::vector<int> local(plan.fls.size(), -1);
    for (std::size_t k = 0; k < n; ++k) local[static_cast<std::size_t>(t.members[k])] = static_cast<int>(k);
    t.parent.assign(n, -1);
    t.children.assign(n, {});
    for (std::size_t k = 0; k < n; ++k) {
      const auto& rec = plan.at(t.members[k]);
      t.ground_truth.push_back(rec.coordinate);
      if (rec.parent_id) t.parent[k] = local[static_cast<std::size_t>(*rec.parent_id)];
      for (FlsId c : rec.children_ids) t.children[k].push_back(local[static_cast<std::size_t>(c)]);
    }
    t.primary = tree.root_id;
    if (const auto* e = plan.swarm_tree.edge_into(tree.swarm_id)) t.anchor = e->anchor_id;
    out.push_back(std::move(t));
  }
  return out;
}

Vec3 AgentState::position_at(double t) const {
  if (!moving) return pos;
  if (t >= move_end || move_end <= move_start) return pos + move_v;
  const double f = std::max(0.0, (t - move_start) / (move_end - move_start));
  return pos + move_v * f;
}

void write_log_line(const LogRecord& r, std::ostream& out) {
  out << "{\"t\":" << fmt17(r.t) << ",\"kind\":\"" << r.kind << "\",\"agent\":" << r.agent;
  if (r.other >= 0) out << ",\"other\":" << r.other;
  if (r.vec) out << ",\"vec\":[" << fmt17(r.vec->x) << ',' << fmt17(r.vec->y) << ',' << fmt17(r.vec->z) << ']';
  if (r.value) {
    if (std::isfinite(*r.value))
      out << ",\"value\":" << fmt17(*r.value);
    else
      out << ",\"value\":null";
  }
  if (r.count) out << ",\"count\":" << *r.count;
  if (!r.detail.empty()) out << ",\"detail\":\"" << r.detail << '"';
  out << "}\n";
}

Engine::Engine(const DeploymentPlan& plan, SimConfig cfg, Policy& policy, LogSink sink)
    : plan_(plan),
      cfg_(std::move(cfg)),
      policy_(policy),
      sink_(std::move(sink)),
      topo_(build_topologies(plan)),
      net_rng_(derive_seed(cfg_.seed, 0x6e6574)) {
  cfg_.validate();
  cfg_.noise.fov_half_angle = plan.sensor.fov_half_angle;
  const auto n = plan.fls.size();
  if (n == 0) throw ValidationError("plan has no FLSs");

  topo_index_.assign(n, -1);
  local_.assign(n, -1);
  for (std::size_t s = 0; s < topo_.size(); ++s)
    for (std::size_t k = 0; k < topo_[s].members.size(); ++k) {
      const auto id = static_cast<std::size_t>(topo_[s].members[k]);
      topo_index_[id] = static_cast<int>(s);
      local_[id] = static_cast<int>(k);
    }

  Vec3 lo = plan.fls.front().coordinate;
  for (const auto& r : plan.fls)
    lo = {std::min(lo.x, r.coordinate.x), std::min(lo.y, r.coordinate.y), std::min(lo.z, r.coordinate.z)};
  dispatcher_ = cfg_.dispatcher.value_or(lo);

  agents_.reserve(n);
  for (const auto& r : plan.fls) {
    AgentState a;
    a.fls = r;
    a.pos = cfg_.deploy ? dispatcher_ : r.coordinate;
    a.believed_pose_table.assign(topology_of(r.id).members.size(), std::nullopt);
    a.believed_pose_stamp.assign(a.believed_pose_table.size(), 0.0);
    a.rng = Rng(derive_seed(cfg_.seed, 0x1000 + static_cast<std::uint64_t>(r.id)));
    agents_.push_back(std::move(a));
    if (!cfg_.exclude_dark_from_metrics || !r.is_dark) {
      metric_ids_.push_back(r.id);
      truth_.push_back(r.coordinate);
    }
  }
  if (truth_.empty()) throw ValidationError("no FLSs left to measure");
}

const SwarmTopology& Engine::topology_of(FlsId id) const {
  return topo_[static_cast<std::size_t>(topo_index_[static_cast<std::size_t>(id)])];
}

void Engine::schedule(SimEvent ev) {
  if (ev.time < now_ || std::isnan(ev.time)) throw std::logic_error("event scheduled in the past");
  ev.seq = seq_++;
  queue_.push(std::move(ev));
}

void Engine::run_until(double t_end) {
  if (!started_) {
    started_ = true;
    for (long i = 0; static_cast<double>(i) * cfg_.metric_sample_ms <= cfg_.run_ms; ++i) {
      SimEvent ev;
      ev.time = static_cast<double>(i) * cfg_.metric_sample_ms;
      ev.kind = EventKind::MetricSample;
      schedule(ev);
    }
    for (std::size_t i = 0; i < agents_.size(); ++i) {
      SimEvent ev;
      ev.kind = EventKind::TimerFire;
      ev.timer = TimerKind::Launch;
      ev.agent = static_cast<FlsId>(i);
      ev.time = cfg_.deploy ? static_cast<double>(i) * cfg_.launch_interval_ms : 0.0;
      schedule(ev);
    }
    policy_.on_start(*this);
  }
  while (!queue_.empty() && queue_.top().time <= t_end) {
    const SimEvent ev = queue_.top();
    queue_.pop();
    now_ = ev.time;
    ++processed_;
    dispatch(ev);
  }
  now_ = std::max(now_, t_end);
}

void Engine::dispatch(const SimEvent& ev) {
  switch (ev.kind) {
    case EventKind::MetricSample:
      sample();
      return;
    case EventKind::AgentArrival:
      arrive(ev.agent);
      return;
    case EventKind::MessageDelivery:
      policy_.on_message(*this, ev.agent, ev.msg);
      return;
    case EventKind::TimerFire:
      break;
  }
  auto& a = agent(ev.agent);
  switch (ev.timer) {
    case TimerKind::Launch:
      if (cfg_.deploy) {
        const Vec3 target =
            deploy_with_dead_reckoning(a.fls.coordinate, dispatcher_, cfg_.dr_epsilon_deg, a.rng);
        log("launch", ev.agent, -1, target);
        begin_move(ev.agent, target - a.pos, MoveKind::Deploy);
      } else {
        a.deployed = true;
        policy_.on_deployed(*this, ev.agent);
      }
      return;
    case TimerKind::Idle:
      if (ev.generation != a.idle_generation) return;  // reset since
      policy_.on_timer(*this, ev.agent, TimerKind::Idle);
      return;
    default:
      policy_.on_timer(*this, ev.agent, ev.timer);
      return;
  }
}

void Engine::send(FlsId from, FlsId to, Message m) {
  m.from = from;
  m.to = to;
  SimEvent ev;
  ev.kind = EventKind::MessageDelivery;
  ev.agent = to;
  const double lat = cfg_.latency_max_ms > cfg_.latency_ms ? net_rng_.uniform(cfg_.latency_ms, cfg_.latency_max_ms)
                                                           : cfg_.latency_ms;
  ev.time = now_ + lat;
  ev.msg = std::move(m);
  schedule(std::move(ev));
}

void Engine::broadcast(FlsId from, Message m) {
  for (FlsId to : topology_of(from).members)
    if (to != from) send(from, to, m);
}

void Engine::move(FlsId id, const Vec3& v, MoveKind kind) {
  if (!v.finite()) throw std::logic_error("non-finite move");
  auto& a = agent(id);
  if (a.moving) {
    a.queued_moves.emplace_back(v, kind);
    return;
  }
  begin_move(id, v, kind);
}

void Engine::begin_move(FlsId id, const Vec3& v, MoveKind kind) {
  auto& a = agent(id);
  a.moving = true;
  a.move_v = v;
  a.move_kind = kind;
  a.move_start = now_;
  a.move_end = now_ + v.norm() / cfg_.speed_mm_s * 1000.0;
  SimEvent ev;
  ev.kind = EventKind::AgentArrival;
  ev.agent = id;
  ev.time = a.move_end;
  schedule(ev);
}

void Engine::arrive(FlsId id) {
  auto& a = agent(id);
  const MoveKind kind = a.move_kind;
  const double len = a.move_v.norm();
  a.pos += a.move_v;
  a.moving = false;
  a.odometer += len;
  if (len > 0.0) ++a.moves;
  log("arrival", id, -1, a.move_v, len, std::nullopt,
      kind == MoveKind::Deploy ? "deploy" : kind == MoveKind::Inter ? "inter" : "intra");
  a.move_v = {};
  if (!a.queued_moves.empty()) {
    const auto [v, k] = a.queued_moves.front();
    a.queued_moves.pop_front();
    begin_move(id, v, k);
  }
  if (kind == MoveKind::Deploy) {
    a.deployed = true;
    policy_.on_deployed(*this, id);
  } else {
    policy_.on_arrival(*this, id, kind);
  }
}

void Engine::start_timer(FlsId id, TimerKind kind, double delay_ms) {
  SimEvent ev;
  ev.kind = EventKind::TimerFire;
  ev.timer = kind;
  ev.agent = id;
  ev.time = now_ + std::max(0.0, delay_ms);
  schedule(ev);
}

void Engine::reset_idle_timer(FlsId id) {
  auto& a = agent(id);
  ++a.idle_generation;
  SimEvent ev;
  ev.kind = EventKind::TimerFire;
  ev.timer = TimerKind::Idle;
  ev.agent = id;
  ev.generation = a.idle_generation;
  ev.time = now_ + cfg_.idle_timeout_ms;
  schedule(ev);
}

void Engine::suspend_idle_timer(FlsId id) { ++agent(id).idle_generation; }

Measurement Engine::measure(FlsId observer, FlsId target) {
  auto& o = agent(observer);
  const Vec3 d = agent(target).position_at(now_) - o.position_at(now_);
  if (d.norm2() == 0.0) return DetectionFailure::Range;
  auto m = measure_relative_pose(d, o.fls.mount, o.fls.heading_deg, cfg_.noise, o.rng);
  // A side camera that misses its target yaws toward it and looks again;
  // only its vertical field of view still limits it.
  const auto* fail = std::get_if<DetectionFailure>(&m);
  if (fail && *fail == DetectionFailure::FieldOfView && o.fls.mount == MountType::Side &&
      (d.x != 0.0 || d.y != 0.0)) {
    log("yaw_search", observer, target);
    const double heading = std::atan2(d.y, d.x) * 180.0 / std::numbers::pi;
    m = measure_relative_pose(d, o.fls.mount, heading, cfg_.noise, o.rng);
  }
  return m;
}

void Engine::log(std::string_view kind, FlsId agent, FlsId other, std::optional<Vec3> vec,
                 std::optional<double> value, std::optional<long> count, std::string_view detail) {
  if (!sink_) return;
  sink_(LogRecord{now_, kind, agent, other, vec, value, count, detail});
}

std::vector<Vec3> Engine::positions_now() const {
  std::vector<Vec3> out;
  out.reserve(agents_.size());
  for (const auto& a : agents_) out.push_back(a.position_at(now_));
  return out;
}

void Engine::sample() {
  std::vector<Vec3> est;
  est.reserve(metric_ids_.size());
  for (FlsId id : metric_ids_) est.push_back(agent(id).position_at(now_));
  double dist = 0.0;
  long moves = 0;
  for (const auto& a : agents_) {
    dist += a.odometer;
    moves += a.moves;
  }
  series_.push_back(measure_cloud(now_, est, truth_, dist, moves));
  log("sample", -1, -1, std::nullopt, series_.back().hd_mm, moves);
}

}  // namespace swarical
