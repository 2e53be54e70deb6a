#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <queue>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "swarical/core_model.hpp"
#include "swarical/metrics.hpp"
#include "swarical/rng.hpp"
#include "swarical/sensor_noise.hpp"

namespace swarical {

enum class Technique { HC, ISR, RSF };

std::string_view to_string(Technique t);
Technique parse_technique(std::string_view s);

struct SimConfig {
  std::uint64_t seed = 1;
  double speed_mm_s = 1000.0;
  double latency_ms = 25.0;
  double latency_max_ms = 25.0;  // > latency_ms draws uniformly per message
  double threshold_mm = 1.0;     // may be +inf
  double run_ms = 60000.0;
  Technique technique = Technique::ISR;
  double metric_sample_ms = 500.0;

  double idle_timeout_ms = 500.0;
  double localize_ms = 20.0;       // camera capture plus processing per cycle
  double min_cycle_interval_ms = 0.0;  // HC/ISR rate limit, off by default
  double rsf_round_gap_ms = 0.0;   // pause before the root swarm starts the next round

  bool deploy = true;              // false: agents start at their plan coordinates
  double dr_epsilon_deg = 5.0;
  std::optional<Vec3> dispatcher;  // default: plan bounding-box minimum corner
  double launch_interval_ms = 50.0;

  NoiseModel noise{default_calibration()};  // fov_half_angle comes from the plan's sensor
  bool exclude_dark_from_metrics = false;

  void validate() const;
};

/// Reads the JSON config; relative calibration paths resolve against `base_dir`.
SimConfig sim_config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
SimConfig load_sim_config(const std::filesystem::path& path);

enum class EventKind { MessageDelivery, TimerFire, AgentArrival, MetricSample };
enum class TimerKind { Idle, Localize, Launch, Round };
enum class MoveKind { Deploy, Intra, Inter };

enum class MsgType {
  Pose,         // parent-relative pose (optional) plus last correction length
  Freeze,       // primary -> member: stop localizing, ack when stationary
  FreezeAck,
  SwarmMove,    // primary -> member: translate by v
  Unfreeze,     // primary -> member: inter-swarm attempt aborted
  Notify,       // anchor -> child-swarm primary: localize against me
  HoldRequest,  // primary -> anchor: stay stationary
  HoldAck,
  Release,
  RoundRequest,  // RSF parent -> child: localize against me
  SubtreeDone,   // RSF child -> parent: my subtree finished the round
};

std::string_view to_string(MsgType t);

struct Message {
  MsgType type = MsgType::Pose;
  FlsId from = -1;
  FlsId to = -1;
  std::optional<Vec3> pose;  // sender relative to its FLS-tree parent
  double corr_len = std::numeric_limits<double>::infinity();
  Vec3 v;            // displacement the sender is applying
  double stamp = 0;  // time the pose and displacement refer to
};

struct SimEvent {
  double time = 0.0;
  std::uint64_t seq = 0;
  EventKind kind = EventKind::TimerFire;
  FlsId agent = -1;
  TimerKind timer = TimerKind::Idle;
  std::uint64_t generation = 0;
  Message msg;
};

/// Static view of one swarm shared by its agents: members in FLS-tree BFS
/// order (local index 0 is the root) plus ground truth.
struct SwarmTopology {
  SwarmId id = -1;
  std::vector<FlsId> members;
  std::vector<int> parent;  // local index, -1 for the root
  std::vector<std::vector<int>> children;
  std::vector<Vec3> ground_truth;
  FlsId primary = -1;
  std::optional<FlsId> anchor;  // in the parent swarm
};

std::vector<SwarmTopology> build_topologies(const DeploymentPlan& plan);

struct AgentState {
  FlsRecord fls;
  Vec3 pos;  // at rest, or where the current move started
  bool deployed = false;
  bool moving = false;
  MoveKind move_kind = MoveKind::Intra;
  Vec3 move_v;
  double move_start = 0.0;
  double move_end = 0.0;
  std::deque<std::pair<Vec3, MoveKind>> queued_moves;
  // Believed pose of each member relative to its FLS-tree parent, by local index.
  std::vector<std::optional<Vec3>> believed_pose_table;
  std::vector<double> believed_pose_stamp;  // time each entry reflects
  double last_correction_len = std::numeric_limits<double>::infinity();
  double odometer = 0.0;
  long moves = 0;
  std::uint64_t idle_generation = 0;
  Rng rng{0};

  [[nodiscard]] bool stationary() const { return !moving; }
  [[nodiscard]] Vec3 position_at(double t) const;
};

/// One structured log line. `kind` and `detail` always point at literals.
struct LogRecord {
  double t = 0.0;
  std::string_view kind;
  FlsId agent = -1;
  FlsId other = -1;
  std::optional<Vec3> vec;
  std::optional<double> value;
  std::optional<long> count;
  std::string_view detail;
};

void write_log_line(const LogRecord& r, std::ostream& out);

using LogSink = std::function<void(const LogRecord&)>;

class Engine;

/// Per-technique behaviour plugged into the engine.
class Policy {
 public:
  virtual ~Policy() = default;
  virtual void on_start(Engine&) {}
  virtual void on_deployed(Engine& eng, FlsId id) = 0;
  virtual void on_message(Engine& eng, FlsId id, const Message& m) = 0;
  virtual void on_timer(Engine& eng, FlsId id, TimerKind kind) = 0;
  virtual void on_arrival(Engine& eng, FlsId id, MoveKind kind) = 0;
};

class Engine {
 public:
  Engine(const DeploymentPlan& plan, SimConfig cfg, Policy& policy, LogSink sink = {});

  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void schedule(SimEvent ev);
  /// Processes every event with time <= t_end.
  void run_until(double t_end);

  [[nodiscard]] double now() const { return now_; }
  [[nodiscard]] const SimConfig& config() const { return cfg_; }
  [[nodiscard]] const DeploymentPlan& plan() const { return plan_; }

  AgentState& agent(FlsId id) { return agents_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] const AgentState& agent(FlsId id) const { return agents_[static_cast<std::size_t>(id)]; }
  [[nodiscard]] const std::vector<AgentState>& agents() const { return agents_; }
  [[nodiscard]] const SwarmTopology& topology_of(FlsId id) const;
  [[nodiscard]] const std::vector<SwarmTopology>& topologies() const { return topo_; }
  [[nodiscard]] int local_index(FlsId id) const { return local_[static_cast<std::size_t>(id)]; }

  void send(FlsId from, FlsId to, Message m);
  /// One delivery to every other member of the sender's swarm.
  void broadcast(FlsId from, Message m);
  /// Queued behind the current move if the agent is already moving.
  void move(FlsId id, const Vec3& v, MoveKind kind);
  void start_timer(FlsId id, TimerKind kind, double delay_ms);
  void reset_idle_timer(FlsId id);
  void suspend_idle_timer(FlsId id);

  /// Camera observation of `target` from `observer` at the current time.
  Measurement measure(FlsId observer, FlsId target);

  [[nodiscard]] bool logging() const { return static_cast<bool>(sink_); }
  void log(std::string_view kind, FlsId agent, FlsId other = -1, std::optional<Vec3> vec = std::nullopt,
           std::optional<double> value = std::nullopt, std::optional<long> count = std::nullopt,
           std::string_view detail = {});

  [[nodiscard]] std::vector<Vec3> positions_now() const;
  [[nodiscard]] const MetricSeries& series() const { return series_; }
  [[nodiscard]] std::uint64_t events_processed() const { return processed_; }

 private:
  struct Later {
    bool operator()(const SimEvent& a, const SimEvent& b) const {
      return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
  };

  void dispatch(const SimEvent& ev);
  void begin_move(FlsId id, const Vec3& v, MoveKind kind);
  void arrive(FlsId id);
  void sample();

  const DeploymentPlan& plan_;
  SimConfig cfg_;
  Policy& policy_;
  LogSink sink_;
  std::vector<SwarmTopology> topo_;
  std::vector<int> topo_index_;  // by FLS id
  std::vector<int> local_;       // by FLS id
  std::vector<AgentState> agents_;
  std::vector<Vec3> truth_;      // metric reference cloud
  std::vector<FlsId> metric_ids_;
  Rng net_rng_;
  Vec3 dispatcher_;
  std::priority_queue<SimEvent, std::vector<SimEvent>, Later> queue_;
  std::uint64_t seq_ = 0;
  std::uint64_t processed_ = 0;
  double now_ = 0.0;
  bool started_ = false;
  MetricSeries series_;
};

}  // namespace swarical
