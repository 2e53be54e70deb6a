#include "swarical/localization.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <utility>
#include <variant>

namespace swarical {

std::optional<CorrectionVector> compute_correction(const SwarmTopology& topo, int self,
                                                   std::span<const std::optional<Vec3>> table) {
  const auto n = topo.members.size();
  if (self < 0 || static_cast<std::size_t>(self) >= n || table.size() != n)
    throw ValidationError("compute_correction: table does not match the swarm");

  // est[j] = believed position of self minus that of j.
  std::vector<std::optional<Vec3>> est(n);
  est[static_cast<std::size_t>(self)] = Vec3{};
  std::vector<int> stack{self};
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    const auto uu = static_cast<std::size_t>(u);
    const int p = topo.parent[uu];
    if (p >= 0 && table[uu] && !est[static_cast<std::size_t>(p)]) {
      est[static_cast<std::size_t>(p)] = *est[uu] + *table[uu];
      stack.push_back(p);
    }
    for (int c : topo.children[uu]) {
      const auto cc = static_cast<std::size_t>(c);
      if (table[cc] && !est[cc]) {
        est[cc] = *est[uu] - *table[cc];
        stack.push_back(c);
      }
    }
  }

  Vec3 sum;
  int count = 1;
  const Vec3& gt_self = topo.ground_truth[static_cast<std::size_t>(self)];
  for (std::size_t j = 0; j < n; ++j) {
    if (static_cast<int>(j) == self || !est[j]) continue;
    sum += (gt_self - topo.ground_truth[j]) - *est[j];
    ++count;
  }
  if (count == 1) return std::nullopt;
  return CorrectionVector{sum / static_cast<double>(count), count};
}

namespace {

class SwarmPolicy final : public Policy {
 public:
  explicit SwarmPolicy(Technique t) : tech_(t) {}

  void on_start(Engine& eng) override {
    const auto n = eng.agents().size();
    ctl_.assign(n, {});
    for (std::size_t i = 0; i < n; ++i)
      ctl_[i].known_moves.resize(eng.topology_of(static_cast<FlsId>(i)).members.size());
    for (const auto& t : eng.topologies()) {
      auto& c = ctl_[static_cast<std::size_t>(t.primary)];
      c.reported.assign(t.members.size(), std::nullopt);
    }
    const auto root = eng.plan().swarm_tree.root;
    root_fls_ = eng.plan().fls_trees[static_cast<std::size_t>(root)].root_id;
  }

  void on_deployed(Engine& eng, FlsId id) override {
    send_pending_acks(eng, id);
    auto& c = at(id);
    if (c.inter_active) try_finish_inter(eng, id);
    if (tech_ == Technique::RSF) {
      if (id == root_fls_) start_swarm_round(eng, id);
      rsf_try(eng, id);
      return;
    }
    eng.reset_idle_timer(id);
    trigger(eng, id);
  }

  void on_message(Engine& eng, FlsId id, const Message& m) override {
    auto& c = at(id);
    auto& a = eng.agent(id);
    switch (m.type) {
      case MsgType::Pose: {
        const int k = eng.local_index(m.from);
        eng.log("deliver_pose", id, m.from, m.pose, m.corr_len);
        const auto kk = static_cast<std::size_t>(k);
        apply_displacement(eng, id, k, m.v, m.stamp);
        if (m.pose && a.believed_pose_stamp[kk] <= m.stamp) set_entry(eng, id, k, *m.pose, m.stamp);
        if (!c.reported.empty()) c.reported[kk] = m.corr_len;
        eng.reset_idle_timer(id);
        trigger(eng, id);
        if (tech_ == Technique::HC) hc_check(eng, id);
        return;
      }
      case MsgType::Freeze:
        c.frozen = true;
        c.freeze_ack_to = m.from;
        eng.suspend_idle_timer(id);
        send_pending_acks(eng, id);
        return;
      case MsgType::FreezeAck:
        ++c.acks_got;
        try_finish_inter(eng, id);
        return;
      case MsgType::SwarmMove:
        clear_table(eng, id);
        inter_move(eng, id, m.v);
        return;
      case MsgType::Unfreeze:
        c.frozen = false;
        after_unfreeze(eng, id);
        return;
      case MsgType::Notify:
        on_notify(eng, id, m.from);
        return;
      case MsgType::HoldRequest:
        c.holders.push_back(m.from);
        c.hold_ack_to.push_back(m.from);
        eng.log("hold", id, m.from);
        send_pending_acks(eng, id);
        return;
      case MsgType::HoldAck:
        c.anchor_ready = true;
        try_finish_inter(eng, id);
        return;
      case MsgType::Release: {
        std::erase(c.holders, m.from);
        eng.log("release", id, m.from);
        if (!c.holders.empty()) return;
        if (c.deferred_inter) {
          const Vec3 v = *c.deferred_inter;
          c.deferred_inter.reset();
          eng.move(id, v, MoveKind::Inter);
          return;
        }
        if (tech_ == Technique::RSF)
          rsf_try(eng, id);
        else
          resume(eng, id);
        return;
      }
      case MsgType::RoundRequest:
        c.round_parent = m.from;
        c.round_requested = true;
        rsf_try(eng, id);
        return;
      case MsgType::SubtreeDone:
        if (--c.awaiting_done == 0) subtree_complete(eng, id);
        return;
    }
  }

  void on_timer(Engine& eng, FlsId id, TimerKind kind) override {
    auto& c = at(id);
    switch (kind) {
      case TimerKind::Idle:
        if (tech_ == Technique::RSF) return;
        eng.reset_idle_timer(id);
        if (c.frozen) return;
        eng.log("idle", id);
        trigger(eng, id);
        return;
      case TimerKind::Localize:
        c.busy = false;
        if (c.frozen || !c.holders.empty()) {
          // RSF keeps the request and localizes once released.
          if (tech_ == Technique::RSF) c.round_requested = true;
          c.dirty = true;
          eng.log("cycle_abort", id);
          send_pending_acks(eng, id);
          if (c.inter_active) try_finish_inter(eng, id);
          return;
        }
        if (tech_ == Technique::RSF)
          rsf_localize(eng, id);
        else
          hc_isr_cycle(eng, id);
        return;
      case TimerKind::Round:
        start_swarm_round(eng, id);
        return;
      case TimerKind::Launch:
        return;
    }
  }

  void on_arrival(Engine& eng, FlsId id, MoveKind kind) override {
    auto& c = at(id);
    send_pending_acks(eng, id);
    if (kind == MoveKind::Inter) {
      c.frozen = false;
      if (c.inter_active) {
        c.inter_active = false;
        eng.log("inter_done", id);
      }
      after_inter(eng, id);
      return;
    }
    if (tech_ == Technique::RSF) {
      rsf_after_move(eng, id);
      return;
    }
    if (c.inter_active) try_finish_inter(eng, id);
    resume(eng, id);
  }

 private:
  struct Ctl {
    bool busy = false;   // camera capture and processing in progress
    bool dirty = false;  // a trigger arrived while the agent could not act
    bool parent_unseen = false;  // last attempt to detect the parent failed
    double last_cycle_start = -1e300;
    bool frozen = false;
    FlsId freeze_ack_to = -1;
    std::vector<FlsId> holders;     // primaries that need this anchor stationary
    std::vector<FlsId> hold_ack_to;
    std::optional<Vec3> deferred_inter;
    // Recent intra-swarm moves per member, oldest first, for late-arriving poses.
    std::vector<std::deque<std::pair<double, Vec3>>> known_moves;
    // Primary side of inter-swarm localization.
    std::vector<std::optional<double>> reported;  // last correction length per member
    bool inter_pending = false;
    bool inter_active = false;
    bool anchor_ready = false;
    bool measured = false;
    int acks_needed = 0;
    int acks_got = 0;
    // RSF rounds.
    bool round_requested = false;
    FlsId round_parent = -1;
    int awaiting_done = 0;
    bool round_active = false;
    double round_started = 0.0;
  };

  Ctl& at(FlsId id) { return ctl_[static_cast<std::size_t>(id)]; }

  bool threshold_met(double len, const Engine& eng) const {
    const double thr = eng.config().threshold_mm;
    return std::isinf(thr) ? std::isfinite(len) : len < thr;
  }

  bool stationary(const Engine& eng, FlsId id) {
    const auto& a = eng.agent(id);
    return !at(id).busy && !a.moving && a.queued_moves.empty();
  }

  bool free_to_localize(const Engine& eng, FlsId id) {
    const auto& c = at(id);
    return eng.agent(id).deployed && stationary(eng, id) && !c.frozen && c.holders.empty();
  }

  static bool is_primary_of_child_swarm(const Engine& eng, FlsId id) {
    const auto& t = eng.topology_of(id);
    return t.primary == id && t.anchor.has_value();
  }

  void send_pending_acks(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (!eng.agent(id).deployed || !stationary(eng, id)) return;
    if (c.freeze_ack_to >= 0) {
      Message m;
      m.type = MsgType::FreezeAck;
      eng.send(id, c.freeze_ack_to, m);
      c.freeze_ack_to = -1;
    }
    for (FlsId p : c.hold_ack_to) {
      Message m;
      m.type = MsgType::HoldAck;
      eng.send(id, p, m);
    }
    c.hold_ack_to.clear();
  }

  void clear_table(Engine& eng, FlsId id) {
    auto& a = eng.agent(id);
    std::fill(a.believed_pose_table.begin(), a.believed_pose_table.end(), std::nullopt);
    std::fill(a.believed_pose_stamp.begin(), a.believed_pose_stamp.end(), eng.now());
    a.last_correction_len = std::numeric_limits<double>::infinity();
    auto& c = at(id);
    std::fill(c.reported.begin(), c.reported.end(), std::nullopt);
    eng.log("clear", id);
  }

  void inter_move(Engine& eng, FlsId id, const Vec3& v) {
    auto& c = at(id);
    if (!c.holders.empty()) {
      c.deferred_inter = c.deferred_inter.value_or(Vec3{}) + v;
      return;
    }
    eng.move(id, v, MoveKind::Inter);
  }

  void notify_child_swarms(Engine& eng, FlsId id) {
    const auto& rec = eng.agent(id).fls;
    for (SwarmId s : rec.inter_swarm_anchor_for) {
      Message m;
      m.type = MsgType::Notify;
      eng.send(id, eng.plan().fls_trees[static_cast<std::size_t>(s)].root_id, m);
    }
  }

  // HC / ISR intra-swarm ----------------------------------------------------

  void trigger(Engine& eng, FlsId id) {
    if (tech_ == Technique::RSF) return;
    auto& c = at(id);
    if (free_to_localize(eng, id)) {
      begin_cycle(eng, id);
    } else {
      c.dirty = true;
    }
  }

  void resume(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (c.dirty && free_to_localize(eng, id)) {
      c.dirty = false;
      begin_cycle(eng, id);
    }
  }

  void begin_cycle(Engine& eng, FlsId id) {
    auto& c = at(id);
    c.busy = true;
    c.dirty = false;
    const auto& cfg = eng.config();
    const double delay =
        std::max(cfg.localize_ms, c.last_cycle_start + cfg.min_cycle_interval_ms - eng.now());
    c.last_cycle_start = eng.now();
    eng.start_timer(id, TimerKind::Localize, delay);
  }

  /// Measures the parent and stores the pose; returns it when detection worked.
  std::optional<Vec3> measure_parent(Engine& eng, FlsId id) {
    const auto& topo = eng.topology_of(id);
    const int k = eng.local_index(id);
    const int p = topo.parent[static_cast<std::size_t>(k)];
    if (p < 0) return std::nullopt;
    const FlsId parent = topo.members[static_cast<std::size_t>(p)];
    auto& a = eng.agent(id);
    if (!eng.agent(parent).deployed || eng.agent(parent).moving) {
      eng.log("measure_skip", id, parent);
      return std::nullopt;
    }
    const Measurement m = eng.measure(id, parent);
    at(id).parent_unseen = !std::holds_alternative<RelativePose>(m);
    if (const auto* pose = std::get_if<RelativePose>(&m)) {
      const Vec3 own = -pose->vec;
      eng.log("measure", id, parent, own, pose->error_pct);
      set_entry(eng, id, k, own, eng.now());
      return own;
    }
    a.believed_pose_table[static_cast<std::size_t>(k)].reset();
    a.believed_pose_stamp[static_cast<std::size_t>(k)] = eng.now();
    eng.log("measure_fail", id, parent, std::nullopt, std::nullopt, std::nullopt,
            to_string(std::get<DetectionFailure>(m)));
    return std::nullopt;
  }

  void hc_isr_cycle(Engine& eng, FlsId id) {
    auto& a = eng.agent(id);
    const auto& topo = eng.topology_of(id);
    const int k = eng.local_index(id);
    const auto own = measure_parent(eng, id);
    const auto corr = compute_correction(topo, k, a.believed_pose_table);

    Message msg;
    msg.type = MsgType::Pose;
    msg.pose = own;
    msg.stamp = eng.now();
    bool moved = false;
    if (corr) {
      const double len = corr->v.norm();
      a.last_correction_len = len;
      eng.log("correction", id, -1, corr->v, len, corr->contributor_count);
      const Vec3 v = len > kMinStepMm ? corr->v : Vec3{};
      // A fresh own entry was measured before this move; older ones are shifted below.
      if (own) set_entry(eng, id, k, *own + v, eng.now());
      apply_displacement(eng, id, k, v, eng.now());
      if (own) msg.pose = *own + v;
      msg.v = v;
      msg.corr_len = len;
      eng.broadcast(id, msg);
      if (len > kMinStepMm) {
        eng.move(id, v, MoveKind::Intra);
        moved = true;
      }
    } else if (const auto fb = at(id).parent_unseen && !own ? fallback_correction(eng, id) : std::nullopt) {
      // Not a swarm average, so it does not count toward the threshold.
      apply_displacement(eng, id, k, *fb, eng.now());
      msg.v = *fb;
      eng.broadcast(id, msg);
      eng.move(id, *fb, MoveKind::Intra);
      moved = true;
    } else {
      eng.log("no_correction", id);
      if (own) eng.broadcast(id, msg);
    }
    after_cycle(eng, id, corr.has_value());
    if (!moved) resume(eng, id);
  }

  /// Measures the nearest candidates (by planned distance) until one is
  /// detected; returns the correction that places `id` at its planned offset
  /// from that FLS.
  std::optional<Vec3> localize_against_nearest(Engine& eng, FlsId id, std::vector<FlsId> candidates) {
    const Vec3& here = eng.agent(id).fls.coordinate;
    auto gt_dist = [&](FlsId j) { return distance(here, eng.agent(j).fls.coordinate); };
    std::stable_sort(candidates.begin(), candidates.end(),
                     [&](FlsId x, FlsId y) { return gt_dist(x) < gt_dist(y); });
    for (FlsId other : candidates) {
      const auto& b = eng.agent(other);
      if (!b.deployed || b.moving) continue;
      const Measurement m = eng.measure(id, other);
      const auto* pose = std::get_if<RelativePose>(&m);
      if (!pose) continue;
      const Vec3 v = (here - b.fls.coordinate) + pose->vec;
      eng.log("fallback", id, other, v, v.norm());
      return v;
    }
    return std::nullopt;
  }

  /// An agent that cannot see its parent localizes once against the nearest
  /// member it can detect, or against a neighbouring swarm when its own
  /// subtree is the rest of the swarm. Without this a leaf that lands out of
  /// its parent's view never moves again.
  std::optional<Vec3> fallback_correction(Engine& eng, FlsId id) {
    const auto& topo = eng.topology_of(id);
    const int k = eng.local_index(id);
    const int p = topo.parent[static_cast<std::size_t>(k)];
    // The own subtree follows this agent, so it is no reference.
    std::vector<bool> below(topo.members.size(), false);
    below[static_cast<std::size_t>(k)] = true;
    for (std::size_t j = 0; j < topo.members.size(); ++j)  // BFS order: parents come first
      if (topo.parent[j] >= 0 && below[static_cast<std::size_t>(topo.parent[j])]) below[j] = true;
    std::vector<FlsId> candidates;
    for (std::size_t j = 0; j < topo.members.size(); ++j)
      if (!below[j] && static_cast<int>(j) != p) candidates.push_back(topo.members[j]);
    if (auto v = localize_against_nearest(eng, id, std::move(candidates))) return v;

    const Vec3& here = eng.agent(id).fls.coordinate;
    std::vector<FlsId> others;
    for (const auto& f : eng.plan().fls)
      if (f.swarm_id != topo.id && distance(here, f.coordinate) <= eng.config().noise.curve.d_hi)
        others.push_back(f.id);
    return localize_against_nearest(eng, id, std::move(others));
  }

  /// Stores a pose measured at `stamp`, then replays moves of its endpoints
  /// that happened after the measurement but were learned before it arrived.
  void set_entry(Engine& eng, FlsId id, int k, const Vec3& pose, double stamp) {
    auto& a = eng.agent(id);
    const auto& topo = eng.topology_of(id);
    const auto kk = static_cast<std::size_t>(k);
    Vec3 e = pose;
    const auto& hist = at(id).known_moves;
    for (const auto& [t, v] : hist[kk])
      if (t > stamp) e += v;
    if (const int p = topo.parent[kk]; p >= 0)
      for (const auto& [t, v] : hist[static_cast<std::size_t>(p)])
        if (t > stamp) e -= v;
    a.believed_pose_table[kk] = e;
    a.believed_pose_stamp[kk] = stamp;
    eng.log("table_set", id, topo.members[kk], e);
  }

  /// Member `k` moved by `v` at time `t`. Edges touching it that were
  /// measured before the move shift, so path sums see one position per member.
  void apply_displacement(Engine& eng, FlsId id, int k, const Vec3& v, double t) {
    if (v.norm2() == 0.0) return;
    auto& a = eng.agent(id);
    const auto& topo = eng.topology_of(id);
    auto& hist = at(id).known_moves[static_cast<std::size_t>(k)];
    const auto& cfg = eng.config();
    const double horizon = eng.now() - 2.0 * cfg.latency_max_ms - cfg.localize_ms - 100.0;
    while (!hist.empty() && hist.front().first < horizon) hist.pop_front();
    hist.emplace_back(t, v);
    auto shift = [&](int j, const Vec3& d) {
      const auto jj = static_cast<std::size_t>(j);
      if (!a.believed_pose_table[jj] || a.believed_pose_stamp[jj] >= t) return;
      *a.believed_pose_table[jj] += d;
      eng.log("table_shift", id, topo.members[jj], d);
    };
    shift(k, v);
    for (int c : topo.children[static_cast<std::size_t>(k)]) shift(c, -v);
  }

  void after_cycle(Engine& eng, FlsId id, bool computed) {
    const auto& topo = eng.topology_of(id);
    const auto& a = eng.agent(id);
    if (tech_ == Technique::HC) {
      hc_check(eng, id);
    } else if (tech_ == Technique::ISR) {
      const bool ok = topo.members.size() == 1 || (computed && threshold_met(a.last_correction_len, eng));
      if (!topo.anchor && ok) notify_child_swarms(eng, id);
      isr_try_start(eng, id);
    }
  }

  void after_inter(Engine& eng, FlsId id) {
    if (tech_ == Technique::RSF) {
      if (eng.topology_of(id).primary == id) {
        notify_child_swarms(eng, id);
        start_swarm_round(eng, id);
      } else {
        rsf_try(eng, id);
      }
      return;
    }
    if (tech_ == Technique::ISR) notify_child_swarms(eng, id);
    eng.reset_idle_timer(id);
    at(id).dirty = true;
    resume(eng, id);
  }

  void after_unfreeze(Engine& eng, FlsId id) {
    if (tech_ == Technique::RSF) {
      rsf_try(eng, id);
      return;
    }
    eng.reset_idle_timer(id);
    resume(eng, id);
  }

  // Inter-swarm --------------------------------------------------------------

  void hc_check(Engine& eng, FlsId id) {
    if (!is_primary_of_child_swarm(eng, id)) return;
    auto& c = at(id);
    if (c.inter_active || !eng.agent(id).deployed) return;
    const auto& topo = eng.topology_of(id);
    if (topo.members.size() > 1 && !threshold_met(eng.agent(id).last_correction_len, eng)) return;
    for (std::size_t j = 1; j < topo.members.size(); ++j)
      if (!c.reported[j] || !threshold_met(*c.reported[j], eng)) return;
    begin_inter(eng, id);
  }

  void on_notify(Engine& eng, FlsId id, FlsId from) {
    auto& c = at(id);
    if (c.inter_pending || c.inter_active) {
      eng.log("notify_drop", id, from);
      return;
    }
    c.inter_pending = true;
    eng.log("notify_accept", id, from);
    if (tech_ == Technique::ISR)
      isr_try_start(eng, id);
    else if (!c.round_active)
      begin_inter(eng, id);
  }

  void isr_try_start(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (!c.inter_pending || c.inter_active || !eng.agent(id).deployed) return;
    const auto& topo = eng.topology_of(id);
    if (topo.members.size() > 1 && !threshold_met(eng.agent(id).last_correction_len, eng)) return;
    begin_inter(eng, id);
  }

  void begin_inter(Engine& eng, FlsId id) {
    auto& c = at(id);
    const auto& topo = eng.topology_of(id);
    c.inter_pending = false;
    c.inter_active = true;
    c.measured = false;
    c.frozen = true;
    c.acks_needed = static_cast<int>(topo.members.size()) - 1;
    c.acks_got = 0;
    c.anchor_ready = tech_ == Technique::HC;
    eng.suspend_idle_timer(id);
    eng.log("inter_begin", id, *topo.anchor);
    if (!c.anchor_ready) {
      Message m;
      m.type = MsgType::HoldRequest;
      eng.send(id, *topo.anchor, m);
    }
    Message f;
    f.type = MsgType::Freeze;
    eng.broadcast(id, f);
    try_finish_inter(eng, id);
  }

  void try_finish_inter(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (!c.inter_active || c.measured || c.acks_got < c.acks_needed || !c.anchor_ready) return;
    if (!eng.agent(id).deployed || !stationary(eng, id)) return;
    const auto& topo = eng.topology_of(id);
    const FlsId anchor = *topo.anchor;
    // An anchor still on its way from the dispatcher is no reference yet.
    const bool anchor_up = eng.agent(anchor).deployed;
    const Measurement m = anchor_up ? eng.measure(id, anchor) : Measurement{DetectionFailure::Range};
    if (tech_ != Technique::HC) {
      Message r;
      r.type = MsgType::Release;
      eng.send(id, anchor, r);
    }
    const auto* pose = std::get_if<RelativePose>(&m);
    std::optional<Vec3> fb;
    if (!pose) {
      eng.log("inter_fail", id, anchor, std::nullopt, std::nullopt, std::nullopt,
              anchor_up ? to_string(std::get<DetectionFailure>(m)) : std::string_view("undeployed"));
      std::vector<FlsId> candidates;
      for (FlsId j : eng.topology_of(anchor).members)
        if (j != anchor) candidates.push_back(j);
      fb = localize_against_nearest(eng, id, std::move(candidates));
    }
    if (!pose && !fb) {
      c.inter_active = false;
      c.frozen = false;
      Message u;
      u.type = MsgType::Unfreeze;
      eng.broadcast(id, u);
      if (tech_ == Technique::RSF) {
        start_swarm_round(eng, id);
      } else {
        eng.reset_idle_timer(id);
        c.dirty = true;
        resume(eng, id);
      }
      return;
    }
    c.measured = true;
    Vec3 v;
    if (pose) {
      const Vec3 own = -pose->vec;
      v = eng.agent(id).fls.coordinate - eng.agent(anchor).fls.coordinate - own;
      eng.log("inter_measure", id, anchor, own, pose->error_pct);
    } else {
      v = *fb;
    }
    if (v.norm() <= kMinStepMm) v = Vec3{};
    eng.log("swarm_move", id, -1, v, v.norm());
    Message sm;
    sm.type = MsgType::SwarmMove;
    sm.v = v;
    eng.broadcast(id, sm);
    clear_table(eng, id);
    inter_move(eng, id, v);
  }

  // RSF rounds ---------------------------------------------------------------

  void start_swarm_round(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (c.round_active) return;
    const auto& topo = eng.topology_of(id);
    const auto& kids = topo.children[0];
    c.round_active = true;
    c.round_started = eng.now();
    eng.log("round_start", id);
    if (id == root_fls_) notify_child_swarms(eng, id);
    if (kids.empty()) {
      subtree_complete(eng, id);
      return;
    }
    c.awaiting_done = static_cast<int>(kids.size());
    for (int k : kids) {
      Message m;
      m.type = MsgType::RoundRequest;
      eng.send(id, topo.members[static_cast<std::size_t>(k)], m);
    }
  }

  void rsf_try(Engine& eng, FlsId id) {
    auto& c = at(id);
    if (!c.round_requested || !free_to_localize(eng, id)) return;
    c.round_requested = false;
    c.busy = true;
    eng.start_timer(id, TimerKind::Localize, eng.config().localize_ms);
  }

  void rsf_localize(Engine& eng, FlsId id) {
    auto& a = eng.agent(id);
    const auto& topo = eng.topology_of(id);
    const int k = eng.local_index(id);
    const int p = topo.parent[static_cast<std::size_t>(k)];
    if (const auto own = measure_parent(eng, id)) {
      const auto kk = static_cast<std::size_t>(k);
      const Vec3 v = (topo.ground_truth[kk] - topo.ground_truth[static_cast<std::size_t>(p)]) - *own;
      a.last_correction_len = v.norm();
      eng.log("correction", id, -1, v, v.norm(), 2);
      if (v.norm() > kMinStepMm) {
        eng.move(id, v, MoveKind::Intra);
        return;
      }
    } else if (at(id).parent_unseen) {
      if (const auto fb = fallback_correction(eng, id)) {
        eng.move(id, *fb, MoveKind::Intra);
        return;
      }
    }
    rsf_after_move(eng, id);
  }

  void rsf_after_move(Engine& eng, FlsId id) {
    auto& c = at(id);
    const auto& topo = eng.topology_of(id);
    const auto& kids = topo.children[static_cast<std::size_t>(eng.local_index(id))];
    notify_child_swarms(eng, id);
    if (kids.empty()) {
      Message m;
      m.type = MsgType::SubtreeDone;
      eng.send(id, c.round_parent, m);
      return;
    }
    c.awaiting_done = static_cast<int>(kids.size());
    for (int kid : kids) {
      Message m;
      m.type = MsgType::RoundRequest;
      eng.send(id, topo.members[static_cast<std::size_t>(kid)], m);
    }
  }

  void subtree_complete(Engine& eng, FlsId id) {
    auto& c = at(id);
    const auto& topo = eng.topology_of(id);
    if (topo.primary != id) {
      Message m;
      m.type = MsgType::SubtreeDone;
      eng.send(id, c.round_parent, m);
      return;
    }
    c.round_active = false;
    eng.log("round_done", id);
    if (id == root_fls_) {
      double gap = eng.config().rsf_round_gap_ms;
      if (topo.members.size() == 1) gap = std::max(gap, eng.config().idle_timeout_ms);
      eng.start_timer(id, TimerKind::Round, gap);
    } else if (c.inter_pending) {
      begin_inter(eng, id);
    }
  }

  // Corrections shorter than this are below actuator resolution and only
  // come from floating-point residue.
  static constexpr double kMinStepMm = 1e-6;

  Technique tech_;
  std::vector<Ctl> ctl_;
  FlsId root_fls_ = -1;
};

}  // namespace

std::unique_ptr<Policy> make_policy(Technique t) { return std::make_unique<SwarmPolicy>(t); }

SimResult simulate(const DeploymentPlan& plan, const SimConfig& cfg, LogSink sink) {
  auto policy = make_policy(cfg.technique);
  Engine eng(plan, cfg, *policy, std::move(sink));
  eng.run_until(cfg.run_ms);
  SimResult r;
  r.series = eng.series();
  r.final_positions = eng.positions_now();
  for (const auto& a : eng.agents()) r.odometers.push_back(a.odometer);
  r.events = eng.events_processed();
  return r;
}

}  // namespace swarical
