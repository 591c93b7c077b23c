#pragma once

// Per-agent Open-GT operations. Each one is a function of the agent's own
// state and the messages it received in the current phase.

#include <algorithm>
#include <cstddef>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "opengt/costs.hpp"
#include "opengt/errors.hpp"
#include "opengt/topology.hpp"

namespace opengt {

// Ack bit per potential out-neighbour. Missing keys read as 0.
using AckMap = std::map<NodeId, bool>;

struct AgentState {
  NodeId id = 0;
  double x = 0;  // push-sum numerator
  double y = 1;  // push-sum weight, always > 0
  double z = 0;  // estimate x / y
  double w = 0;  // gradient tracker
  bool h = false;  // reset flag applied in the update that produced this state
  AckMap prev_acks;
  CostFunction cost = CostFunction::quadratic(1, 0);
  double gamma = 0;
};

struct DataMessage {
  NodeId from;
  NodeId to;
  double sx;  // c * (x - gamma * w)
  double sy;  // c * y
  double sw;  // c * w
  bool h;     // carried on the wire, never read by the receiver
};

struct AckMessage {
  NodeId from;
  bool bit = true;
};

struct DetectionMessage {
  NodeId from;
  bool hbar;
};

// The sender's own scaled triple; kept locally instead of sent to itself.
struct Contribution {
  double sx;
  double sy;
  double sw;
};

struct PushPlan {
  std::size_t out_degree = 0;
  double weight = 1;
  std::vector<NodeId> active_out;
};

inline AgentState init_arrival(NodeId id, double x_hat, CostFunction cost, double gamma) {
  if (!(gamma > 0)) throw ConfigError("step size must be positive, got " + std::to_string(gamma));
  AgentState s;
  s.id = id;
  s.x = x_hat;
  s.y = 1;
  s.z = x_hat;
  s.w = gradient(cost, x_hat);
  s.h = false;
  s.cost = std::move(cost);
  s.gamma = gamma;
  return s;
}

// h̄_0: 1 iff some out-neighbour acked last round and is silent now.
inline bool detect_departures(const AckMap& prev, const AckMap& curr) {
  for (const auto& [l, was_active] : prev) {
    if (!was_active) continue;
    auto it = curr.find(l);
    if (it == curr.end() || !it->second) return true;
  }
  return false;
}

inline AckMap ack_indicator(std::span<const NodeId> potential_out, const std::set<NodeId>& acks) {
  AckMap m;
  for (NodeId l : potential_out) m[l] = acks.count(l) > 0;
  return m;
}

// Weight 1/(1 + d) on self and every acking out-neighbour, 0 elsewhere. Call
// after detect_departures: this overwrites state.prev_acks with the new acks.
inline PushPlan assign_push_weights(AgentState& state, std::span<const NodeId> potential_out,
                                    const std::set<NodeId>& acks) {
  PushPlan plan;
  for (NodeId l : potential_out)
    if (acks.count(l)) plan.active_out.push_back(l);
  if (plan.active_out.size() != acks.size())
    throw InvariantViolation("agent " + node_label(state.id) + " received an ack from a non-neighbour");
  plan.out_degree = plan.active_out.size();
  plan.weight = 1.0 / (1.0 + static_cast<double>(plan.out_degree));
  state.prev_acks = ack_indicator(potential_out, acks);
  return plan;
}

inline bool max_consensus_step(bool own, std::span<const DetectionMessage> incoming) {
  for (const auto& m : incoming) own = own || m.hbar;
  return own;
}

inline Contribution self_contribution(const AgentState& s, double weight) {
  return {weight * (s.x - s.gamma * s.w), weight * s.y, weight * s.w};
}

inline std::vector<DataMessage> make_outbound(const AgentState& s, double weight, std::span<const NodeId> active_out) {
  if (!(weight > 0 && weight <= 1))
    throw InvariantViolation("push weight " + std::to_string(weight) + " outside (0,1] at " + node_label(s.id));
  const auto c = self_contribution(s, weight);
  std::vector<DataMessage> out;
  out.reserve(active_out.size());
  for (NodeId l : active_out) out.push_back({s.id, l, c.sx, c.sy, c.sw, s.h});
  return out;
}

// One gradient-tracking update. `reset` is the agreed max-consensus flag of
// this round; when set, the mixed tracker is discarded and w = grad(z+).
inline AgentState apply_update(const AgentState& s, const Contribution& self, std::span<const DataMessage> inbound,
                               bool reset, const CostFunction& cost_next) {
  double sx = self.sx, sy = self.sy, sw = self.sw;
  for (const auto& m : inbound) {
    sx += m.sx;
    sy += m.sy;
    sw += m.sw;
  }
  if (!(sy > 0))
    throw InvariantViolation("non-positive push-sum weight y=" + std::to_string(sy) + " at " + node_label(s.id));

  AgentState next = s;
  next.x = sx;
  next.y = sy;
  next.z = sx / sy;
  const double g_now = gradient(s.cost, s.z);
  const double g_next = gradient(cost_next, next.z);
  next.w = reset ? g_next : g_next + (sw - g_now);
  next.h = reset;
  next.cost = cost_next;
  return next;
}

}  // namespace opengt
