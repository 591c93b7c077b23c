#pragma once

// Synchronous round scheduler. One round k -> k+1 runs five phases, each a
// barrier: churn, acks, weights + departure detection, Λ max-consensus
// iterations, data exchange + update.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <vector>

#include "opengt/agent.hpp"
#include "opengt/costs.hpp"
#include "opengt/oracle.hpp"
#include "opengt/scenario.hpp"
#include "opengt/topology.hpp"
#include "opengt/world.hpp"

namespace opengt {

struct EngineOptions {
  // Negative control only: forces h = 0 everywhere, so departures never reset
  // the trackers.
  bool disable_reset = false;
};

class Engine {
 public:
  Engine(MaximalDigraph graph, double gamma, EngineOptions options = {})
      : graph_(std::move(graph)), gamma_(gamma), options_(options) {
    if (!(gamma_ > 0)) throw ConfigError("step size must be positive");
  }

  const MaximalDigraph& graph() const noexcept { return graph_; }
  double gamma() const noexcept { return gamma_; }
  std::size_t lambda() const noexcept { return graph_.diameter_bound(); }

  // Round 0: every listed agent arrives into an empty network.
  WorldState initial_world(std::span<const ChurnEvent> arrivals) const {
    WorldState world;
    world.activation = ActivationVector(graph_.node_count());
    world.prev_activation = ActivationVector(graph_.node_count());
    for (const auto& ev : arrivals) {
      if (ev.kind != EventKind::join || !ev.cost) throw ConfigError("initial events must be joins with a cost");
      if (world.activation[ev.agent]) throw ConfigError(node_label(ev.agent) + " listed twice at round 0");
      world.activation.set(ev.agent, true);
      auto state = init_arrival(ev.agent, ev.x_hat, *ev.cost, gamma_);
      state.prev_acks = ack_indicator(graph_.out_neighbors(ev.agent), {});
      world.agents.emplace(ev.agent, std::move(state));
    }
    for (const auto& [j, _] : world.agents) world.consensus[j] = false;
    world.partition = clusters(graph_, world.activation);
    return world;
  }

  WorldState run_round(const WorldState& world, std::span<const ChurnEvent> events) const {
    const std::size_t next_round = world.round + 1;
    WorldState next;
    next.round = next_round;
    next.prev_activation = world.activation;

    // Phase 1: churn, leaves before joins.
    ActivationVector activation = world.activation;
    std::set<NodeId> leavers;
    for (const auto& ev : events) {
      if (ev.kind != EventKind::leave) continue;
      if (!activation[ev.agent])
        throw ConfigError("round " + std::to_string(next_round) + ": leave of inactive " + node_label(ev.agent));
      activation.set(ev.agent, false);
      leavers.insert(ev.agent);
    }
    for (const auto& ev : events) {
      if (ev.kind != EventKind::join) continue;
      if (activation[ev.agent] || leavers.count(ev.agent))
        throw ConfigError("round " + std::to_string(next_round) + ": join of active " + node_label(ev.agent));
      if (!ev.cost) throw ConfigError("round " + std::to_string(next_round) + ": join without cost");
      activation.set(ev.agent, true);
    }
    next.activation = activation;
    const auto split = partition_population(world.activation, activation);

    // Phase 2: acks. Agents remaining this round ack to every active in-neighbour;
    // arrivals are first acknowledged one round later.
    std::map<NodeId, std::set<NodeId>> acks;
    for (NodeId l : split.remaining)
      for (NodeId i : graph_.in_neighbors(l))
        if (activation[i]) acks[i].insert(l);

    // Phase 3: departure detection (reads old acks), then weights (overwrites them).
    std::map<NodeId, AgentState> states;
    std::map<NodeId, bool> hbar;
    for (NodeId j : split.remaining) {
      AgentState s = world.agents.at(j);
      const auto& out = graph_.out_neighbors(j);
      const bool detected = detect_departures(s.prev_acks, ack_indicator(out, acks[j]));
      next.plans[j] = assign_push_weights(s, out, acks[j]);
      hbar[j] = detected;
      if (detected) next.detectors.insert(j);
      states.emplace(j, std::move(s));
    }
    for (const auto& ev : events) {
      if (ev.kind != EventKind::join) continue;
      auto s = init_arrival(ev.agent, ev.x_hat, *ev.cost, gamma_);
      s.prev_acks = ack_indicator(graph_.out_neighbors(ev.agent), acks[ev.agent]);
      hbar[ev.agent] = false;
      states.emplace(ev.agent, std::move(s));
    }

    // Phase 4: Λ synchronous max-consensus iterations over active edges.
    for (std::size_t it = 0; it < lambda(); ++it) {
      std::map<NodeId, std::vector<DetectionMessage>> inbox;
      for (const auto& [i, bit] : hbar)
        for (NodeId l : graph_.out_neighbors(i))
          if (activation[l]) inbox[l].push_back({i, bit});
      std::map<NodeId, bool> updated;
      for (const auto& [j, bit] : hbar) updated[j] = max_consensus_step(bit, inbox[j]);
      hbar = std::move(updated);
    }
    next.consensus = hbar;

    // Phase 5: data exchange and update for remaining agents.
    std::map<NodeId, std::vector<DataMessage>> inbox;
    std::map<NodeId, Contribution> own;
    for (NodeId j : split.remaining) {
      auto& s = states.at(j);
      s.h = options_.disable_reset ? false : hbar.at(j);
      const auto& plan = next.plans.at(j);
      own[j] = self_contribution(s, plan.weight);
      for (auto& m : make_outbound(s, plan.weight, plan.active_out)) inbox[m.to].push_back(m);
    }
    for (NodeId j : split.remaining) {
      auto& msgs = inbox[j];
      std::sort(msgs.begin(), msgs.end(), [](const auto& a, const auto& b) { return a.from < b.from; });
      const auto& s = states.at(j);
      AgentState updated = apply_update(s, own.at(j), msgs, s.h, s.cost);
      states.at(j) = std::move(updated);
    }

    next.agents = std::move(states);
    next.partition = clusters(graph_, activation);
    return next;
  }

  RoundRecord record(const WorldState& world) const {
    RoundRecord rec;
    rec.round = world.round;
    rec.activation = world.activation;
    rec.partition = world.partition;
    rec.plans = world.plans;
    for (const auto& [j, s] : world.agents) {
      auto hb = world.consensus.find(j);
      rec.agents.push_back({j, s.x, s.y, s.z, s.w, s.h, world.detectors.count(j) > 0,
                            hb != world.consensus.end() && hb->second});
    }
    for (std::size_t q = 0; q < world.partition.clusters.size(); ++q) {
      const auto& members = world.partition.clusters[q];
      ClusterObjective obj;
      for (NodeId j : members) obj.costs.push_back(world.agents.at(j).cost);
      ClusterRecord c;
      c.index = q;
      c.members = members;
      c.minimizer = cluster_minimizer(obj);
      double sq = 0;
      for (NodeId j : members) {
        const double d = world.agents.at(j).z - c.minimizer;
        sq += d * d;
      }
      c.error = std::sqrt(sq);
      c.lemma1_residual = lemma1_residual(world, members);
      rec.clusters.push_back(std::move(c));
    }
    return rec;
  }

 private:
  MaximalDigraph graph_;
  double gamma_;
  EngineOptions options_;
};

// Runs rounds 0..rounds (defaults to the schedule's horizon) and records each.
// `on_round`, when given, sees every world state as it is produced.
inline Trace run(const Schedule& sched, EngineOptions options = {}, std::optional<std::size_t> rounds = std::nullopt,
                 const std::function<void(const WorldState&)>& on_round = {}) {
  const Engine engine(sched.graph, sched.gamma, options);
  const std::size_t horizon = rounds.value_or(sched.rounds);
  Trace trace;
  trace.node_count = sched.graph.node_count();
  trace.seed = sched.seed;
  trace.gamma = sched.gamma;
  trace.lambda = engine.lambda();

  WorldState world = engine.initial_world(sched.initial);
  if (on_round) on_round(world);
  trace.rounds.push_back(engine.record(world));
  for (std::size_t k = 0; k < horizon; ++k) {
    world = engine.run_round(world, sched.events_at(k + 1));
    if (on_round) on_round(world);
    trace.rounds.push_back(engine.record(world));
  }
  return trace;
}

inline Trace run(const Scenario& scenario, std::optional<std::uint64_t> seed = std::nullopt,
                 EngineOptions options = {}) {
  return run(resolve_schedule(scenario, seed), options);
}

}  // namespace opengt
