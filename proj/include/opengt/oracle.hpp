#pragma once

// Matrix-form reference for the message-passing engine. Everything here is
// recomputed from activations and the maximal graph; nothing is read back
// from the engine except in build_weight_matrix(), which exposes the weights
// an engine round actually used.
//
// Inactive coordinates are held at zero and excluded from comparisons.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <map>
#include <queue>
#include <set>
#include <vector>

#include "opengt/costs.hpp"
#include "opengt/scenario.hpp"
#include "opengt/topology.hpp"
#include "opengt/world.hpp"

namespace opengt {

// Gradient of agent `j`'s cost at `z`.
using GradientField = std::function<double(std::size_t j, double z)>;

inline Eigen::MatrixXd build_weight_matrix(const std::map<NodeId, PushPlan>& plans, std::size_t n) {
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (const auto& [j, plan] : plans) {
    const auto col = static_cast<Eigen::Index>(j);
    c(col, col) = plan.weight;
    for (NodeId l : plan.active_out) c(static_cast<Eigen::Index>(l), col) = plan.weight;
  }
  return c;
}

// C_{k} as used by the round that produced `world`.
inline Eigen::MatrixXd build_weight_matrix(const WorldState& world) {
  return build_weight_matrix(world.plans, world.activation.size());
}

inline Eigen::MatrixXd build_weight_matrix(const RoundRecord& record) {
  return build_weight_matrix(record.plans, record.activation.size());
}

// C_k from scratch: senders and receivers are the agents active at both rounds.
inline Eigen::MatrixXd reference_weight_matrix(const MaximalDigraph& g, const ActivationVector& prev,
                                               const ActivationVector& curr) {
  const auto n = static_cast<Eigen::Index>(g.node_count());
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(n, n);
  auto remaining = [&](NodeId v) { return prev[v] && curr[v]; };
  for (NodeId j = 0; j < g.node_count(); ++j) {
    if (!remaining(j)) continue;
    std::vector<NodeId> receivers;
    for (NodeId l : g.out_neighbors(j))
      if (remaining(l)) receivers.push_back(l);
    const double weight = 1.0 / (1.0 + static_cast<double>(receivers.size()));
    c(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = weight;
    for (NodeId l : receivers) c(static_cast<Eigen::Index>(l), static_cast<Eigen::Index>(j)) = weight;
  }
  return c;
}

struct DepartureFlags {
  std::set<NodeId> detectors;
  std::vector<bool> flags;  // h after Λ max-consensus iterations, per node
};

// Detectors are agents remaining at k+1 with an out-neighbour that was
// remaining at k and is gone at k+1. Flags are set on every active agent at
// hop distance <= lambda from a detector in the round-(k+1) active graph.
inline DepartureFlags reference_departure_flags(const MaximalDigraph& g, const ActivationVector& before_prev,
                                                const ActivationVector& prev, const ActivationVector& curr,
                                                std::size_t lambda) {
  const std::size_t n = g.node_count();
  DepartureFlags out;
  out.flags.assign(n, false);
  for (NodeId j = 0; j < n; ++j) {
    if (!(prev[j] && curr[j])) continue;
    for (NodeId l : g.out_neighbors(j))
      if (before_prev[l] && prev[l] && !curr[l]) out.detectors.insert(j);
  }
  std::vector<std::size_t> dist(n, SIZE_MAX);
  std::queue<NodeId> frontier;
  for (NodeId d : out.detectors) {
    dist[d] = 0;
    frontier.push(d);
  }
  while (!frontier.empty()) {
    NodeId u = frontier.front();
    frontier.pop();
    for (NodeId v : g.out_neighbors(u)) {
      if (!curr[v] || dist[v] != SIZE_MAX) continue;
      dist[v] = dist[u] + 1;
      frontier.push(v);
    }
  }
  for (NodeId j = 0; j < n; ++j) out.flags[j] = curr[j] && dist[j] <= lambda;
  return out;
}

struct StackedState {
  Eigen::VectorXd x, y, z, w;
  ActivationVector active;

  static StackedState empty(std::size_t n) {
    const auto m = static_cast<Eigen::Index>(n);
    return {Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m), Eigen::VectorXd::Zero(m),
            ActivationVector(n)};
  }
};

struct StackedInputs {
  Eigen::MatrixXd c;      // C_k
  std::vector<bool> psi;  // arrival triggers at k+1
  std::vector<bool> eta;  // departure flags h_k
  Eigen::VectorXd xhat;   // join estimates at k+1
  ActivationVector next_active;
};

// x+ = (I-Ψ)C(x - γw) + Ψ x̂
// y+ = (I-Ψ)C y + Ψ 1
// z+ = x+ / y+
// w+ = (I-H)(C w - g_k) + g_{k+1}
inline StackedState stacked_step(const StackedState& s, const StackedInputs& in, const GradientField& grad_now,
                                 const GradientField& grad_next, double gamma) {
  const auto n = s.x.size();
  Eigen::VectorXd g_now = Eigen::VectorXd::Zero(n);
  for (Eigen::Index j = 0; j < n; ++j)
    if (s.active[static_cast<NodeId>(j)]) g_now(j) = grad_now(static_cast<std::size_t>(j), s.z(j));

  const Eigen::VectorXd mixed_x = in.c * (s.x - gamma * s.w);
  const Eigen::VectorXd mixed_y = in.c * s.y;
  const Eigen::VectorXd mixed_w = in.c * s.w;

  StackedState next = StackedState::empty(static_cast<std::size_t>(n));
  next.active = in.next_active;
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto id = static_cast<NodeId>(j);
    if (!in.next_active[id]) continue;
    const bool arriving = in.psi[id];
    next.x(j) = arriving ? in.xhat(j) : mixed_x(j);
    next.y(j) = arriving ? 1.0 : mixed_y(j);
    if (!(next.y(j) > 0))
      throw InvariantViolation("stacked form: non-positive y at active " + node_label(id));
    next.z(j) = next.x(j) / next.y(j);
    const double g_next = grad_next(static_cast<std::size_t>(j), next.z(j));
    next.w(j) = in.eta[id] ? g_next : g_next + (mixed_w(j) - g_now(j));
  }
  return next;
}

// Per-cluster Push-DIGing state (local indices 0..m-1).
struct ClusterState {
  Eigen::VectorXd x, y, z, w;
};

// x+ = C(x - γw), y+ = C y, z+ = x+/y+, w+ = C w + g_{k+1} - g_k
inline ClusterState push_diging_step(const ClusterState& s, const Eigen::MatrixXd& c, const GradientField& grad,
                                     double gamma) {
  const auto m = s.x.size();
  ClusterState next;
  next.x = c * (s.x - gamma * s.w);
  next.y = c * s.y;
  next.z.resize(m);
  next.w = c * s.w;
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(next.y(i) > 0)) throw InvariantViolation("push-diging: non-positive y");
    next.z(i) = next.x(i) / next.y(i);
    const double g_now = grad(static_cast<std::size_t>(i), s.z(i));
    const double g_next = grad(static_cast<std::size_t>(i), next.z(i));
    next.w(i) = g_next + (next.w(i) - g_now);
  }
  return next;
}

// |Σ w_j − Σ ∇f_j(z_j)| over `members` of the world.
inline double lemma1_residual(const WorldState& world, std::span<const NodeId> members) {
  double sum_w = 0, sum_g = 0;
  for (NodeId j : members) {
    const auto& s = world.agents.at(j);
    sum_w += s.w;
    sum_g += gradient(s.cost, s.z);
  }
  return std::abs(sum_w - sum_g);
}

// Iterates the stacked form over a whole schedule. Element k is the state at
// round k. Departure flags come from the reachability reference, weights from
// reference_weight_matrix().
inline std::vector<StackedState> simulate_stacked(const Schedule& sched, std::size_t rounds,
                                                  bool disable_reset = false) {
  const std::size_t n = sched.graph.node_count();
  const std::size_t lambda = sched.graph.diameter_bound();
  std::vector<std::optional<CostFunction>> costs(n);

  auto field = [](const std::vector<std::optional<CostFunction>>& cs) -> GradientField {
    return [cs](std::size_t j, double z) { return gradient(*cs[j], z); };
  };

  // Round 0: every initial agent arrives into an empty network.
  StackedState state = StackedState::empty(n);
  StackedInputs in{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n)),
                   std::vector<bool>(n, false), std::vector<bool>(n, false),
                   Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), ActivationVector(n)};
  for (const auto& ev : sched.initial) {
    in.psi[ev.agent] = true;
    in.xhat(static_cast<Eigen::Index>(ev.agent)) = ev.x_hat;
    in.next_active.set(ev.agent, true);
    costs[ev.agent] = ev.cost;
  }
  state = stacked_step(state, in, field(costs), field(costs), sched.gamma);

  std::vector<StackedState> out{state};
  ActivationVector before_prev(n);  // α_{k-1}; nothing is "remaining" at round 0
  for (std::size_t k = 0; k < rounds; ++k) {
    const ActivationVector prev = state.active;
    ActivationVector curr = prev;
    auto next_costs = costs;
    StackedInputs step{Eigen::MatrixXd(), std::vector<bool>(n, false), std::vector<bool>(n, false),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)), ActivationVector(n)};
    for (const auto& ev : sched.events_at(k + 1))
      if (ev.kind == EventKind::leave) curr.set(ev.agent, false);
    for (const auto& ev : sched.events_at(k + 1)) {
      if (ev.kind != EventKind::join) continue;
      curr.set(ev.agent, true);
      step.psi[ev.agent] = true;
      step.xhat(static_cast<Eigen::Index>(ev.agent)) = ev.x_hat;
      next_costs[ev.agent] = ev.cost;
    }
    step.c = reference_weight_matrix(sched.graph, prev, curr);
    if (!disable_reset) step.eta = reference_departure_flags(sched.graph, before_prev, prev, curr, lambda).flags;
    step.next_active = curr;
    state = stacked_step(state, step, field(costs), field(next_costs), sched.gamma);
    out.push_back(state);
    costs = std::move(next_costs);
    before_prev = prev;
  }
  return out;
}

struct Deviation {
  double max_abs = 0;
  std::size_t round = 0;
  NodeId agent = 0;
};

// Largest coordinate-wise |engine - stacked| over x, y, z, w of active agents.
// Throws InvariantViolation if the two disagree on who is active.
inline Deviation max_deviation(const Trace& trace, const std::vector<StackedState>& stacked) {
  if (trace.rounds.size() != stacked.size()) throw InvariantViolation("trace and stacked run differ in length");
  Deviation worst;
  for (std::size_t k = 0; k < stacked.size(); ++k) {
    const auto& rec = trace.rounds[k];
    const auto& st = stacked[k];
    if (!(rec.activation == st.active))
      throw InvariantViolation("activation mismatch at round " + std::to_string(rec.round));
    for (const auto& a : rec.agents) {
      const auto j = static_cast<Eigen::Index>(a.id);
      for (double d : {a.x - st.x(j), a.y - st.y(j), a.z - st.z(j), a.w - st.w(j)}) {
        if (std::abs(d) > worst.max_abs || std::isnan(d)) worst = {std::isnan(d) ? INFINITY : std::abs(d), rec.round, a.id};
      }
    }
  }
  return worst;
}

}  // namespace opengt
