#pragma once

// Experiment description: maximal graph, per-agent costs, initial activation
// and the churn schedule. Validation collects every problem before failing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "opengt/costs.hpp"
#include "opengt/errors.hpp"
#include "opengt/topology.hpp"

namespace opengt {

// Step size rule used when a scenario asks for "auto".
inline constexpr double kAutoStepNumerator = 0.05;

// Bounds of the uniform draw for x_hat = "random".
inline constexpr double kRandomXHatLow = 1.0;
inline constexpr double kRandomXHatHigh = 5.0;

struct CostSpec {
  std::string kind = "quadratic";  // "quadratic" | "logcosh"
  double a = 1.0;
  double b = 0.0;
  std::optional<double> mu;  // declared modulus for non-quadratic kinds
};

inline CostFunction make_cost(const CostSpec& spec, std::size_t valid_from = 0) {
  if (spec.kind == "quadratic") return CostFunction::quadratic(spec.a, spec.b, valid_from);
  if (spec.kind == "logcosh") {
    auto c = logcosh_cost(spec.a, spec.b, valid_from);
    if (spec.mu) {
      auto fn = std::get<Custom>(c.kind());
      fn.mu = spec.mu;
      c = CostFunction::custom(std::move(fn), c.lipschitz(), valid_from);
    }
    return c;
  }
  throw ConfigError("unknown cost kind '" + spec.kind + "'");
}

struct AgentSpec {
  NodeId id = 0;
  CostSpec cost;
  bool active = true;
  std::optional<double> x_hat;  // nullopt: uniform on [1,5]
};

enum class EventKind { join, leave };

struct EventSpec {
  std::size_t round = 1;
  NodeId agent = 0;
  EventKind kind = EventKind::leave;
  std::optional<double> x_hat;     // join only; nullopt: random
  std::optional<CostSpec> cost;    // join only; nullopt: the agent's base cost
};

struct Validators {
  std::optional<std::size_t> beta;
  bool gradient_check = true;
};

struct Scenario {
  std::size_t nodes = 0;
  std::vector<Edge> edges;
  std::optional<std::size_t> diameter_bound;  // filled by finalize()
  std::optional<double> gamma;                // nullopt before finalize() means "auto"
  bool gamma_auto = false;
  std::size_t rounds = 0;
  std::uint64_t seed = 0;
  std::vector<AgentSpec> agents;  // one per node, any order
  std::vector<EventSpec> events;
  Validators validators;
};

// Resolved churn event: random draws done, cost built.
struct ChurnEvent {
  std::size_t round = 0;
  NodeId agent = 0;
  EventKind kind = EventKind::leave;
  double x_hat = 0;
  std::optional<CostFunction> cost;  // set for joins
};

// Everything the engine needs, with all randomness already drawn.
struct Schedule {
  MaximalDigraph graph;
  double gamma;
  std::size_t rounds;
  std::uint64_t seed;
  std::vector<ChurnEvent> initial;  // round-0 arrivals
  std::map<std::size_t, std::vector<ChurnEvent>> events;

  std::span<const ChurnEvent> events_at(std::size_t round) const {
    auto it = events.find(round);
    if (it == events.end()) return {};
    return it->second;
  }

  // Round of the last churn event, 0 if none.
  std::size_t last_event_round() const { return events.empty() ? 0 : events.rbegin()->first; }
};

namespace detail {

// Events ordered by round, leaves before joins, then agent id.
inline std::vector<std::size_t> event_order(const std::vector<EventSpec>& events) {
  std::vector<std::size_t> order(events.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t l, std::size_t r) {
    const auto& a = events[l];
    const auto& b = events[r];
    if (a.round != b.round) return a.round < b.round;
    if (a.kind != b.kind) return a.kind == EventKind::leave;
    return a.agent < b.agent;
  });
  return order;
}

inline void check_cost(const CostSpec& spec, const std::string& field, std::vector<std::string>& diags) {
  if (spec.kind != "quadratic" && spec.kind != "logcosh") {
    diags.push_back(field + ".kind: unknown cost kind '" + spec.kind + "'");
    return;
  }
  if (!(spec.a > 0) || !std::isfinite(spec.a)) diags.push_back(field + ".a: must be a positive finite number");
  if (!std::isfinite(spec.b)) diags.push_back(field + ".b: must be finite");
  if (spec.mu && !(*spec.mu > 0)) diags.push_back(field + ".mu: must be positive when declared");
}

}  // namespace detail

struct ValidationReport {
  std::vector<std::string> errors;
  std::vector<std::string> warnings;
};

// Activation vector at every round 0..rounds, assuming a valid event list.
inline std::vector<ActivationVector> activation_sequence(const Scenario& s) {
  ActivationVector a(s.nodes);
  for (const auto& ag : s.agents)
    if (ag.id < s.nodes && ag.active) a.set(ag.id, true);
  std::map<std::size_t, std::vector<const EventSpec*>> by_round;
  for (std::size_t i : detail::event_order(s.events)) by_round[s.events[i].round].push_back(&s.events[i]);
  std::vector<ActivationVector> seq{a};
  for (std::size_t k = 1; k <= s.rounds; ++k) {
    if (auto it = by_round.find(k); it != by_round.end())
      for (const auto* ev : it->second)
        if (ev->agent < s.nodes) a.set(ev->agent, ev->kind == EventKind::join);
    seq.push_back(a);
  }
  return seq;
}

// Checks everything and returns all problems found. Does not throw.
inline ValidationReport validate(const Scenario& s) {
  ValidationReport report;
  auto& diags = report.errors;
  const std::size_t n = s.nodes;

  if (n == 0) diags.push_back("graph.nodes: must be at least 1");
  bool edges_ok = true;
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    const auto& e = s.edges[i];
    const std::string field = "graph.edges[" + std::to_string(i) + "]";
    if (e.from >= n || e.to >= n) {
      diags.push_back(field + ": endpoint out of range 1.." + std::to_string(n));
      edges_ok = false;
    } else if (e.from == e.to) {
      diags.push_back(field + ": self-loop on " + node_label(e.from));
      edges_ok = false;
    }
  }
  if (n > 0 && edges_ok) {
    try {
      MaximalDigraph g(n, s.edges, s.diameter_bound);
    } catch (const ConfigError& e) {
      diags.push_back(std::string("graph.diameter_bound: ") + e.what());
    }
  }

  if (s.gamma && (!(*s.gamma > 0) || !std::isfinite(*s.gamma))) diags.push_back("gamma: must be positive and finite");
  if (s.rounds == 0) diags.push_back("rounds: must be at least 1");

  std::set<NodeId> seen;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const auto& ag = s.agents[i];
    const std::string field = "agents[" + std::to_string(i) + "]";
    if (ag.id >= n) {
      diags.push_back(field + ".id: " + std::to_string(ag.id + 1) + " out of range 1.." + std::to_string(n));
      continue;
    }
    if (!seen.insert(ag.id).second) diags.push_back(field + ".id: duplicate agent " + node_label(ag.id));
    detail::check_cost(ag.cost, field + ".cost", diags);
    if (ag.x_hat && !std::isfinite(*ag.x_hat)) diags.push_back(field + ".x_hat: must be finite");
  }
  for (NodeId j = 0; j < n; ++j)
    if (!seen.count(j)) diags.push_back("agents: no entry for " + node_label(j));

  // Replay events against the activation state.
  std::vector<bool> active(n, false);
  for (const auto& ag : s.agents)
    if (ag.id < n && ag.active) active[ag.id] = true;
  std::map<std::pair<std::size_t, NodeId>, std::size_t> touched;
  for (std::size_t i : detail::event_order(s.events)) {
    const auto& ev = s.events[i];
    const std::string field = "events[" + std::to_string(i) + "]";
    if (ev.round == 0 || ev.round > s.rounds) {
      diags.push_back(field + ".round: " + std::to_string(ev.round) + " outside 1.." + std::to_string(s.rounds));
      continue;
    }
    if (ev.agent >= n) {
      diags.push_back(field + ".agent: " + std::to_string(ev.agent + 1) + " out of range 1.." + std::to_string(n));
      continue;
    }
    auto [it, fresh] = touched.emplace(std::make_pair(ev.round, ev.agent), i);
    if (!fresh) {
      diags.push_back(field + ".agent: " + node_label(ev.agent) + " already has an event at round " +
                      std::to_string(ev.round) + " (events[" + std::to_string(it->second) + "])");
      continue;
    }
    if (ev.kind == EventKind::leave) {
      if (!active[ev.agent])
        diags.push_back(field + ".kind: leave of " + node_label(ev.agent) + " at round " + std::to_string(ev.round) +
                        " but the agent is inactive");
      active[ev.agent] = false;
    } else {
      if (active[ev.agent])
        diags.push_back(field + ".kind: join of " + node_label(ev.agent) + " at round " + std::to_string(ev.round) +
                        " but the agent is already active");
      active[ev.agent] = true;
      if (ev.cost) detail::check_cost(*ev.cost, field + ".cost", diags);
      if (ev.x_hat && !std::isfinite(*ev.x_hat)) diags.push_back(field + ".x_hat: must be finite");
    }
  }

  if (s.validators.beta && *s.validators.beta == 0) diags.push_back("validators.beta: must be at least 1");

  if (!diags.empty()) return report;

  // Checks below need a structurally valid scenario.
  std::vector<CostSpec> all_costs;
  for (const auto& ag : s.agents) all_costs.push_back(ag.cost);
  for (const auto& ev : s.events)
    if (ev.cost) all_costs.push_back(*ev.cost);
  std::mt19937_64 fd_rng(s.seed ^ 0x9e3779b97f4a7c15ULL);
  for (std::size_t i = 0; i < all_costs.size(); ++i) {
    const auto& spec = all_costs[i];
    if (spec.kind == "quadratic") continue;
    if (!spec.mu)
      report.warnings.push_back("cost '" + spec.kind + "' declares no mu; strong convexity of cluster sums is assumed");
    if (s.validators.gradient_check) {
      const auto check = check_gradient(make_cost(spec), fd_rng);
      if (!check.ok)
        diags.push_back("validators.gradient_check: gradient of '" + spec.kind + "' disagrees with finite differences (relative error " +
                        std::to_string(check.worst_relative_error) + " at x=" + std::to_string(check.worst_x) + ")");
    }
  }

  // An active edge between two clusters drains push-sum weight from the upstream
  // cluster without bound, so every round's active graph must split cleanly.
  {
    const MaximalDigraph g(n, s.edges, s.diameter_bound);
    const auto acts = activation_sequence(s);
    std::map<std::size_t, std::size_t> first_event;  // round -> index of an event at that round
    for (std::size_t i = 0; i < s.events.size(); ++i) first_event.emplace(s.events[i].round, i);
    for (std::size_t k = 0; k < acts.size(); ++k) {
      if (k > 0 && !first_event.count(k)) continue;
      const auto part = clusters(g, acts[k]);
      for (const auto& e : active_subgraph(g, acts[k])) {
        if (part.cluster_of.at(e.from) == part.cluster_of.at(e.to)) continue;
        const std::string link = node_label(e.from) + "->" + node_label(e.to);
        diags.push_back(k == 0 ? "agents: initial active graph has a one-way link " + link + " between clusters"
                               : "events[" + std::to_string(first_event.at(k)) + "]: after round " + std::to_string(k) +
                                     " the active graph has a one-way link " + link + " between clusters");
        break;
      }
    }
  }

  if (s.validators.beta) {
    const std::size_t beta = *s.validators.beta;
    const MaximalDigraph g(n, s.edges, s.diameter_bound);
    const auto acts = activation_sequence(s);
    std::vector<EdgeSet> edges;
    std::vector<ClusterPartition> parts;
    for (const auto& a : acts) {
      edges.push_back(active_subgraph(g, a));
      parts.push_back(clusters(edges.back(), a.active_nodes()));
    }
    // A cluster is checked over a window only while its membership is unchanged.
    for (std::size_t start = 0; start + beta <= acts.size(); start += beta) {
      for (const auto& cl : parts[start].clusters) {
        bool persists = true;
        for (std::size_t t = start + 1; t < start + beta && persists; ++t)
          persists = std::find(parts[t].clusters.begin(), parts[t].clusters.end(), cl) != parts[t].clusters.end();
        if (!persists) continue;
        std::span<const EdgeSet> window(edges.data() + start, beta);
        if (!is_beta_strongly_connected(window, beta, cl)) {
          diags.push_back("validators.beta: cluster starting with " + node_label(cl.front()) +
                          " is not strongly connected over rounds " + std::to_string(start) + ".." +
                          std::to_string(start + beta - 1));
        }
      }
    }
  }
  return report;
}

inline double auto_step_size(const Scenario& s) {
  double max_l = 0;
  for (const auto& ag : s.agents) max_l = std::max(max_l, make_cost(ag.cost).lipschitz());
  for (const auto& ev : s.events)
    if (ev.cost) max_l = std::max(max_l, make_cost(*ev.cost).lipschitz());
  if (!(max_l > 0)) throw ConfigError("cannot derive step size: no agent costs");
  return kAutoStepNumerator / max_l;
}

// Validates, then fills diameter_bound and gamma. Throws ScenarioError listing
// every problem. Warnings are appended to `warnings` when given.
inline Scenario finalize(Scenario s, std::vector<std::string>* warnings = nullptr) {
  auto report = validate(s);
  if (!report.errors.empty()) throw ScenarioError(std::move(report.errors));
  if (warnings) warnings->insert(warnings->end(), report.warnings.begin(), report.warnings.end());
  const MaximalDigraph g(s.nodes, s.edges, s.diameter_bound);
  s.diameter_bound = g.diameter_bound();
  if (!s.gamma) {
    s.gamma = auto_step_size(s);
    s.gamma_auto = true;
  }
  return s;
}

// Draws every random x_hat from one generator seeded with `seed`: initial agents
// in id order first, then join events in schedule order.
inline Schedule resolve_schedule(const Scenario& raw, std::optional<std::uint64_t> seed_override = std::nullopt) {
  const Scenario s = (raw.gamma && raw.diameter_bound) ? raw : finalize(raw);
  if (auto report = validate(s); !report.errors.empty()) throw ScenarioError(std::move(report.errors));

  const std::uint64_t seed = seed_override.value_or(s.seed);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> draw(kRandomXHatLow, kRandomXHatHigh);

  Schedule sched{MaximalDigraph(s.nodes, s.edges, s.diameter_bound), *s.gamma, s.rounds, seed, {}, {}};

  std::vector<const AgentSpec*> by_id(s.nodes, nullptr);
  for (const auto& ag : s.agents) by_id[ag.id] = &ag;
  for (NodeId j = 0; j < s.nodes; ++j) {
    const auto& ag = *by_id[j];
    if (!ag.active) continue;
    const double x_hat = ag.x_hat ? *ag.x_hat : draw(rng);
    sched.initial.push_back({0, j, EventKind::join, x_hat, make_cost(ag.cost, 0)});
  }
  for (std::size_t i : detail::event_order(s.events)) {
    const auto& ev = s.events[i];
    ChurnEvent out{ev.round, ev.agent, ev.kind, 0, std::nullopt};
    if (ev.kind == EventKind::join) {
      out.x_hat = ev.x_hat ? *ev.x_hat : draw(rng);
      out.cost = make_cost(ev.cost.value_or(by_id[ev.agent]->cost), ev.round);
    }
    sched.events[ev.round].push_back(std::move(out));
  }
  return sched;
}

// The shipped seven-agent experiment. f_j(x) = (x - j)^2 / 2; only v3, v4 and
// v5 churn. Event rounds between 80 and 310 are illustrative.
inline Scenario default_scenario() {
  Scenario s;
  s.nodes = 7;
  for (const auto& e : default_digraph().edges()) s.edges.push_back(e);
  s.rounds = 420;
  s.seed = 7;
  for (NodeId j = 0; j < 7; ++j) s.agents.push_back({j, CostSpec{"quadratic", 1.0, double(j + 1), std::nullopt}, true, std::nullopt});
  auto leave = [](std::size_t k, std::size_t v) { return EventSpec{k, v - 1, EventKind::leave, std::nullopt, std::nullopt}; };
  auto join = [](std::size_t k, std::size_t v) { return EventSpec{k, v - 1, EventKind::join, std::nullopt, std::nullopt}; };
  s.events = {leave(81, 4), leave(150, 3), leave(200, 5), join(250, 3), join(310, 4)};
  s.validators.beta = 1;
  s.validators.gradient_check = true;
  return s;
}

}  // namespace opengt
