#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <vector>

#include "opengt/agent.hpp"
#include "opengt/topology.hpp"

namespace opengt {

struct PopulationSplit {
  std::vector<NodeId> remaining;  // active at both rounds
  std::vector<NodeId> joining;    // inactive -> active
  std::vector<NodeId> departing;  // active -> inactive
};

inline PopulationSplit partition_population(const ActivationVector& prev, const ActivationVector& curr) {
  if (prev.size() != curr.size())
    throw ConfigError("activation vectors differ in length (" + std::to_string(prev.size()) + " vs " +
                      std::to_string(curr.size()) + ")");
  PopulationSplit split;
  for (NodeId j = 0; j < curr.size(); ++j) {
    if (prev[j] && curr[j]) split.remaining.push_back(j);
    else if (curr[j]) split.joining.push_back(j);
    else if (prev[j]) split.departing.push_back(j);
  }
  return split;
}

// Network state at round k. `plans`, `detectors` and `consensus` describe the
// round that produced this state (they are empty at round 0).
struct WorldState {
  std::size_t round = 0;
  ActivationVector activation;
  ActivationVector prev_activation;
  std::map<NodeId, AgentState> agents;  // active agents only
  ClusterPartition partition;

  std::map<NodeId, PushPlan> plans;     // senders' weights C_{k-1}
  std::set<NodeId> detectors;           // agents with h̄_0 = 1
  std::map<NodeId, bool> consensus;     // h̄ after Λ iterations, every active agent
};

struct AgentRecord {
  NodeId id = 0;
  double x = 0, y = 0, z = 0, w = 0;
  bool h = false;
  bool detector = false;
  bool hbar = false;
};

struct ClusterRecord {
  std::size_t index = 0;
  std::vector<NodeId> members;
  double minimizer = 0;
  double error = 0;            // ||z_q - 1 x*||_2
  double lemma1_residual = 0;  // |sum w - sum grad f(z)|
};

struct RoundRecord {
  std::size_t round = 0;
  ActivationVector activation;
  ClusterPartition partition;
  std::vector<AgentRecord> agents;  // sorted by id
  std::vector<ClusterRecord> clusters;
  std::map<NodeId, PushPlan> plans;

  const AgentRecord* agent(NodeId id) const {
    for (const auto& a : agents)
      if (a.id == id) return &a;
    return nullptr;
  }
};

struct Trace {
  std::size_t node_count = 0;
  std::uint64_t seed = 0;
  double gamma = 0;
  std::size_t lambda = 0;
  std::vector<RoundRecord> rounds;
};

}  // namespace opengt
