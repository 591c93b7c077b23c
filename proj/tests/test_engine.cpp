#include <gtest/gtest.h>

#include "opengt/engine.hpp"
#include "opengt/oracle.hpp"
#include "support/brute_force.hpp"
#include "support/random_scenario.hpp"

using namespace opengt;

namespace {

ActivationVector bits(std::initializer_list<int> b) {
  std::vector<bool> v;
  for (int x : b) v.push_back(x != 0);
  return ActivationVector(v);
}

Schedule single_agent(double x_hat, double a, double b, double gamma, std::size_t rounds) {
  Schedule s{MaximalDigraph(1, {}), gamma, rounds, 0, {}, {}};
  s.initial.push_back({0, 0, EventKind::join, x_hat, CostFunction::quadratic(a, b)});
  return s;
}

}  // namespace

TEST(PartitionPopulation, OneDeparture) {
  const auto p = partition_population(ActivationVector(7, true), bits({1, 1, 1, 0, 1, 1, 1}));
  EXPECT_EQ(p.remaining.size(), 6u);
  EXPECT_TRUE(p.joining.empty());
  EXPECT_EQ(p.departing, (std::vector<NodeId>{3}));
}

TEST(PartitionPopulation, Identity) {
  const auto a = bits({1, 0, 1});
  const auto p = partition_population(a, a);
  EXPECT_TRUE(p.joining.empty());
  EXPECT_TRUE(p.departing.empty());
  EXPECT_EQ(p.remaining, (std::vector<NodeId>{0, 2}));
}

TEST(PartitionPopulation, EveryoneArrives) {
  const auto p = partition_population(ActivationVector(4), ActivationVector(4, true));
  EXPECT_EQ(p.joining.size(), 4u);
  EXPECT_TRUE(p.remaining.empty());
  EXPECT_TRUE(p.departing.empty());
}

TEST(PartitionPopulation, LengthMismatch) {
  EXPECT_THROW(partition_population(ActivationVector(3), ActivationVector(4)), ConfigError);
}

TEST(RunRound, SingleAgentIsGradientDescent) {
  const double gamma = 0.1;
  const auto trace = run(single_agent(2, 1, 5, gamma, 100));
  double x = 2;
  for (const auto& rec : trace.rounds) {
    ASSERT_EQ(rec.agents.size(), 1u);
    EXPECT_EQ(rec.agents[0].x, x) << "round " << rec.round;
    EXPECT_EQ(rec.agents[0].y, 1);
    x = x - gamma * (x - 5);
  }
  EXPECT_DOUBLE_EQ(trace.rounds[1].agents[0].x, 2.3);
}

TEST(RunRound, StableWorldUsesOutDegreeWeightsAndNoResets) {
  const auto sched = resolve_schedule(default_scenario());
  const auto trace = run(sched, {}, 20);
  const auto& g = sched.graph;
  for (std::size_t k = 1; k < trace.rounds.size(); ++k) {
    const auto& rec = trace.rounds[k];
    for (const auto& a : rec.agents) {
      EXPECT_FALSE(a.h);
      EXPECT_FALSE(a.detector);
      EXPECT_EQ(rec.plans.at(a.id).weight, 1.0 / (1.0 + static_cast<double>(g.out_neighbors(a.id).size())));
    }
  }
}

TEST(RunRound, V4DepartureDetectedAndFlooded) {
  const auto sched = resolve_schedule(default_scenario());
  const auto trace = run(sched, {}, 81);
  const auto& rec = trace.rounds.at(81);
  ASSERT_FALSE(rec.activation[3]);

  std::set<NodeId> detectors;
  for (const auto& a : rec.agents)
    if (a.detector) detectors.insert(a.id);
  EXPECT_EQ(detectors, (std::set<NodeId>{1, 6}));  // v2 and v7 feed v4

  // Brute force: flag set iff some detector reaches the agent within Λ hops.
  const auto d = opengt::testing::all_pairs_hops(7, sched.graph.edges(), rec.activation.active_nodes());
  for (const auto& a : rec.agents) {
    bool reached = false;
    for (NodeId det : detectors) reached = reached || d[det][a.id] <= trace.lambda;
    EXPECT_EQ(a.hbar, reached) << node_label(a.id);
    EXPECT_TRUE(a.h) << node_label(a.id);  // both clusters contain a detector
  }
}

TEST(RunRound, InconsistentEventsAreConfigErrors) {
  const auto sched = resolve_schedule(default_scenario());
  const Engine engine(sched.graph, sched.gamma);
  const auto world = engine.initial_world(sched.initial);
  const std::vector<ChurnEvent> join_active{{1, 0, EventKind::join, 1.0, CostFunction::quadratic(1, 1)}};
  EXPECT_THROW(engine.run_round(world, join_active), ConfigError);

  auto after = engine.run_round(world, std::vector<ChurnEvent>{{1, 0, EventKind::leave, 0, std::nullopt}});
  const std::vector<ChurnEvent> leave_inactive{{2, 0, EventKind::leave, 0, std::nullopt}};
  EXPECT_THROW(engine.run_round(after, leave_inactive), ConfigError);
}

TEST(Run, DefaultScenarioFirstWindowIsOneClusterAtFour) {
  const auto trace = run(default_scenario());
  for (std::size_t k = 1; k <= 80; ++k) {
    const auto& rec = trace.rounds[k];
    ASSERT_EQ(rec.clusters.size(), 1u) << "round " << k;
    EXPECT_DOUBLE_EQ(rec.clusters[0].minimizer, 4.0);
  }
  // Strictly decreasing error after a short transient.
  for (std::size_t k = 11; k <= 80; ++k)
    EXPECT_LT(trace.rounds[k].clusters[0].error, trace.rounds[k - 1].clusters[0].error) << "round " << k;
}

// Golden value for seed 7 and auto step 0.05. The contraction rate at this step
// size keeps the round-80 error near 6e-2, far above 1e-6.
TEST(Run, DefaultScenarioRound80ErrorGolden) {
  const auto trace = run(default_scenario());
  EXPECT_NEAR(trace.rounds[80].clusters[0].error, 0.0574, 5e-4);
}

TEST(Run, DefaultScenarioSplitsAfterV4Leaves) {
  const auto trace = run(default_scenario());
  const auto& rec = trace.rounds[81];
  ASSERT_EQ(rec.clusters.size(), 2u);
  EXPECT_DOUBLE_EQ(rec.clusters[0].minimizer, 2.0);
  EXPECT_DOUBLE_EQ(rec.clusters[1].minimizer, 6.0);
}

TEST(Run, SingleAgentTraceIsCentralizedDescent) {
  const auto trace = run(single_agent(-3, 2, 1, 0.05, 50));
  double x = -3;
  for (const auto& rec : trace.rounds) {
    EXPECT_EQ(rec.agents[0].z, x);
    x -= 0.05 * 2 * (x - 1);
  }
}

TEST(Run, StoredZIsExactlyXOverY) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto trace = run(opengt::testing::random_scenario(seed));
    for (const auto& rec : trace.rounds)
      for (const auto& a : rec.agents) {
        EXPECT_EQ(a.z, a.x / a.y);
        EXPECT_GT(a.y, 0);
      }
  }
}

// Between churn events the total push-sum weight of a cluster is conserved.
TEST(Run, WeightMassConservedInStableWindows) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto sched = resolve_schedule(opengt::testing::random_scenario(seed));
    const auto trace = run(sched);
    for (std::size_t k = 2; k < trace.rounds.size(); ++k) {
      if (!sched.events_at(k).empty() || !sched.events_at(k - 1).empty()) continue;
      const auto& prev = trace.rounds[k - 1];
      const auto& rec = trace.rounds[k];
      for (const auto& cl : rec.clusters) {
        double before = 0, after = 0;
        for (NodeId j : cl.members) {
          before += prev.agent(j)->y;
          after += rec.agent(j)->y;
        }
        EXPECT_NEAR(before, after, 1e-9) << "seed " << seed << " round " << k;
      }
    }
  }
}

TEST(Run, DetectionMatchesReachabilityOnRandomScenarios) {
  for (std::uint64_t seed = 100; seed < 130; ++seed) {
    const auto sched = resolve_schedule(opengt::testing::random_scenario(seed));
    const auto trace = run(sched);
    for (std::size_t k = 1; k < trace.rounds.size(); ++k) {
      const auto& rec = trace.rounds[k];
      const auto before_prev = k >= 2 ? trace.rounds[k - 2].activation : ActivationVector(sched.graph.node_count());
      const auto ref = reference_departure_flags(sched.graph, before_prev, trace.rounds[k - 1].activation,
                                                 rec.activation, trace.lambda);
      for (const auto& a : rec.agents) {
        EXPECT_EQ(a.detector, ref.detectors.count(a.id) > 0) << "seed " << seed << " round " << k;
        EXPECT_EQ(a.hbar, ref.flags[a.id]) << "seed " << seed << " round " << k;
      }
    }
  }
}

TEST(Run, RejoinWithNewObjectiveMovesMinimizer) {
  Scenario s = default_scenario();
  s.events.back().cost = CostSpec{"quadratic", 1.0, 10.0, std::nullopt};  // v4 rejoins at 310 with b=10
  const auto trace = run(s);
  const auto& rec = trace.rounds[311];
  ASSERT_EQ(rec.clusters.size(), 1u);
  // Members v1,v2,v3,v4,v6,v7 (v5 is still away): (1+2+3+10+6+7)/6.
  EXPECT_DOUBLE_EQ(rec.clusters[0].minimizer, 29.0 / 6.0);
  EXPECT_LE(rec.clusters[0].lemma1_residual, 1e-9);
}
