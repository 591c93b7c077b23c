#include <gtest/gtest.h>

#include <numeric>
#include <random>

#include "opengt/agent.hpp"
#include "opengt/oracle.hpp"
#include "support/brute_force.hpp"

using namespace opengt;

namespace {

constexpr NodeId v(std::size_t one_based) { return one_based - 1; }

}  // namespace

TEST(InitArrival, StartsAtOwnMinimizer) {
  const auto s = init_arrival(v(1), 5, CostFunction::quadratic(1, 5), 0.1);
  EXPECT_EQ(s.x, 5);
  EXPECT_EQ(s.y, 1);
  EXPECT_EQ(s.w, 0);
  EXPECT_FALSE(s.h);
  EXPECT_EQ(s.z, 5);
  EXPECT_TRUE(s.prev_acks.empty());
}

TEST(InitArrival, TrackerIsLocalGradient) {
  const auto s = init_arrival(v(1), 2, CostFunction::quadratic(1, 5), 0.1);
  EXPECT_EQ(s.x, 2);
  EXPECT_EQ(s.z, 2);
  EXPECT_EQ(s.w, -3);
  EXPECT_EQ(init_arrival(v(1), 1.5, CostFunction::quadratic(2, 1), 0.1).w, 1.0);
}

TEST(InitArrival, RejectsNonPositiveStep) {
  EXPECT_THROW(init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0), ConfigError);
}

TEST(AssignPushWeights, OneOfTwoAcks) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  const std::vector<NodeId> out{v(2), v(4)};
  const auto plan = assign_push_weights(s, out, {v(2)});
  EXPECT_EQ(plan.out_degree, 1u);
  EXPECT_EQ(plan.weight, 0.5);
  EXPECT_EQ(plan.active_out, (std::vector<NodeId>{v(2)}));
  EXPECT_EQ(s.prev_acks, (AckMap{{v(2), true}, {v(4), false}}));
}

TEST(AssignPushWeights, NoAcksKeepsEverythingLocal) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  const std::vector<NodeId> out{v(2), v(4)};
  const auto plan = assign_push_weights(s, out, {});
  EXPECT_EQ(plan.out_degree, 0u);
  EXPECT_EQ(plan.weight, 1.0);
  EXPECT_TRUE(plan.active_out.empty());
}

TEST(AssignPushWeights, ThreeAcks) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  const std::vector<NodeId> out{v(2), v(3), v(4)};
  EXPECT_EQ(assign_push_weights(s, out, {v(2), v(3), v(4)}).weight, 0.25);
}

TEST(AssignPushWeights, AckFromStrangerIsInvariantViolation) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  const std::vector<NodeId> out{v(2)};
  EXPECT_THROW(assign_push_weights(s, out, {v(5)}), InvariantViolation);
}

TEST(DetectDepartures, Examples) {
  EXPECT_TRUE(detect_departures({{v(2), true}}, {{v(2), false}}));
  EXPECT_FALSE(detect_departures({{v(2), false}}, {{v(2), true}}));
  EXPECT_FALSE(detect_departures({{v(2), true}, {v(4), true}}, {{v(2), true}, {v(4), true}}));
  EXPECT_FALSE(detect_departures({}, {{v(2), false}}));  // fresh joiner
}

TEST(MaxConsensusStep, Examples) {
  const std::vector<DetectionMessage> mixed{{v(2), false}, {v(3), true}};
  const std::vector<DetectionMessage> zeros{{v(2), false}, {v(3), false}};
  EXPECT_TRUE(max_consensus_step(false, mixed));
  EXPECT_TRUE(max_consensus_step(true, {}));
  EXPECT_FALSE(max_consensus_step(false, zeros));
}

TEST(MakeOutbound, ScalesByWeight) {
  auto s = init_arrival(v(1), 2, CostFunction::quadratic(1, 5), 0.1);
  const std::vector<NodeId> out{v(2)};
  const auto msgs = make_outbound(s, 0.5, out);
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_DOUBLE_EQ(msgs[0].sx, 1.15);
  EXPECT_DOUBLE_EQ(msgs[0].sy, 0.5);
  EXPECT_DOUBLE_EQ(msgs[0].sw, -1.5);
  EXPECT_EQ(msgs[0].to, v(2));
}

TEST(MakeOutbound, EmptyActiveOut) {
  auto s = init_arrival(v(1), 2, CostFunction::quadratic(1, 5), 0.1);
  EXPECT_TRUE(make_outbound(s, 1.0, {}).empty());
}

TEST(MakeOutbound, TwoReceivers) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  const std::vector<NodeId> out{v(2), v(3)};
  const auto msgs = make_outbound(s, 1.0 / 3, out);
  ASSERT_EQ(msgs.size(), 2u);
  for (const auto& m : msgs) {
    EXPECT_EQ(m.sx, 0);
    EXPECT_EQ(m.sy, 1.0 / 3);
    EXPECT_EQ(m.sw, 0);
  }
}

TEST(MakeOutbound, RejectsWeightOutsideUnitInterval) {
  auto s = init_arrival(v(1), 0, CostFunction::quadratic(1, 0), 0.1);
  EXPECT_THROW(make_outbound(s, 0, {}), InvariantViolation);
  EXPECT_THROW(make_outbound(s, 1.5, {}), InvariantViolation);
}

TEST(ApplyUpdate, TrivialClusterIsGradientDescent) {
  const auto cost = CostFunction::quadratic(1, 5);
  const auto s = init_arrival(v(1), 2, cost, 0.1);
  const auto next = apply_update(s, self_contribution(s, 1.0), {}, false, cost);
  EXPECT_DOUBLE_EQ(next.x, 2.3);
  EXPECT_EQ(next.y, 1);
  EXPECT_DOUBLE_EQ(next.z, 2.3);
  EXPECT_DOUBLE_EQ(next.w, -2.7);
  EXPECT_FALSE(next.h);
}

TEST(ApplyUpdate, ResetTrivialCluster) {
  const auto cost = CostFunction::quadratic(1, 5);
  const auto s = init_arrival(v(1), 2, cost, 0.1);
  const auto next = apply_update(s, self_contribution(s, 1.0), {}, true, cost);
  EXPECT_DOUBLE_EQ(next.w, -2.7);
  EXPECT_TRUE(next.h);
}

TEST(ApplyUpdate, ZEqualsXOverYExactly) {
  const auto cost = CostFunction::quadratic(1, 5);
  const auto s = init_arrival(v(1), 2, cost, 0.1);
  const std::vector<DataMessage> in{{v(2), v(1), 0.7, 0.3, 1.1, false}};
  const auto next = apply_update(s, self_contribution(s, 0.5), in, false, cost);
  EXPECT_EQ(next.z, next.x / next.y);
}

TEST(ApplyUpdate, NonPositiveWeightIsInvariantViolation) {
  const auto cost = CostFunction::quadratic(1, 5);
  const auto s = init_arrival(v(1), 2, cost, 0.1);
  EXPECT_THROW(apply_update(s, {0, 0, 0}, {}, false, cost), InvariantViolation);
}

// With the reset set, inbound trackers cannot influence w+.
TEST(ApplyUpdate, ResetIgnoresAdversarialTrackers) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wild(-1e6, 1e6), pos(0.01, 2);
  const auto cost = CostFunction::quadratic(1.5, -2);
  for (int trial = 0; trial < 500; ++trial) {
    auto s = init_arrival(v(1), wild(rng) * 1e-3, cost, 0.05);
    s.w = wild(rng);
    std::vector<DataMessage> in;
    for (int m = 0; m < 3; ++m) in.push_back({static_cast<NodeId>(m + 1), v(1), wild(rng), pos(rng), wild(rng), false});
    const auto own = self_contribution(s, 0.25);
    const auto next = apply_update(s, own, in, true, cost);
    EXPECT_EQ(next.w, gradient(cost, next.z));
  }
}

TEST(ApplyUpdate, SingleAgentFollowsGradientDescentExactly) {
  const auto cost = CostFunction::quadratic(2, 3);
  const double gamma = 0.05;
  auto s = init_arrival(v(1), -4, cost, gamma);
  double x = -4;
  for (int k = 0; k < 200; ++k) {
    s = apply_update(s, self_contribution(s, 1.0), {}, false, cost);
    x = x - gamma * gradient(cost, x);
    EXPECT_EQ(s.x, x) << "k=" << k;
    EXPECT_EQ(s.y, 1);
  }
}

// Two agents exchanging both ways with weight 1/2 agree with the stacked form.
TEST(ApplyUpdate, TwoAgentClusterMatchesStackedForm) {
  const double gamma = 0.1;
  const std::vector<CostFunction> costs{CostFunction::quadratic(1, 0), CostFunction::quadratic(1, 4)};
  std::vector<AgentState> agents{init_arrival(v(1), 0, costs[0], gamma), init_arrival(v(2), 4, costs[1], gamma)};

  StackedState st = StackedState::empty(2);
  st.active = ActivationVector(2, true);
  for (Eigen::Index j = 0; j < 2; ++j) {
    st.x(j) = agents[static_cast<std::size_t>(j)].x;
    st.y(j) = 1;
    st.z(j) = st.x(j);
    st.w(j) = agents[static_cast<std::size_t>(j)].w;
  }
  StackedInputs in{Eigen::MatrixXd::Constant(2, 2, 0.5), {false, false}, {false, false}, Eigen::VectorXd::Zero(2),
                   ActivationVector(2, true)};
  const GradientField grad = [&](std::size_t j, double z) { return gradient(costs[j], z); };

  for (int k = 0; k < 50; ++k) {
    const auto m0 = make_outbound(agents[0], 0.5, std::vector<NodeId>{v(2)});
    const auto m1 = make_outbound(agents[1], 0.5, std::vector<NodeId>{v(1)});
    const auto a0 = apply_update(agents[0], self_contribution(agents[0], 0.5), m1, false, costs[0]);
    const auto a1 = apply_update(agents[1], self_contribution(agents[1], 0.5), m0, false, costs[1]);
    agents = {a0, a1};
    st = stacked_step(st, in, grad, grad, gamma);
    for (Eigen::Index j = 0; j < 2; ++j) {
      const auto& a = agents[static_cast<std::size_t>(j)];
      EXPECT_NEAR(a.x, st.x(j), 1e-12);
      EXPECT_NEAR(a.y, st.y(j), 1e-12);
      EXPECT_NEAR(a.w, st.w(j), 1e-12);
    }
    if (k == 0) {
      // Symmetric start: x+ = 2 - gamma * (mixed w) = 2 - 0.1 * 0 for both.
      EXPECT_DOUBLE_EQ(agents[0].x, 2.0);
      EXPECT_DOUBLE_EQ(agents[1].x, 2.0);
    }
  }
  EXPECT_NEAR(agents[0].z, 2.0, 1e-9);
}

// Λ rounds of max-consensus over a strongly connected cluster with diameter <= Λ
// reach exactly the nodes a brute-force reachability search finds.
TEST(MaxConsensusStep, CompletenessAgainstReachability) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> unit(0, 1);
  for (int trial = 0; trial < 300; ++trial) {
    const std::size_t n = 1 + trial % 8;
    std::vector<NodeId> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    EdgeSet edges;
    for (std::size_t i = 0; n > 1 && i < n; ++i) edges.insert({perm[i], perm[(i + 1) % n]});
    for (NodeId i = 0; i < n; ++i)
      for (NodeId j = 0; j < n; ++j)
        if (i != j && unit(rng) < 0.2) edges.insert({i, j});
    std::vector<NodeId> nodes(n);
    std::iota(nodes.begin(), nodes.end(), 0);
    const std::size_t lambda = std::max<std::size_t>(1, opengt::testing::brute_diameter(n, edges, nodes));

    std::vector<bool> bits(n);
    const bool none = trial % 5 == 0;
    for (NodeId j = 0; j < n; ++j) bits[j] = !none && unit(rng) < 0.2;
    const bool any = std::find(bits.begin(), bits.end(), true) != bits.end();

    for (std::size_t it = 0; it < lambda; ++it) {
      std::vector<bool> next(n);
      for (NodeId j = 0; j < n; ++j) {
        std::vector<DetectionMessage> inbox;
        for (const auto& e : edges)
          if (e.to == j) inbox.push_back({e.from, bits[e.from]});
        next[j] = max_consensus_step(bits[j], inbox);
      }
      bits = next;
    }
    for (NodeId j = 0; j < n; ++j) EXPECT_EQ(bits[j], any) << "trial " << trial << " node " << j;
  }
}
