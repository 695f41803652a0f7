#include <gtest/gtest.h>

#include <random>

#include "test_support.hpp"

using namespace gmaa;
using gmaa::testing::constant_policy;
using gmaa::testing::random_policy;

namespace {

/// Exhaustive expectation over all state and joint observation sequences.
double path_value(const DecPomdpModel& m, const PastJointPolicy& pi, int t, int s, const JointHistory& joh) {
  const int ja = pi.joint_action(m, t, joh);
  double v = m.reward(s, ja);
  if (t + 1 == pi.depth()) return v;
  for (int s2 = 0; s2 < m.num_states(); ++s2) {
    const double pt = m.transition(s, ja, s2);
    if (pt == 0.0) continue;
    for (int jo = 0; jo < m.num_joint_observations(); ++jo) {
      const double po = m.observation(ja, s2, jo);
      if (po == 0.0) continue;
      JointHistory next = joh;
      const auto parts = m.joint_observations().decode(jo);
      for (int i = 0; i < m.num_agents(); ++i) next[i] = extend_history(joh[i], m.num_observations(i), parts[i]);
      v += pt * po * path_value(m, pi, t + 1, s2, next);
    }
  }
  return v;
}

double oracle_value(const DecPomdpModel& m, const PastJointPolicy& pi) {
  double v = 0.0;
  for (int s = 0; s < m.num_states(); ++s)
    v += m.initial_belief()[s] * path_value(m, pi, 0, s, JointHistory(m.num_agents(), 0));
  return v;
}

StateHistoryDistribution listen_listen(const DecPomdpModel& m) {
  const auto pi = constant_policy(m, 2);
  auto d = StateHistoryDistribution::initial(m);
  for (int t = 0; t < 2; ++t) d = propagate_distribution(m, d, pi.stages[t]);
  return d;
}

double belief_left(const StateHistoryDistribution& d, const JointHistory& joh) {
  const auto& p = d.mass.at(joh);
  return p[0] / (p[0] + p[1]);
}

SubTreePolicy random_tree(int num_obs, int depth, int num_actions, std::mt19937_64& rng) {
  SubTreePolicy g;
  g.num_observations = num_obs;
  std::uniform_int_distribution<int> pick(0, num_actions - 1);
  for (int l = 0; l < depth; ++l) {
    std::vector<int> level(num_histories(num_obs, l));
    for (auto& a : level) a = pick(rng);
    g.levels.push_back(std::move(level));
  }
  return g;
}

// HL,HL = 0, HL,HR = 1, HR,HL = 2, HR,HR = 3 (oldest observation most significant).
constexpr ObsHistory kLL = 0, kLR = 1, kRL = 2, kRR = 3;

}  // namespace

TEST(HistoryTest, EncodingIsOldestFirst) {
  EXPECT_EQ(num_histories(2, 3), 8u);
  const ObsHistory h = extend_history(extend_history(0, 3, 2), 3, 1);
  EXPECT_EQ(h, 7u);
  EXPECT_EQ(history_observations(h, 3, 2), (std::vector<int>{2, 1}));
}

TEST(DistributionTest, InitialMassIsPrior) {
  const auto m = random_model(4, {2, 3, 2, 2});
  const auto d = StateHistoryDistribution::initial(m);
  ASSERT_EQ(d.mass.size(), 1u);
  const auto& p = d.mass.begin()->second;
  for (int s = 0; s < 3; ++s) EXPECT_EQ(p[s], m.initial_belief()[s]);
}

TEST(DistributionTest, DecTigerJointTypeProbabilities) {
  const auto d = listen_listen(gmaa::testing::dectiger());
  EXPECT_EQ(d.mass.size(), 16u);
  EXPECT_NEAR(d.history_probability({kLL, kLL}), 0.261, 5e-4);
  EXPECT_NEAR(d.history_probability({kLL, kLR}), 0.047, 5e-4);
  EXPECT_NEAR(d.history_probability({kLR, kLR}), 0.016, 5e-4);
  EXPECT_NEAR(d.history_probability({kRR, kRR}), 0.261, 5e-4);
  EXPECT_NEAR(d.total(), 1.0, 1e-12);
}

TEST(DistributionTest, DecTigerInducedBeliefs) {
  const auto d = listen_listen(gmaa::testing::dectiger());
  EXPECT_NEAR(belief_left(d, {kLL, kLL}), 0.999, 5e-4);
  EXPECT_NEAR(belief_left(d, {kLL, kLR}), 0.970, 5e-4);
  EXPECT_NEAR(belief_left(d, {kLR, kRL}), 0.5, 5e-4);
  EXPECT_NEAR(belief_left(d, {kRR, kRL}), 0.030, 5e-4);
  EXPECT_NEAR(belief_left(d, {kRR, kRR}), 0.001, 5e-4);
}

TEST(DistributionTest, MassIsConserved) {
  std::mt19937_64 rng(11);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_model(seed, {2, 3, 2, 2});
    const auto pi = random_policy(m, 3, rng);
    auto d = StateHistoryDistribution::initial(m);
    for (int t = 0; t < 3; ++t) {
      d = propagate_distribution(m, d, pi.stages[t]);
      EXPECT_NEAR(d.total(), 1.0, 1e-12);
    }
  }
}

TEST(PolicyValueTest, EmptyPolicyIsZero) {
  EXPECT_EQ(past_policy_value(gmaa::testing::dectiger(), PastJointPolicy{}), 0.0);
}

TEST(PolicyValueTest, DecTigerListenEverywhere) {
  const auto m = gmaa::testing::dectiger(2);
  EXPECT_NEAR(past_policy_value(m, constant_policy(m, 2)), -4.0, 1e-12);
  EXPECT_NEAR(policy_value(m, constant_policy(m, 2)), -4.0, 1e-12);
}

TEST(PolicyValueTest, MatchesPathEnumeration) {
  std::mt19937_64 rng(5);
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto m = random_model(seed, {2, 2, 2, 2});
    for (int depth = 1; depth <= 3; ++depth) {
      const auto pi = random_policy(m, depth, rng);
      const double oracle = oracle_value(m, pi);
      EXPECT_NEAR(past_policy_value(m, pi), oracle, 1e-9);
      EXPECT_NEAR(policy_value(m, pi), oracle, 1e-9);
    }
  }
}

TEST(SubTreeTest, DepthOneIsImmediateReward) {
  const auto m = random_model(9, {2, 3, 2, 2});
  std::mt19937_64 rng(1);
  const auto g = as_subtrees(m, random_policy(m, 1, rng));
  const int ja = m.joint_actions().encode(std::vector<int>{g[0].root_action(), g[1].root_action()});
  for (int s = 0; s < 3; ++s) EXPECT_DOUBLE_EQ(evaluate_subtree(m, s, g), m.reward(s, ja));
}

TEST(SubTreeTest, StateWiseEvaluationMatchesForwardValue) {
  std::mt19937_64 rng(8);
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto m = random_model(seed, {2, 3, 2, 2});
    const auto pi = random_policy(m, 3, rng);
    const auto g = as_subtrees(m, pi);
    double v = 0.0;
    for (int s = 0; s < 3; ++s) v += m.initial_belief()[s] * evaluate_subtree(m, s, g);
    EXPECT_NEAR(v, past_policy_value(m, pi), 1e-9);
  }
}

TEST(SubTreeTest, DeterministicChain) {
  const auto m = parse_dpomdp(
      "agents: 2\nstates: a b\nstart:\n1 0\nactions:\n1\n1\nobservations:\n1\n1\n"
      "T: * : a : b : 1\nT: * : b : b : 1\nO: * : * : * : 1\nR: * : a : * : * : 1\nR: * : b : * : * : 2\n",
      3);
  const auto pi = constant_policy(m, 3);
  EXPECT_DOUBLE_EQ(evaluate_subtree(m, 0, as_subtrees(m, pi)), 5.0);
  EXPECT_DOUBLE_EQ(evaluate_subtree(m, 1, as_subtrees(m, pi)), 6.0);
  EXPECT_DOUBLE_EQ(past_policy_value(m, pi), 5.0);
}

TEST(ConsumeTest, EmptyPathIsIdentity) {
  std::mt19937_64 rng(2);
  const auto g = random_tree(2, 3, 3, rng);
  EXPECT_EQ(consume(g, {}), g);
}

TEST(ConsumeTest, OneStepGivesChild) {
  SubTreePolicy g{0, 2, {{0}, {1, 2}}};
  EXPECT_EQ(consume(g, {0}).levels, (std::vector<std::vector<int>>{{1}}));
  EXPECT_EQ(consume(g, {1}).levels, (std::vector<std::vector<int>>{{2}}));
  EXPECT_THROW(consume(g, {0, 1}), ModelError);
}

TEST(ConsumeTest, Composes) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = random_tree(3, 4, 3, rng);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = 0; c < 3; ++c) {
          EXPECT_EQ(consume(consume(g, {a}), {b}), consume(g, {a, b}));
          EXPECT_EQ(consume(consume(g, {a}), {b, c}), consume(g, {a, b, c}));
        }
  }
}

TEST(CountTest, BenchmarkCounts) {
  EXPECT_EQ(count_joint_policies(gmaa::testing::dectiger(), 2), 729);
  EXPECT_EQ(count_joint_policies(gmaa::testing::broadcast(), 2), 64);
  EXPECT_EQ(count_joint_policies(gmaa::testing::recycling(), 1), 9);
  EXPECT_EQ(count_joint_policies(random_model(1, {3, 2, 4, 2}), 1), 64);
  // 3^(1+2+4+8+16+32) per agent for DEC-TIGER h=6 does not fit in 64 bits.
  EXPECT_GT(count_joint_policies(gmaa::testing::dectiger(), 6), boost::multiprecision::cpp_int(1) << 64);
}

TEST(CsvTest, RoundTrip) {
  std::mt19937_64 rng(4);
  const auto m = gmaa::testing::dectiger(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pi = random_policy(m, 3, rng);
    EXPECT_EQ(policy_from_csv(m, policy_to_csv(m, pi)), pi);
  }
  EXPECT_NE(policy_to_tree_text(m, constant_policy(m, 2)).find("listen"), std::string::npos);
}
