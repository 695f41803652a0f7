#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "test_support.hpp"

using namespace gmaa;
using gmaa::testing::joint;

namespace {

constexpr int kListen = 0;
constexpr int kHearLeft = 0;
constexpr int kHearRight = 1;

JointBelief step(const DecPomdpModel& m, const JointBelief& b, int o1, int o2) {
  const int ja = joint(m.joint_actions(), {kListen, kListen});
  auto u = m.belief_update(b, ja, joint(m.joint_observations(), {o1, o2}));
  EXPECT_TRUE(u.posterior.has_value());
  return *u.posterior;
}

void expect_valid(const DecPomdpModel& m) {
  const int ns = m.num_states();
  for (int s = 0; s < ns; ++s)
    for (int a = 0; a < m.num_joint_actions(); ++a) {
      double sum = 0.0;
      for (int s2 = 0; s2 < ns; ++s2) sum += m.transition(s, a, s2);
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  for (int a = 0; a < m.num_joint_actions(); ++a)
    for (int s2 = 0; s2 < ns; ++s2) {
      double sum = 0.0;
      for (int o = 0; o < m.num_joint_observations(); ++o) sum += m.observation(a, s2, o);
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  EXPECT_TRUE(m.initial_belief().is_valid());
}

}  // namespace

TEST(JointIndexTest, EncodeDecodeIsBijective) {
  JointIndex idx({3, 2, 4});
  EXPECT_EQ(idx.count(), 24);
  for (int j = 0; j < idx.count(); ++j) {
    const auto parts = idx.decode(j);
    EXPECT_EQ(idx.encode(parts), j);
    for (int i = 0; i < 3; ++i) EXPECT_EQ(idx.component(j, i), parts[i]);
  }
  EXPECT_EQ(joint(idx, {1, 0, 0}), 8);  // agent 0 most significant
}

TEST(ParserTest, DecTigerSizes) {
  const auto m = gmaa::testing::dectiger();
  EXPECT_EQ(m.num_agents(), 2);
  EXPECT_EQ(m.num_states(), 2);
  EXPECT_EQ(m.num_actions(0), 3);
  EXPECT_EQ(m.num_actions(1), 3);
  EXPECT_EQ(m.num_observations(0), 2);
  EXPECT_EQ(m.num_observations(1), 2);
  expect_valid(m);
  EXPECT_DOUBLE_EQ(m.reward(0, joint(m.joint_actions(), {kListen, kListen})), -2.0);
  EXPECT_DOUBLE_EQ(m.reward(0, joint(m.joint_actions(), {2, 2})), 20.0);
}

TEST(ParserTest, BenchmarkFilesAreValid) {
  const auto bc = gmaa::testing::broadcast();
  EXPECT_EQ(bc.num_states(), 4);
  EXPECT_EQ(bc.num_actions(0), 2);
  expect_valid(bc);
  const auto rr = gmaa::testing::recycling();
  EXPECT_EQ(rr.num_states(), 4);
  EXPECT_EQ(rr.num_actions(0), 3);
  EXPECT_EQ(rr.num_observations(0), 2);
  expect_valid(rr);
}

TEST(ParserTest, SingletonModelIsSelfLoop) {
  const auto m = parse_dpomdp(
      "agents: 2\ndiscount: 1\nvalues: reward\nstates: 1\nstart:\nuniform\n"
      "actions:\n1\n1\nobservations:\n1\n1\nT: * : * : * : 1\nO: * : * : * : 1\nR: * : * : * : * : 3\n",
      2);
  EXPECT_EQ(m.num_states(), 1);
  EXPECT_DOUBLE_EQ(m.transition(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.observation(0, 0, 0), 1.0);
  EXPECT_DOUBLE_EQ(m.reward(0, 0), 3.0);
  EXPECT_EQ(m.horizon(), 2);
}

TEST(ParserTest, RoundTripIsTensorIdentical) {
  for (const auto& m : {gmaa::testing::dectiger(3), gmaa::testing::broadcast(3), gmaa::testing::recycling(3),
                        random_model(7, {2, 3, 2, 2}, 3), random_model(8, {3, 2, 2, 3}, 2)}) {
    const auto again = parse_dpomdp(serialize_dpomdp(m), m.horizon());
    EXPECT_EQ(again.transition_tensor(), m.transition_tensor());
    EXPECT_EQ(again.observation_tensor(), m.observation_tensor());
    EXPECT_EQ(again.reward_tensor(), m.reward_tensor());
    EXPECT_EQ(again.initial_belief(), m.initial_belief());
    EXPECT_EQ(again.state_names(), m.state_names());
  }
}

TEST(ParserTest, RejectsBadRowWithLineNumber) {
  const std::string text =
      "agents: 1\nstates: a b\nstart:\nuniform\nactions:\n1\nobservations:\n1\n"
      "T: 0 : a : a : 0.5\nT: 0 : b : b : 1\nO: * : * : * : 1\n";
  try {
    parse_dpomdp(text);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 9);
  }
}

TEST(ParserTest, RejectsUnknownIdentifier) {
  EXPECT_THROW(parse_dpomdp("agents: 1\nstates: a\nstart:\nuniform\nactions:\ngo\nobservations:\n1\n"
                            "T: stop : a : a : 1\nO: * : * : * : 1\n"),
               ParseError);
}

TEST(ParserTest, NormalizesSmallRoundingOnly) {
  const auto m = parse_dpomdp(
      "agents: 1\nstates: a b\nstart:\n0.5 0.5\nactions:\n1\nobservations:\n1\n"
      "T: 0 : a :\n0.3333333 0.6666666\nT: 0 : b : b : 1\nO: * : * : * : 1\n");
  EXPECT_NEAR(m.transition(0, 0, 0) + m.transition(0, 0, 1), 1.0, 1e-12);
}

TEST(BeliefTest, DecTigerFig4bValues) {
  const auto m = gmaa::testing::dectiger();
  const auto b0 = m.initial_belief();
  const auto hl_hl = step(m, step(m, b0, kHearLeft, kHearLeft), kHearLeft, kHearLeft);
  EXPECT_NEAR(hl_hl[0], 0.999, 5e-4);
  const auto mixed = step(m, step(m, b0, kHearLeft, kHearLeft), kHearLeft, kHearRight);
  EXPECT_NEAR(mixed[0], 0.970, 5e-4);
  const auto cancel = step(m, step(m, b0, kHearLeft, kHearRight), kHearRight, kHearLeft);
  EXPECT_NEAR(cancel[0], 0.5, 5e-4);
}

TEST(BeliefTest, UninformativeObservationPropagatesPrior) {
  const auto m = gmaa::testing::dectiger();
  const int open = joint(m.joint_actions(), {1, 0});
  const JointBelief b({0.8, 0.2});
  for (int o = 0; o < m.num_joint_observations(); ++o) {
    const auto u = m.belief_update(b, open, o);
    ASSERT_TRUE(u.posterior);
    EXPECT_NEAR((*u.posterior)[0], 0.5, 1e-12);
    EXPECT_NEAR(u.likelihood, 0.25, 1e-12);
  }
}

TEST(BeliefTest, LikelihoodsSumToOne) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto m = random_model(seed, {2, 3, 2, 2});
    for (int a = 0; a < m.num_joint_actions(); ++a) {
      double sum = 0.0;
      for (int o = 0; o < m.num_joint_observations(); ++o) sum += m.belief_update(m.initial_belief(), a, o).likelihood;
      EXPECT_NEAR(sum, 1.0, 1e-9);
    }
  }
}

TEST(BeliefTest, ImpossibleObservationHasNoPosterior) {
  const auto m = parse_dpomdp(
      "agents: 1\nstates: a\nstart:\nuniform\nactions:\n1\nobservations:\nx y\n"
      "T: * : * : * : 1\nO: 0 : a : x : 1\n");
  const auto u = m.belief_update(m.initial_belief(), 0, 1);
  EXPECT_EQ(u.likelihood, 0.0);
  EXPECT_FALSE(u.posterior.has_value());
}

TEST(RewardTest, ExpectedReward) {
  const auto m = gmaa::testing::dectiger();
  const int ja = joint(m.joint_actions(), {2, 2});
  EXPECT_DOUBLE_EQ(m.expected_reward(JointBelief::point_mass(2, 0), ja), 20.0);
  const auto two = parse_dpomdp(
      "agents: 1\nstates: a b\nstart:\nuniform\nactions:\n1\nobservations:\n1\n"
      "T: * : * : * : 0.5\nO: * : * : * : 1\nR: 0 : a : * : * : 2\nR: 0 : b : * : * : 4\n");
  EXPECT_DOUBLE_EQ(two.expected_reward(two.initial_belief(), 0), 3.0);
  const auto r = random_model(3, {2, 3, 2, 2});
  const JointBelief b({0.2, 0.5, 0.3});
  for (int a = 0; a < r.num_joint_actions(); ++a)
    EXPECT_NEAR(r.expected_reward(b, a), 0.2 * r.reward(0, a) + 0.5 * r.reward(1, a) + 0.3 * r.reward(2, a), 1e-12);
}

TEST(RandomModelTest, DeterministicAndValid) {
  EXPECT_EQ(random_model(42, {2, 2, 2, 2}, 3), random_model(42, {2, 2, 2, 2}, 3));
  EXPECT_FALSE(random_model(42, {2, 2, 2, 2}) == random_model(43, {2, 2, 2, 2}));
  for (std::uint64_t seed = 0; seed < 100; ++seed) expect_valid(random_model(seed, {2, static_cast<int>(1 + seed % 3), 2, 2}));
}

TEST(ModelTest, RejectsInvalidHorizon) {
  EXPECT_THROW(gmaa::testing::dectiger().with_horizon(0), ModelError);
}
