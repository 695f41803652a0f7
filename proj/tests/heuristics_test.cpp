#include <gtest/gtest.h>

#include <filesystem>
#include <random>

#include "gmaa/heuristic_cache.hpp"
#include "test_support.hpp"

using namespace gmaa;

namespace {

std::span<const double> belief_at(const QHeuristic& q, int t, int node) { return q.tree_node(t, node).belief; }

/// Calls fn(t, node, belief) for every reachable node of a full belief tree.
template <class Fn>
void for_each_node(const QHeuristic& tree, Fn&& fn) {
  for (int t = 0; t < tree.horizon(); ++t)
    for (int n = 0; n < tree.num_tree_nodes(t); ++n) fn(t, n, belief_at(tree, t, n));
}

std::vector<std::vector<double>> qmdp_oracle(const DecPomdpModel& m, int stage) {
  const int ns = m.num_states(), na = m.num_joint_actions();
  std::vector<double> v(ns, 0.0);
  std::vector<std::vector<double>> q(ns, std::vector<double>(na));
  for (int t = m.horizon() - 1; t >= stage; --t) {
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a) {
        double x = m.reward(s, a);
        for (int s2 = 0; s2 < ns; ++s2) x += m.transition(s, a, s2) * v[s2];
        q[s][a] = x;
      }
    for (int s = 0; s < ns; ++s) v[s] = *std::max_element(q[s].begin(), q[s].end());
  }
  return q;
}

double surface(const std::vector<ValueVector>& set, const std::vector<double>& b) { return max_inner_product(set, b); }

}  // namespace

TEST(QmdpTest, LastStageIsReward) {
  const auto m = random_model(1, {2, 3, 2, 2}, 3);
  const auto q = compute_qmdp(m);
  for (int s = 0; s < 3; ++s)
    for (int a = 0; a < m.num_joint_actions(); ++a)
      EXPECT_DOUBLE_EQ(q.value(2, -1, JointBelief::point_mass(3, s).probs(), a), m.reward(s, a));
}

TEST(QmdpTest, PointMassMatchesDynamicProgram) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto m = random_model(seed, {2, 3, 2, 2}, 4);
    const auto q = compute_qmdp(m);
    for (int t = 0; t < 4; ++t) {
      const auto oracle = qmdp_oracle(m, t);
      for (int s = 0; s < 3; ++s)
        for (int a = 0; a < m.num_joint_actions(); ++a)
          EXPECT_NEAR(q.value(t, -1, JointBelief::point_mass(3, s).probs(), a), oracle[s][a], 1e-9);
    }
  }
}

TEST(QmdpTest, DeterministicChain) {
  const auto m = parse_dpomdp(
      "agents: 2\nstates: a b\nstart:\n1 0\nactions:\nx y\n1\nobservations:\n1\n1\n"
      "T: x 0 : a : b : 1\nT: y 0 : a : a : 1\nT: * : b : b : 1\nO: * : * : * : 1\n"
      "R: x 0 : a : * : * : 1\nR: y 0 : a : * : * : 0\nR: * : b : * : * : 2\n",
      2);
  const auto q = compute_qmdp(m);
  const auto pm = JointBelief::point_mass(2, 0);
  const auto a = pm.probs();
  EXPECT_DOUBLE_EQ(q.value(0, -1, a, 0), 3.0);  // 1 + 2
  EXPECT_DOUBLE_EQ(q.value(0, -1, a, 1), 1.0);  // 0 + max(1, 0)
}

TEST(QpomdpTest, HorizonOneIsImmediateReward) {
  const auto m = gmaa::testing::dectiger(1);
  for (auto repr : {QRepresentation::tree, QRepresentation::vector, QRepresentation::hybrid}) {
    const auto q = compute_qpomdp(m, repr);
    for (int a = 0; a < m.num_joint_actions(); ++a)
      EXPECT_DOUBLE_EQ(q.value(0, q.root(), m.initial_belief().probs(), a),
                       m.expected_reward(m.initial_belief(), a));
  }
}

TEST(QpomdpTest, TreeMatchesVectorOnDecTiger) {
  const auto m = gmaa::testing::dectiger(3);
  const auto tree = compute_qpomdp(m, QRepresentation::tree);
  const auto vec = compute_qpomdp(m, QRepresentation::vector);
  for_each_node(tree, [&](int t, int n, std::span<const double> b) {
    for (int a = 0; a < m.num_joint_actions(); ++a) EXPECT_NEAR(tree.value(t, n, b, a), vec.value(t, -1, b, a), 1e-9);
  });
}

TEST(QpomdpTest, BoundedByQmdp) {
  const auto m = gmaa::testing::dectiger(4);
  const auto pomdp = compute_qpomdp(m, QRepresentation::tree);
  const auto mdp = compute_qmdp(m);
  for_each_node(pomdp, [&](int t, int n, std::span<const double> b) {
    for (int a = 0; a < m.num_joint_actions(); ++a) EXPECT_LE(pomdp.value(t, n, b, a), mdp.value(t, -1, b, a) + 1e-9);
  });
}

TEST(QbgTest, SingleObservationEqualsQpomdp) {
  const auto m = random_model(5, {2, 3, 2, 1}, 4);
  const auto bg = compute_qbg_tree(m);
  const auto pomdp = compute_qpomdp(m, QRepresentation::tree);
  for_each_node(bg, [&](int t, int n, std::span<const double> b) {
    for (int a = 0; a < m.num_joint_actions(); ++a) EXPECT_NEAR(bg.value(t, n, b, a), pomdp.value(t, n, b, a), 1e-9);
  });
}

TEST(QbgTest, LastStageIsReward) {
  const auto m = gmaa::testing::dectiger(3);
  const auto bg = compute_qbg_tree(m);
  for (int n = 0; n < bg.num_tree_nodes(2); ++n) {
    const auto b = belief_at(bg, 2, n);
    for (int a = 0; a < m.num_joint_actions(); ++a)
      EXPECT_DOUBLE_EQ(bg.value(2, n, b, a), m.expected_reward(JointBelief({b.begin(), b.end()}), a));
  }
}

TEST(QbgTest, BoundedByQpomdp) {
  for (const auto& m : {gmaa::testing::dectiger(3), gmaa::testing::recycling(3), random_model(2, {2, 2, 2, 2}, 3)}) {
    const auto bg = compute_qbg_tree(m);
    const auto pomdp = compute_qpomdp(m, QRepresentation::tree);
    for_each_node(bg, [&](int t, int n, std::span<const double> b) {
      for (int a = 0; a < m.num_joint_actions(); ++a) EXPECT_LE(bg.value(t, n, b, a), pomdp.value(t, n, b, a) + 1e-9);
    });
  }
}

TEST(QbgTest, NonTreeRepresentationIsRejected) {
  HeuristicConfig cfg;
  cfg.kind = HeuristicKind::qbg;
  cfg.representation = QRepresentation::vector;
  EXPECT_THROW(compute_heuristic(gmaa::testing::dectiger(2), cfg), ModelError);
}

TEST(PruneTest, DuplicatesCollapse) {
  EXPECT_EQ(prune_vectors({{1, 2}, {1, 2}, {1, 2}}).size(), 1u);
}

TEST(PruneTest, PointwiseDominated) {
  EXPECT_EQ(prune_vectors({{1, 1}, {0, 0}}), (std::vector<ValueVector>{{1, 1}}));
}

TEST(PruneTest, RegionDominated) {
  // (0.4, 0.4) lies below the upper surface of (1, 0) and (0, 1) everywhere.
  EXPECT_EQ(prune_vectors({{1, 0}, {0, 1}, {0.4, 0.4}}).size(), 2u);
  EXPECT_EQ(prune_vectors({{1, 0}, {0, 1}, {0.6, 0.6}}).size(), 3u);
}

TEST(PruneTest, SurfaceIsPreserved) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const int ns = 2 + trial % 3;
    std::vector<ValueVector> set(20, ValueVector(ns));
    for (auto& v : set)
      for (auto& x : v) x = u(rng);
    const auto pruned = prune_vectors(set);
    EXPECT_LE(pruned.size(), set.size());
    for (int k = 0; k < 1000; ++k) {
      std::vector<double> b(ns);
      double sum = 0.0;
      for (auto& x : b) sum += (x = -std::log(u(rng) + 1e-300));
      for (auto& x : b) x /= sum;
      EXPECT_NEAR(surface(pruned, b), surface(set, b), 1e-9);
    }
  }
}

TEST(HybridTest, HorizonOneIsAllVector) {
  const auto m = gmaa::testing::dectiger(1);
  const auto q = compute_hybrid(m);
  EXPECT_EQ(q.switch_stage(), 0);
  EXPECT_EQ(q.parameter_count(), static_cast<std::size_t>(m.num_joint_actions() * m.num_states()));
}

TEST(HybridTest, AgreesWithTree) {
  for (const auto& m : {gmaa::testing::dectiger(4), gmaa::testing::broadcast(5), gmaa::testing::recycling(4)}) {
    const auto tree = compute_qpomdp(m, QRepresentation::tree);
    const auto hybrid = compute_hybrid(m);
    for_each_node(tree, [&](int t, int n, std::span<const double> b) {
      const int node = hybrid.is_tree_stage(t) ? n : -1;
      for (int a = 0; a < m.num_joint_actions(); ++a) EXPECT_NEAR(hybrid.value(t, node, b, a), tree.value(t, n, b, a), 1e-9);
    });
  }
}

TEST(HybridTest, ParameterCountBelowBothPureForms) {
  for (const auto& m : {gmaa::testing::dectiger(4), gmaa::testing::dectiger(5), gmaa::testing::broadcast(6),
                        gmaa::testing::recycling(4)}) {
    const auto tree = compute_qpomdp(m, QRepresentation::tree).parameter_count();
    const auto vec = compute_qpomdp(m, QRepresentation::vector).parameter_count();
    EXPECT_LE(compute_hybrid(m).parameter_count(), std::min(tree, vec));
  }
}

TEST(HybridTest, SwitchBoundaryIsConsistent) {
  const auto m = gmaa::testing::dectiger(5);
  const auto q = compute_hybrid(m);
  const int sw = q.switch_stage();
  ASSERT_GT(sw, 0);
  ASSERT_LT(sw, m.horizon());
  const int no = m.num_joint_observations();
  for (int n = 0; n < q.num_tree_nodes(sw - 1); ++n) {
    const JointBelief b = JointBelief({belief_at(q, sw - 1, n).begin(), belief_at(q, sw - 1, n).end()});
    for (int a = 0; a < m.num_joint_actions(); ++a) {
      double v = m.expected_reward(b, a);
      for (int o = 0; o < no; ++o) {
        const auto u = m.belief_update(b, a, o);
        if (!u.posterior) continue;
        double best = -1e300;
        const std::vector<double> post(u.posterior->probs().begin(), u.posterior->probs().end());
        for (int a2 = 0; a2 < m.num_joint_actions(); ++a2) best = std::max(best, q.value(sw, -1, post, a2));
        v += u.likelihood * best;
      }
      EXPECT_NEAR(q.value(sw - 1, n, b.probs(), a), v, 1e-9);
    }
  }
}

TEST(QueryTest, VectorStagePointMass) {
  const auto m = gmaa::testing::dectiger(3);
  const auto q = compute_qpomdp(m, QRepresentation::vector);
  for (int s = 0; s < 2; ++s)
    for (int a = 0; a < m.num_joint_actions(); ++a) {
      double best = -1e300;
      for (const auto& v : q.vectors(0, a)) best = std::max(best, v[s]);
      EXPECT_DOUBLE_EQ(q.value(0, -1, JointBelief::point_mass(2, s).probs(), a), best);
    }
}

TEST(QueryTest, OutsideTreeThrows) {
  const auto m = gmaa::testing::dectiger(3);
  const auto q = compute_qbg_tree(m);
  EXPECT_THROW(q.value(1, 1000, m.initial_belief().probs(), 0), ModelError);
}

TEST(CacheTest, JsonRoundTripIsExact) {
  const auto m = gmaa::testing::dectiger(4);
  for (const auto& q : {compute_qbg_tree(m), compute_hybrid(m), compute_qpomdp(m, QRepresentation::vector)}) {
    const auto again = HeuristicSerializer::from_json(nlohmann::json::parse(HeuristicSerializer::to_json(q).dump()));
    EXPECT_EQ(again.switch_stage(), q.switch_stage());
    EXPECT_EQ(again.parameter_counts(), q.parameter_counts());
    EXPECT_EQ(HeuristicSerializer::to_json(again), HeuristicSerializer::to_json(q));
  }
}

TEST(CacheTest, StoresAndReloads) {
  const auto dir = std::filesystem::temp_directory_path() / "gmaa_cache_test";
  std::filesystem::remove_all(dir);
  const auto m = gmaa::testing::dectiger(3);
  HeuristicConfig cfg;
  const auto first = cached_heuristic(m, cfg, dir);
  EXPECT_TRUE(std::filesystem::exists(heuristic_cache_path(dir, m, cfg)));
  const auto second = cached_heuristic(m, cfg, dir);
  EXPECT_EQ(HeuristicSerializer::to_json(first), HeuristicSerializer::to_json(second));
  std::filesystem::remove_all(dir);
}
