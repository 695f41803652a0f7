#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"

using namespace gmaa;

namespace {

/// Random 2-agent game; dyadic probabilities and small integer payoffs when `ties`.
BayesGame random_game(std::uint64_t seed, bool ties) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  BayesGame g{JointIndex({pick(1, 3), pick(1, 3)}), JointIndex({pick(1, 3), pick(1, 3)}), {}, {}};
  std::vector<double> w(static_cast<std::size_t>(g.types.count()));
  double sum = 0.0;
  for (auto& x : w) sum += (x = ties ? pick(1, 4) : std::uniform_real_distribution<double>(0.05, 1.0)(rng));
  if (ties) {
    // Pad the total to a power of two so every probability is exact.
    double total = 1.0;
    while (total < sum) total *= 2.0;
    w.back() += total - sum;
    sum = total;
  }
  for (auto& x : w) g.prob.push_back(x / sum);
  for (int k = 0; k < g.types.count() * g.actions.count(); ++k)
    g.payoff.push_back(ties ? pick(0, 3) : std::uniform_real_distribution<double>(-10.0, 10.0)(rng));
  return g;
}

std::vector<CbgSolution> sorted_enumeration(const BayesGame& g) {
  std::vector<CbgSolution> all;
  enumerate_policies(g, [&](const JointCbgPolicy& beta) {
    all.push_back({beta, cbg_policy_value(g, beta)});
    return true;
  });
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) { return a.value > b.value; });
  return all;
}

std::vector<CbgSolution> drain(IncrementalCbgSolver& solver) {
  std::vector<CbgSolution> out;
  while (auto s = solver.next_solution()) out.push_back(*s);
  return out;
}

void expect_same_sequence(const BayesGame& g, double offset = 0.0) {
  IncrementalCbgSolver solver(g, offset);
  const auto got = drain(solver);
  const auto want = sorted_enumeration(g);
  ASSERT_EQ(got.size(), want.size());
  for (std::size_t k = 0; k < got.size(); ++k) {
    EXPECT_EQ(got[k].policy, want[k].policy) << "rank " << k;
    EXPECT_NEAR(got[k].value, offset + want[k].value, 1e-9);
  }
}

}  // namespace

TEST(SolverTest, SingleJointTypeRootBound) {
  BayesGame g{JointIndex({1, 1}), JointIndex({2, 2}), {1.0}, {4, 1, 7, 3}};
  IncrementalCbgSolver solver(g);
  EXPECT_DOUBLE_EQ(solver.root_bound(), 7.0);
}

TEST(SolverTest, RootBoundIsAdmissible) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = random_game(seed, false);
    IncrementalCbgSolver solver(g);
    EXPECT_GE(solver.root_bound() + 1e-9, brute_force_best(g).second);
  }
}

TEST(SolverTest, OrderIsPermutationOfPositiveTypes) {
  auto g = random_game(3, false);
  g.prob[0] = 0.0;
  IncrementalCbgSolver solver(g);
  auto order = solver.order();
  std::sort(order.begin(), order.end());
  std::vector<int> want;
  for (int jt = 1; jt < g.types.count(); ++jt) want.push_back(jt);
  EXPECT_EQ(order, want);
}

TEST(SolverTest, OneTypeNineActionsInOrder) {
  BayesGame g{JointIndex({1, 1}), JointIndex({3, 3}), {1.0}, {5, 1, 8, 2, 9, 4, 0, 7, 3}};
  IncrementalCbgSolver solver(g);
  const auto got = drain(solver);
  ASSERT_EQ(got.size(), 9u);
  std::vector<double> values;
  for (const auto& s : got) values.push_back(s.value);
  EXPECT_EQ(values, (std::vector<double>{9, 8, 7, 5, 4, 3, 2, 1, 0}));
  EXPECT_EQ(got[0].policy, (JointCbgPolicy{{1}, {1}}));
}

TEST(SolverTest, KBestMatchesSortedEnumeration) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) expect_same_sequence(random_game(seed, false));
}

TEST(SolverTest, TiesFollowCanonicalOrder) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) expect_same_sequence(random_game(seed, true));
}

TEST(SolverTest, OffsetShiftsValuesAndBounds) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) expect_same_sequence(random_game(seed, false), 12.5);
  const auto g = random_game(1, false);
  IncrementalCbgSolver plain(g), shifted(g, -3.0);
  EXPECT_NEAR(shifted.root_bound(), plain.root_bound() - 3.0, 1e-12);
}

TEST(SolverTest, LowerBoundAboveMaximumGivesNothing) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = random_game(seed, false);
    IncrementalCbgSolver solver(g);
    EXPECT_FALSE(solver.next_solution(brute_force_best(g).second + 1e-6).has_value());
  }
}

TEST(SolverTest, LowerBoundKeepsOnlyQualifyingSolutions) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto g = random_game(seed, false);
    const auto want = sorted_enumeration(g);
    const double lb = want[want.size() / 2].value;
    IncrementalCbgSolver solver(g);
    std::size_t count = 0;
    while (auto s = solver.next_solution(lb)) {
      EXPECT_GE(s->value, lb);
      ++count;
    }
    EXPECT_EQ(count, static_cast<std::size_t>(std::count_if(want.begin(), want.end(),
                                                            [&](const auto& s) { return s.value >= lb; })));
  }
}

TEST(BruteForceTest, MatchesFirstSolution) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto g = random_game(seed, seed % 2 == 0);
    IncrementalCbgSolver solver(g);
    const auto first = solver.next_solution();
    ASSERT_TRUE(first);
    const auto [beta, value] = brute_force_best(g);
    EXPECT_NEAR(first->value, value, 1e-9);
    EXPECT_EQ(first->policy, beta);
  }
}

TEST(BruteForceTest, SingleJointTypeArgmax) {
  BayesGame g{JointIndex({1, 1}), JointIndex({2, 2}), {1.0}, {4, 1, 7, 3}};
  EXPECT_EQ(brute_force_best(g).first, (JointCbgPolicy{{1}, {0}}));
}

TEST(BruteForceTest, AllEqualPicksFirstPolicy) {
  BayesGame g{JointIndex({2, 2}), JointIndex({2, 2}), {0.25, 0.25, 0.25, 0.25}, std::vector<double>(16, 1.0)};
  EXPECT_EQ(brute_force_best(g).first, (JointCbgPolicy{{0, 0}, {0, 0}}));
  IncrementalCbgSolver solver(g);
  EXPECT_EQ(solver.next_solution()->policy, (JointCbgPolicy{{0, 0}, {0, 0}}));
}
