#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <queue>
#include <vector>

#include "gmaa/errors.hpp"
#include "gmaa/joint_index.hpp"

namespace gmaa {

/// Identical-payoff Bayesian game: per-agent type counts, joint-type
/// probabilities and payoffs u(θ, a).
struct BayesGame {
  JointIndex types;
  JointIndex actions;
  std::vector<double> prob;    // [joint type]
  std::vector<double> payoff;  // [joint type * |A| + joint action]

  int num_agents() const noexcept { return types.arity(); }
  double u(int jt, int ja) const { return payoff[static_cast<std::size_t>(jt) * actions.count() + ja]; }
};

/// β: per agent, the action chosen for each of its types.
using JointCbgPolicy = std::vector<std::vector<int>>;

inline int policy_joint_action(const BayesGame& g, const JointCbgPolicy& beta, int jt) {
  int ja = 0;
  for (int i = 0; i < g.num_agents(); ++i) {
    const int type = g.types.component(jt, i);
    ja = ja * g.actions.size(i) + beta[i][type];
  }
  return ja;
}

/// V(β) = Σ_θ Pr(θ) u(θ, β(θ)), summed in joint-type index order.
inline double cbg_policy_value(const BayesGame& g, const JointCbgPolicy& beta) {
  double v = 0.0;
  for (int jt = 0; jt < g.types.count(); ++jt)
    if (g.prob[jt] != 0.0) v += g.prob[jt] * g.u(jt, policy_joint_action(g, beta, jt));
  return v;
}

/// Π_i |A_i|^{|Θ_i|} as a double (may be huge).
inline double num_cbg_policies(const BayesGame& g) {
  double n = 1.0;
  for (int i = 0; i < g.num_agents(); ++i) n *= std::pow(g.actions.size(i), g.types.size(i));
  return n;
}

/// Calls `visit(β)` for every joint policy in canonical order: lexicographic
/// over agent 0's type table, then agent 1's, and so on. Stops early when
/// `visit` returns false.
inline void enumerate_policies(const BayesGame& g, const std::function<bool(const JointCbgPolicy&)>& visit) {
  JointCbgPolicy beta;
  for (int i = 0; i < g.num_agents(); ++i) beta.emplace_back(static_cast<std::size_t>(g.types.size(i)), 0);
  while (true) {
    if (!visit(beta)) return;
    int i = g.num_agents() - 1;
    int k = g.types.size(i) - 1;
    while (true) {
      if (++beta[i][k] < g.actions.size(i)) break;
      beta[i][k] = 0;
      if (--k < 0) {
        if (--i < 0) return;
        k = g.types.size(i) - 1;
      }
    }
  }
}

/// Exact argmax by enumeration; ties go to the first policy in canonical order.
inline std::pair<JointCbgPolicy, double> brute_force_best(const BayesGame& g, double cap = 1e7) {
  if (num_cbg_policies(g) > cap) throw ResourceCapExceeded("brute_force_best: policy count above cap");
  JointCbgPolicy best;
  double best_value = -std::numeric_limits<double>::infinity();
  enumerate_policies(g, [&](const JointCbgPolicy& beta) {
    const double v = cbg_policy_value(g, beta);
    if (best.empty() || v > best_value) {
      best = beta;
      best_value = v;
    }
    return true;
  });
  return {best, best_value};
}

struct CbgSolution {
  JointCbgPolicy policy;
  double value = 0.0;
};

struct CbgSolverStats {
  std::uint64_t nodes_expanded = 0;
  std::uint64_t nodes_generated = 0;
  std::uint64_t max_frontier = 0;
  std::uint64_t solutions_returned = 0;
};

/// Incremental k-best branch and bound over consistency-constrained joint
/// action vectors. Joint types are assigned in order of descending
/// probability; a node's bound is its prefix value plus, for every remaining
/// joint type, Pr(θ) times the best joint action consistent with the agents'
/// commitments so far.
///
/// Returned values are `offset + V(β)`, and `lb`/`ub` are compared against
/// those values. Successive calls deliver policies in non-increasing value
/// order, ties in canonical policy order. The tree is kept between calls and
/// only returned leaves are removed. The game must outlive the solver.
class IncrementalCbgSolver {
 public:
  explicit IncrementalCbgSolver(const BayesGame& game, double offset = 0.0) : game_(&game), offset_(offset) {
    const int n = game.num_agents();
    type_base_.assign(static_cast<std::size_t>(n) + 1, 0);
    for (int i = 0; i < n; ++i) type_base_[i + 1] = type_base_[i] + game.types.size(i);
    for (int jt = 0; jt < game.types.count(); ++jt)
      if (game.prob[jt] > 0.0) order_.push_back(jt);
    if (order_.empty()) throw ModelError("CBG solver needs a joint type with positive probability");
    std::stable_sort(order_.begin(), order_.end(),
                     [&](int a, int b) { return game.prob[a] > game.prob[b]; });
    for (int jt : order_) {
      std::vector<int> slots;
      for (int i = 0; i < n; ++i) slots.push_back(type_base_[i] + game.types.component(jt, i));
      order_slots_.push_back(std::move(slots));
    }
    Node root;
    root.commit.assign(static_cast<std::size_t>(type_base_[n]), -1);
    root.prefix = 0.0;
    root.depth = 0;
    root_bound_ = offset_ + remaining_bound(root.commit, 0);
    root.key = with_slack(root_bound_);
    push(std::move(root));
  }

  IncrementalCbgSolver(const IncrementalCbgSolver&) = delete;
  IncrementalCbgSolver& operator=(const IncrementalCbgSolver&) = delete;

  /// Upper bound of the empty assignment (complete-information value).
  double root_bound() const noexcept { return root_bound_; }
  const std::vector<int>& order() const noexcept { return order_; }
  const CbgSolverStats& stats() const noexcept { return stats_; }

  std::optional<CbgSolution> next_solution(double lb = -std::numeric_limits<double>::infinity(),
                                           double ub = std::numeric_limits<double>::infinity()) {
    while (!frontier_.empty()) {
      const std::size_t top = frontier_.top();
      if (nodes_[top].key < lb) return std::nullopt;
      frontier_.pop();
      Node node = std::move(nodes_[top]);
      free_.push_back(top);
      if (node.leaf) return deliver(node);
      if (auto early = expand(node, lb, ub)) return early;
    }
    return std::nullopt;
  }

 private:
  struct Node {
    std::vector<int> commit;  // flattened [agent][type] → action, -1 if open
    double prefix = 0.0;
    double key = 0.0;
    int depth = 0;
    bool leaf = false;
    std::uint64_t seq = 0;
  };

  double with_slack(double bound) const { return bound + 1e-9 * (1.0 + std::abs(bound)); }

  // Best consistent joint action for ordered joint type k under `commit`.
  double best_consistent(const std::vector<int>& commit, std::size_t k) const {
    const BayesGame& g = *game_;
    const int jt = order_[k];
    double best = -std::numeric_limits<double>::infinity();
    for (int ja = 0; ja < g.actions.count(); ++ja) {
      if (!consistent(commit, k, ja)) continue;
      best = std::max(best, g.u(jt, ja));
    }
    return best;
  }

  bool consistent(const std::vector<int>& commit, std::size_t k, int ja) const {
    const BayesGame& g = *game_;
    for (int i = 0; i < g.num_agents(); ++i) {
      const int c = commit[order_slots_[k][i]];
      if (c >= 0 && c != g.actions.component(ja, i)) return false;
    }
    return true;
  }

  double remaining_bound(const std::vector<int>& commit, std::size_t from) const {
    double b = 0.0;
    for (std::size_t k = from; k < order_.size(); ++k) b += game_->prob[order_[k]] * best_consistent(commit, k);
    return b;
  }

  JointCbgPolicy to_policy(const std::vector<int>& commit) const {
    JointCbgPolicy beta;
    for (int i = 0; i < game_->num_agents(); ++i) {
      std::vector<int> row;
      for (int k = type_base_[i]; k < type_base_[i + 1]; ++k) row.push_back(std::max(commit[k], 0));
      beta.push_back(std::move(row));
    }
    return beta;
  }

  CbgSolution deliver(const Node& node) {
    ++stats_.solutions_returned;
    return CbgSolution{to_policy(node.commit), node.key};
  }

  std::optional<CbgSolution> expand(const Node& node, double lb, double ub) {
    ++stats_.nodes_expanded;
    const BayesGame& g = *game_;
    const std::size_t k = static_cast<std::size_t>(node.depth);
    const int jt = order_[k];
    std::optional<CbgSolution> early;
    for (int ja = 0; ja < g.actions.count(); ++ja) {
      if (!consistent(node.commit, k, ja)) continue;
      Node child;
      child.commit = node.commit;
      for (int i = 0; i < g.num_agents(); ++i) child.commit[order_slots_[k][i]] = g.actions.component(ja, i);
      child.depth = node.depth + 1;
      child.prefix = node.prefix + g.prob[jt] * g.u(jt, ja);
      ++stats_.nodes_generated;
      if (static_cast<std::size_t>(child.depth) == order_.size()) {
        child.leaf = true;
        for (int& c : child.commit) c = std::max(c, 0);
        child.key = offset_ + cbg_policy_value(g, to_policy(child.commit));
        if (!early && child.key >= ub && child.key >= lb) {
          early = deliver(child);
          continue;
        }
      } else {
        child.key = with_slack(offset_ + child.prefix + remaining_bound(child.commit, k + 1));
      }
      push(std::move(child));
    }
    return early;
  }

  void push(Node node) {
    node.seq = next_seq_++;
    std::size_t idx;
    if (!free_.empty()) {
      idx = free_.back();
      free_.pop_back();
      nodes_[idx] = std::move(node);
    } else {
      idx = nodes_.size();
      nodes_.push_back(std::move(node));
    }
    frontier_.push(idx);
    stats_.max_frontier = std::max<std::uint64_t>(stats_.max_frontier, frontier_.size());
  }

  // Priority: higher key; on equal keys partial nodes before leaves; leaves
  // in canonical policy order; partial nodes deeper first, then FIFO.
  struct Lower {
    const IncrementalCbgSolver* self;
    bool operator()(std::size_t a, std::size_t b) const {
      const Node& x = self->nodes_[a];
      const Node& y = self->nodes_[b];
      if (x.key != y.key) return x.key < y.key;
      if (x.leaf != y.leaf) return x.leaf;
      if (x.leaf) return y.commit < x.commit;
      if (x.depth != y.depth) return x.depth < y.depth;
      return x.seq > y.seq;
    }
  };

  const BayesGame* game_;
  double offset_;
  double root_bound_ = 0.0;
  std::vector<int> type_base_;
  std::vector<int> order_;
  std::vector<std::vector<int>> order_slots_;
  std::vector<Node> nodes_;
  std::vector<std::size_t> free_;
  std::uint64_t next_seq_ = 0;
  std::priority_queue<std::size_t, std::vector<std::size_t>, Lower> frontier_{Lower{this}};
  CbgSolverStats stats_;
};

}  // namespace gmaa
