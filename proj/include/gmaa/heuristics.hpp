#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "gmaa/cbg_solver.hpp"
#include "gmaa/errors.hpp"
#include "gmaa/model.hpp"
#include "gmaa/vector_set.hpp"

namespace gmaa {

enum class HeuristicKind { qmdp, qpomdp, qbg };
enum class QRepresentation { tree, vector, hybrid };

inline std::string to_string(HeuristicKind k) {
  switch (k) {
    case HeuristicKind::qmdp: return "qmdp";
    case HeuristicKind::qpomdp: return "qpomdp";
    case HeuristicKind::qbg: return "qbg";
  }
  return "?";
}

inline std::string to_string(QRepresentation r) {
  switch (r) {
    case QRepresentation::tree: return "tree";
    case QRepresentation::vector: return "vector";
    case QRepresentation::hybrid: return "hybrid";
  }
  return "?";
}

inline HeuristicKind parse_heuristic_kind(const std::string& s) {
  if (s == "qmdp") return HeuristicKind::qmdp;
  if (s == "qpomdp") return HeuristicKind::qpomdp;
  if (s == "qbg") return HeuristicKind::qbg;
  throw ModelError("unknown heuristic '" + s + "'");
}

inline QRepresentation parse_representation(const std::string& s) {
  if (s == "tree") return QRepresentation::tree;
  if (s == "vector") return QRepresentation::vector;
  if (s == "hybrid") return QRepresentation::hybrid;
  throw ModelError("unknown representation '" + s + "'");
}

struct HeuristicConfig {
  HeuristicKind kind = HeuristicKind::qbg;
  QRepresentation representation = QRepresentation::tree;
  std::size_t max_tree_nodes = 20'000'000;
  std::size_t max_vectors = 200'000;
  /// Q_BG inner maximization switches from enumeration to branch and bound above this many policies.
  double qbg_enumeration_limit = 1e5;
};

/// Node of the reachable-belief graph. Beliefs equal on a 1e-12 grid share a node.
struct BeliefNode {
  std::vector<double> belief;
  std::vector<int> child;  // [ja * |JO| + jo] → node at the next stage, -1 if unreachable or not stored
};

namespace detail {

/// Calls fn(jo, likelihood, posterior) for every joint observation with positive likelihood.
template <typename Fn>
void for_each_successor(const DecPomdpModel& m, std::span<const double> b, int ja, Fn&& fn) {
  const int ns = m.num_states();
  std::vector<double> pred(static_cast<std::size_t>(ns), 0.0), post(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s)
    if (b[s] != 0.0)
      for (int s2 = 0; s2 < ns; ++s2) pred[s2] += b[s] * m.transition(s, ja, s2);
  for (int jo = 0; jo < m.num_joint_observations(); ++jo) {
    double total = 0.0;
    for (int s2 = 0; s2 < ns; ++s2) total += (post[s2] = pred[s2] * m.observation(ja, s2, jo));
    if (total <= 0.0) continue;
    for (double& p : post) p /= total;
    fn(jo, total, std::span<const double>(post));
  }
}

inline double expected_reward(const DecPomdpModel& m, std::span<const double> b, int ja) {
  double r = 0.0;
  for (int s = 0; s < m.num_states(); ++s) r += b[s] * m.reward(s, ja);
  return r;
}

inline std::vector<std::int64_t> belief_key(std::span<const double> b) {
  std::vector<std::int64_t> key(b.size());
  for (std::size_t s = 0; s < b.size(); ++s) key[s] = std::llround(b[s] * 1e12);
  return key;
}

}  // namespace detail

/// Admissible Q-value function over joint histories, stored per stage either
/// as values on reachable-belief nodes (tree) or as per-joint-action vector
/// sets (vector). Stages below `switch_stage()` are tree stages.
class QHeuristic {
 public:
  QHeuristic() = default;

  HeuristicKind kind() const noexcept { return kind_; }
  QRepresentation representation() const noexcept { return representation_; }
  int horizon() const noexcept { return horizon_; }
  /// First stage stored as vectors (0 = all vectors, h = all tree).
  int switch_stage() const noexcept { return switch_stage_; }
  bool is_tree_stage(int t) const noexcept { return t < switch_stage_; }
  double compute_seconds() const noexcept { return compute_seconds_; }

  int num_tree_nodes(int t) const { return is_tree_stage(t) ? static_cast<int>(graph_[t].size()) : 0; }
  const BeliefNode& tree_node(int t, int node) const { return graph_.at(t).at(node); }
  const std::vector<ValueVector>& vectors(int t, int ja) const { return vectors_.at(t).at(ja); }

  int root() const noexcept { return switch_stage_ > 0 ? 0 : -1; }

  /// Node reached from `node` at stage t via (ja, jo); -1 when stage t+1 is a vector stage.
  int child(int t, int node, int ja, int jo) const {
    if (node < 0 || t + 1 >= switch_stage_) return -1;
    return graph_[t][node].child[static_cast<std::size_t>(ja) * num_jo_ + jo];
  }

  /// Q̂(θ, ·) for the history with tree node `node` (tree stages) or joint belief `b` (vector stages).
  /// At the last stage the value is the immediate reward R(b, a).
  void values(int t, int node, std::span<const double> b, std::span<double> out) const {
    if (t == horizon_ - 1) {
      for (int a = 0; a < num_ja_; ++a) {
        double r = 0.0;
        for (std::size_t s = 0; s < b.size(); ++s) r += b[s] * reward_[s * num_ja_ + a];
        out[a] = r;
      }
      return;
    }
    if (is_tree_stage(t)) {
      if (node < 0 || node >= static_cast<int>(graph_[t].size()))
        throw ModelError("heuristic query for a history outside the reachable tree");
      for (int a = 0; a < num_ja_; ++a) out[a] = tree_q_[t][static_cast<std::size_t>(node) * num_ja_ + a];
      return;
    }
    const std::vector<double> bv(b.begin(), b.end());
    for (int a = 0; a < num_ja_; ++a) out[a] = max_inner_product(vectors_[t][a], bv);
  }

  double value(int t, int node, std::span<const double> b, int ja) const {
    std::vector<double> out(static_cast<std::size_t>(num_ja_));
    values(t, node, b, out);
    return out[ja];
  }

  /// Stored real numbers per stage: |nodes|·|A| for tree stages, Σ|vectors|·|S| for vector stages.
  std::vector<std::size_t> parameter_counts() const {
    std::vector<std::size_t> out;
    for (int t = 0; t < horizon_; ++t) {
      if (is_tree_stage(t)) {
        out.push_back(graph_[t].size() * static_cast<std::size_t>(num_ja_));
      } else {
        std::size_t n = 0;
        for (const auto& set : vectors_[t]) n += set.size();
        out.push_back(n * static_cast<std::size_t>(num_states_));
      }
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto c : parameter_counts()) n += c;
    return n;
  }

 private:
  friend class HeuristicBuilder;
  friend struct HeuristicSerializer;

  HeuristicKind kind_ = HeuristicKind::qmdp;
  QRepresentation representation_ = QRepresentation::tree;
  int horizon_ = 0;
  int switch_stage_ = 0;
  int num_ja_ = 0;
  int num_jo_ = 0;
  int num_states_ = 0;
  double compute_seconds_ = 0.0;
  std::vector<double> reward_;                                 // [s * |A| + a]
  std::vector<std::vector<BeliefNode>> graph_;                 // tree stages
  std::vector<std::vector<double>> tree_q_;                    // [t][node * |A| + a]
  std::vector<std::vector<std::vector<ValueVector>>> vectors_;  // [t][a] for vector stages
};

class HeuristicBuilder {
 public:
  HeuristicBuilder(const DecPomdpModel& m, const HeuristicConfig& cfg) : m_(m), cfg_(cfg) {
    q_.kind_ = cfg.kind;
    q_.representation_ = cfg.representation;
    q_.horizon_ = m.horizon();
    q_.num_ja_ = m.num_joint_actions();
    q_.num_jo_ = m.num_joint_observations();
    q_.num_states_ = m.num_states();
    q_.reward_ = m.reward_tensor();
    q_.vectors_.assign(static_cast<std::size_t>(m.horizon()), {});
  }

  QHeuristic build() {
    const auto start = std::chrono::steady_clock::now();
    const int h = m_.horizon();
    if (cfg_.kind == HeuristicKind::qmdp) {
      build_qmdp();
    } else if (cfg_.kind == HeuristicKind::qbg) {
      if (cfg_.representation != QRepresentation::tree)
        throw ModelError("Q_BG is available only in the tree representation");
      build_graph(h, true);
      q_.switch_stage_ = h;
      tree_backups(h - 1);
    } else if (cfg_.representation == QRepresentation::tree) {
      build_graph(h, true);
      q_.switch_stage_ = h;
      tree_backups(h - 1);
    } else if (cfg_.representation == QRepresentation::vector) {
      q_.switch_stage_ = 0;
      set_reward_vectors(h - 1);
      for (int t = h - 2; t >= 0; --t) vector_backup(t);
    } else {
      build_hybrid();
    }
    q_.compute_seconds_ = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return std::move(q_);
  }

 private:
  void build_qmdp() {
    const int h = m_.horizon();
    const int ns = m_.num_states();
    const int na = m_.num_joint_actions();
    q_.switch_stage_ = 0;
    set_reward_vectors(h - 1);
    for (int t = h - 2; t >= 0; --t) {
      std::vector<double> v_next(static_cast<std::size_t>(ns), -std::numeric_limits<double>::infinity());
      for (int a = 0; a < na; ++a)
        for (int s = 0; s < ns; ++s) v_next[s] = std::max(v_next[s], q_.vectors_[t + 1][a][0][s]);
      q_.vectors_[t].assign(static_cast<std::size_t>(na), {});
      for (int a = 0; a < na; ++a) {
        ValueVector q(static_cast<std::size_t>(ns));
        for (int s = 0; s < ns; ++s) {
          double x = m_.reward(s, a);
          for (int s2 = 0; s2 < ns; ++s2) x += m_.transition(s, a, s2) * v_next[s2];
          q[s] = x;
        }
        q_.vectors_[t][a] = {q};
      }
    }
  }

  void set_reward_vectors(int t) {
    const int ns = m_.num_states();
    q_.vectors_[t].assign(static_cast<std::size_t>(m_.num_joint_actions()), {});
    for (int a = 0; a < m_.num_joint_actions(); ++a) {
      ValueVector r(static_cast<std::size_t>(ns));
      for (int s = 0; s < ns; ++s) r[s] = m_.reward(s, a);
      q_.vectors_[t][a] = {r};
    }
  }

  /// Builds memoized belief nodes for stages [0, depth). Returns the number of
  /// stages completed; when `must_finish` the node cap throws instead.
  int build_graph(int depth, bool must_finish) {
    const int na = m_.num_joint_actions();
    const int no = m_.num_joint_observations();
    auto& g = q_.graph_;
    g.assign(1, {});
    const auto b0 = m_.initial_belief().probs();
    g[0].push_back(BeliefNode{std::vector<double>(b0.begin(), b0.end()), {}});
    std::size_t total = 1;
    for (int t = 0; t + 1 < depth; ++t) {
      std::vector<BeliefNode> next;
      std::map<std::vector<std::int64_t>, int> index;
      for (auto& node : g[t]) {
        node.child.assign(static_cast<std::size_t>(na) * no, -1);
        for (int a = 0; a < na; ++a)
          detail::for_each_successor(m_, node.belief, a, [&](int jo, double, std::span<const double> post) {
            auto key = detail::belief_key(post);
            auto [it, fresh] = index.try_emplace(std::move(key), static_cast<int>(next.size()));
            if (fresh) next.push_back(BeliefNode{std::vector<double>(post.begin(), post.end()), {}});
            node.child[static_cast<std::size_t>(a) * no + jo] = it->second;
          });
      }
      total += next.size();
      if (total > cfg_.max_tree_nodes) {
        if (must_finish) throw ResourceCapExceeded("belief tree exceeds " + std::to_string(cfg_.max_tree_nodes) + " nodes");
        for (auto& node : g[t]) node.child.clear();
        return t + 1;
      }
      g.push_back(std::move(next));
    }
    return depth;
  }

  /// Tree backups for stages t_last down to 0. Stage t_last+1 (if any) is a vector stage.
  void tree_backups(int t_last) {
    const int na = m_.num_joint_actions();
    q_.tree_q_.assign(q_.graph_.size(), {});
    for (int t = t_last; t >= 0; --t) {
      auto& nodes = q_.graph_[t];
      auto& q = q_.tree_q_[t];
      q.assign(nodes.size() * static_cast<std::size_t>(na), 0.0);
      for (std::size_t n = 0; n < nodes.size(); ++n)
        for (int a = 0; a < na; ++a)
          q[n * na + a] = (t == m_.horizon() - 1) ? detail::expected_reward(m_, nodes[n].belief, a)
                                                  : backup(t, nodes[n], a);
    }
  }

  double next_stage_value(int t, int child_node, std::span<const double> post, int a2) const {
    if (t + 1 == m_.horizon() - 1) return detail::expected_reward(m_, post, a2);
    if (t + 1 < q_.switch_stage_) return q_.tree_q_[t + 1][static_cast<std::size_t>(child_node) * m_.num_joint_actions() + a2];
    return max_inner_product(q_.vectors_[t + 1][a2], std::vector<double>(post.begin(), post.end()));
  }

  double backup(int t, const BeliefNode& node, int a) const {
    const int na = m_.num_joint_actions();
    const int no = m_.num_joint_observations();
    double v = detail::expected_reward(m_, node.belief, a);
    if (cfg_.kind == HeuristicKind::qpomdp) {
      detail::for_each_successor(m_, node.belief, a, [&](int jo, double lik, std::span<const double> post) {
        const int c = node.child.empty() ? -1 : node.child[static_cast<std::size_t>(a) * no + jo];
        double best = -std::numeric_limits<double>::infinity();
        for (int a2 = 0; a2 < na; ++a2) best = std::max(best, next_stage_value(t, c, post, a2));
        v += lik * best;
      });
      return v;
    }
    // Q_BG: the next-stage action may depend on each agent's own observation only.
    BayesGame game;
    std::vector<int> o_sizes, a_sizes;
    for (int i = 0; i < m_.num_agents(); ++i) {
      o_sizes.push_back(m_.num_observations(i));
      a_sizes.push_back(m_.num_actions(i));
    }
    game.types = JointIndex(o_sizes);
    game.actions = JointIndex(a_sizes);
    game.prob.assign(static_cast<std::size_t>(no), 0.0);
    game.payoff.assign(static_cast<std::size_t>(no) * na, 0.0);
    detail::for_each_successor(m_, node.belief, a, [&](int jo, double lik, std::span<const double> post) {
      const int c = node.child[static_cast<std::size_t>(a) * no + jo];
      game.prob[jo] = lik;
      for (int a2 = 0; a2 < na; ++a2) game.payoff[static_cast<std::size_t>(jo) * na + a2] = next_stage_value(t, c, post, a2);
    });
    if (num_cbg_policies(game) <= cfg_.qbg_enumeration_limit) {
      double best = -std::numeric_limits<double>::infinity();
      enumerate_policies(game, [&](const JointCbgPolicy& beta) {
        best = std::max(best, cbg_policy_value(game, beta));
        return true;
      });
      return v + best;
    }
    IncrementalCbgSolver solver(game);
    return v + solver.next_solution()->value;
  }

  void vector_backup(int t) {
    const int ns = m_.num_states();
    const int na = m_.num_joint_actions();
    std::vector<ValueVector> next;
    for (const auto& set : q_.vectors_[t + 1]) next.insert(next.end(), set.begin(), set.end());
    next = prune_vectors(std::move(next));
    q_.vectors_[t].assign(static_cast<std::size_t>(na), {});
    for (int a = 0; a < na; ++a) {
      ValueVector r(static_cast<std::size_t>(ns));
      for (int s = 0; s < ns; ++s) r[s] = m_.reward(s, a);
      std::vector<ValueVector> acc{r};
      for (int jo = 0; jo < m_.num_joint_observations(); ++jo) {
        std::vector<ValueVector> g;
        for (const auto& v : next) {
          ValueVector x(static_cast<std::size_t>(ns), 0.0);
          for (int s = 0; s < ns; ++s)
            for (int s2 = 0; s2 < ns; ++s2) x[s] += m_.transition(s, a, s2) * m_.observation(a, s2, jo) * v[s2];
          g.push_back(std::move(x));
        }
        g = prune_vectors(std::move(g));
        if (acc.size() * g.size() > cfg_.max_vectors)
          throw ResourceCapExceeded("vector backup exceeds " + std::to_string(cfg_.max_vectors) + " vectors");
        std::vector<ValueVector> sum;
        for (const auto& x : acc)
          for (const auto& y : g) {
            ValueVector z(static_cast<std::size_t>(ns));
            for (int s = 0; s < ns; ++s) z[s] = x[s] + y[s];
            sum.push_back(std::move(z));
          }
        acc = prune_vectors(std::move(sum));
      }
      q_.vectors_[t][a] = std::move(acc);
    }
  }

  std::size_t vector_params(int t) const {
    std::size_t n = 0;
    for (const auto& set : q_.vectors_[t]) n += set.size();
    return n * static_cast<std::size_t>(m_.num_states());
  }

  // Minimum-size hybrid: vector backups from the last stage while they are
  // smaller than the tree stage they replace, tree backups before that.
  void build_hybrid() {
    const int h = m_.horizon();
    const std::size_t na = static_cast<std::size_t>(m_.num_joint_actions());
    const int built = build_graph(h, false);
    set_reward_vectors(h - 1);
    std::size_t z = na * static_cast<std::size_t>(m_.num_states());
    int first_vector = h - 1;
    for (int t = h - 2; t >= 0; --t) {
      const std::size_t y = t < built ? q_.graph_[t].size() * na : std::numeric_limits<std::size_t>::max();
      if (z < y) {
        try {
          vector_backup(t);
          z = vector_params(t);
        } catch (const ResourceCapExceeded&) {
          q_.vectors_[t].clear();
          z = std::numeric_limits<std::size_t>::max();
          if (t >= built) throw;
        }
      }
      if (z >= y) {
        q_.vectors_[t].clear();
        break;
      }
      first_vector = t;
    }
    q_.switch_stage_ = first_vector;
    q_.graph_.resize(static_cast<std::size_t>(first_vector));
    if (first_vector > 0) {
      for (auto& node : q_.graph_[first_vector - 1]) node.child.clear();
      tree_backups(first_vector - 1);
    }
  }

  const DecPomdpModel& m_;
  HeuristicConfig cfg_;
  QHeuristic q_;
};

inline QHeuristic compute_heuristic(const DecPomdpModel& m, const HeuristicConfig& cfg) {
  return HeuristicBuilder(m, cfg).build();
}

inline QHeuristic compute_qmdp(const DecPomdpModel& m) {
  HeuristicConfig cfg;
  cfg.kind = HeuristicKind::qmdp;
  cfg.representation = QRepresentation::vector;
  return compute_heuristic(m, cfg);
}

inline QHeuristic compute_qpomdp(const DecPomdpModel& m, QRepresentation mode) {
  HeuristicConfig cfg;
  cfg.kind = HeuristicKind::qpomdp;
  cfg.representation = mode;
  return compute_heuristic(m, cfg);
}

inline QHeuristic compute_qbg_tree(const DecPomdpModel& m) {
  HeuristicConfig cfg;
  cfg.kind = HeuristicKind::qbg;
  cfg.representation = QRepresentation::tree;
  return compute_heuristic(m, cfg);
}

inline QHeuristic compute_hybrid(const DecPomdpModel& m) { return compute_qpomdp(m, QRepresentation::hybrid); }

}  // namespace gmaa
