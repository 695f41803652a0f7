#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gmaa/cbg_solver.hpp"
#include "gmaa/heuristics.hpp"
#include "gmaa/model.hpp"
#include "gmaa/policy.hpp"

namespace gmaa {

/// One type of one agent: a cluster of observation histories represented by
/// its smallest member.
struct CbgType {
  ObsHistory rep = 0;
  std::vector<ObsHistory> members;
  bool operator==(const CbgType&) const = default;
};

enum class MergePayoff { minimum, weighted_average };

struct ClusterOptions {
  double tolerance = 1e-9;
  MergePayoff payoff = MergePayoff::minimum;
};

/// Collaborative Bayesian game for stage t. Joint types use `game.types`
/// (agent 0 most significant); per joint type it keeps the joint belief, the
/// immediate reward R(b, a) and the heuristic context node.
struct CollabBayesGame {
  int stage = 0;
  BayesGame game;
  std::vector<std::vector<CbgType>> types;  // [agent][type]
  std::vector<std::vector<double>> belief;  // [joint type] (zeros when Pr = 0)
  std::vector<double> reward;               // [joint type * |A| + a]
  std::vector<int> context;                 // [joint type] heuristic node, -1 if none
  double raw_size = 1.0;                    // Π_i |Θ_i| before clustering
  int cluster_iterations = 0;

  int num_agents() const noexcept { return game.num_agents(); }
  int num_joint_types() const noexcept { return game.types.count(); }
  int num_types(int agent) const { return game.types.size(agent); }
  double prob(int jt) const { return game.prob[jt]; }
  double payoff(int jt, int ja) const { return game.u(jt, ja); }
  double r(int jt, int ja) const { return reward[static_cast<std::size_t>(jt) * game.actions.count() + ja]; }
  /// Π_i |Θ_i|.
  double size() const noexcept { return static_cast<double>(game.types.count()); }

  /// Σ_θ Pr(θ) R(θ, β(θ)): expected immediate reward of β at this stage.
  double expected_immediate_reward(const JointCbgPolicy& beta) const {
    double v = 0.0;
    for (int jt = 0; jt < num_joint_types(); ++jt)
      if (prob(jt) != 0.0) v += prob(jt) * r(jt, policy_joint_action(game, beta, jt));
    return v;
  }

  /// CSV dump `types...,prob,belief...,payoffs...` (one row per joint type).
  std::string to_csv() const {
    std::ostringstream out;
    out.precision(17);
    for (int i = 0; i < num_agents(); ++i) out << "type" << i << ",";
    out << "prob";
    const std::size_t ns = belief.empty() ? 0 : belief[0].size();
    for (std::size_t s = 0; s < ns; ++s) out << ",b" << s;
    for (int a = 0; a < game.actions.count(); ++a) out << ",u" << a;
    out << "\n";
    for (int jt = 0; jt < num_joint_types(); ++jt) {
      for (int i = 0; i < num_agents(); ++i) out << types[i][game.types.component(jt, i)].rep << ",";
      out << prob(jt);
      for (double p : belief[jt]) out << "," << p;
      for (int a = 0; a < game.actions.count(); ++a) out << "," << payoff(jt, a);
      out << "\n";
    }
    return out.str();
  }
};

namespace detail {

inline void fill_joint_type(const DecPomdpModel& m, const QHeuristic& q, CollabBayesGame& b, int jt, double p,
                            std::vector<double> belief, int context) {
  const int na = m.num_joint_actions();
  b.game.prob[jt] = p;
  b.context[jt] = context;
  if (p > 0.0) {
    q.values(b.stage, context, belief,
             std::span<double>(b.game.payoff.data() + static_cast<std::size_t>(jt) * na, static_cast<std::size_t>(na)));
    for (int a = 0; a < na; ++a) b.reward[static_cast<std::size_t>(jt) * na + a] = detail::expected_reward(m, belief, a);
  }
  b.belief[jt] = std::move(belief);
}

inline void allocate_tables(const DecPomdpModel& m, CollabBayesGame& b) {
  std::vector<int> sizes, a_sizes;
  for (const auto& t : b.types) sizes.push_back(static_cast<int>(t.size()));
  for (int i = 0; i < m.num_agents(); ++i) a_sizes.push_back(m.num_actions(i));
  b.game.types = JointIndex(sizes);
  b.game.actions = JointIndex(a_sizes);
  const auto nj = static_cast<std::size_t>(b.game.types.count());
  const auto na = static_cast<std::size_t>(m.num_joint_actions());
  b.game.prob.assign(nj, 0.0);
  b.game.payoff.assign(nj * na, 0.0);
  b.reward.assign(nj * na, 0.0);
  b.belief.assign(nj, std::vector<double>(static_cast<std::size_t>(m.num_states()), 0.0));
  b.context.assign(nj, -1);
  b.raw_size = static_cast<double>(nj);
}

}  // namespace detail

/// Stage-0 game: one empty-history type per agent, belief b0.
inline CollabBayesGame initial_cbg(const DecPomdpModel& m, const QHeuristic& q) {
  CollabBayesGame b;
  b.stage = 0;
  b.types.assign(static_cast<std::size_t>(m.num_agents()), {CbgType{0, {0}}});
  detail::allocate_tables(m, b);
  const auto b0 = m.initial_belief().probs();
  detail::fill_joint_type(m, q, b, 0, 1.0, std::vector<double>(b0.begin(), b0.end()), q.root());
  return b;
}

/// Stage t+1 game from the stage-t game and its policy β: each type θ_i
/// becomes |O_i| types (θ_i, β_i(θ_i), o_i). Zero-probability types are kept.
inline CollabBayesGame extend_cbg(const DecPomdpModel& m, const CollabBayesGame& prev, const JointCbgPolicy& beta,
                                  const QHeuristic& q) {
  const int n = m.num_agents();
  CollabBayesGame b;
  b.stage = prev.stage + 1;
  b.types.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int no = m.num_observations(i);
    for (const auto& type : prev.types[i])
      for (int o = 0; o < no; ++o) {
        CbgType t;
        t.rep = extend_history(type.rep, no, o);
        for (ObsHistory mbr : type.members) t.members.push_back(extend_history(mbr, no, o));
        b.types[i].push_back(std::move(t));
      }
  }
  detail::allocate_tables(m, b);
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (int jt = 0; jt < prev.num_joint_types(); ++jt) {
    if (prev.prob(jt) <= 0.0) continue;
    const int ja = policy_joint_action(prev.game, beta, jt);
    detail::for_each_successor(m, prev.belief[jt], ja, [&](int jo, double lik, std::span<const double> post) {
      for (int i = 0; i < n; ++i)
        parts[i] = prev.game.types.component(jt, i) * m.num_observations(i) + m.joint_observations().component(jo, i);
      const int child = b.game.types.encode(parts);
      detail::fill_joint_type(m, q, b, child, prev.prob(jt) * lik, std::vector<double>(post.begin(), post.end()),
                              q.child(prev.stage, prev.context[jt], ja, jo));
    });
  }
  return b;
}

/// Game B(b0, φ^t) built directly from the state/history distribution
/// induced by φ^t: one type per positive-probability observation history.
inline CollabBayesGame cbg_from_scratch(const DecPomdpModel& m, const PastJointPolicy& phi, const QHeuristic& q) {
  const int n = m.num_agents();
  const int t = phi.depth();
  StateHistoryDistribution d = StateHistoryDistribution::initial(m);
  for (int k = 0; k < t; ++k) d = propagate_distribution(m, d, phi.stages[k]);

  CollabBayesGame b;
  b.stage = t;
  b.types.resize(static_cast<std::size_t>(n));
  std::vector<std::map<ObsHistory, int>> index(static_cast<std::size_t>(n));
  for (const auto& [joh, p] : d.mass)
    for (int i = 0; i < n; ++i) index[i].emplace(joh[i], 0);
  for (int i = 0; i < n; ++i) {
    int k = 0;
    for (auto& [oh, idx] : index[i]) {
      idx = k++;
      b.types[i].push_back(CbgType{oh, {oh}});
    }
  }
  detail::allocate_tables(m, b);
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (const auto& [joh, mass] : d.mass) {
    for (int i = 0; i < n; ++i) parts[i] = index[i].at(joh[i]);
    const int jt = b.game.types.encode(parts);
    double p = 0.0;
    for (double x : mass) p += x;
    std::vector<double> belief(mass);
    for (double& x : belief) x /= p;
    // Heuristic context: walk the belief graph along this joint history.
    int node = q.root();
    for (int k = 0; k < t && node >= 0; ++k) {
      JointHistory prefix(static_cast<std::size_t>(n));
      std::vector<int> obs(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i) {
        const auto width = num_histories(m.num_observations(i), t - k);
        prefix[i] = joh[i] / width;
        obs[i] = static_cast<int>((joh[i] / (width / m.num_observations(i))) % m.num_observations(i));
      }
      node = q.child(k, node, phi.joint_action(m, k, prefix), m.joint_observations().encode(obs));
    }
    detail::fill_joint_type(m, q, b, jt, p, std::move(belief), node);
  }
  return b;
}

namespace detail {

/// Keeps only the listed types of each agent, remapping the joint tables.
inline CollabBayesGame restrict_types(const DecPomdpModel& m, const CollabBayesGame& src,
                                      const std::vector<std::vector<int>>& keep) {
  const int n = src.num_agents();
  CollabBayesGame b;
  b.stage = src.stage;
  b.cluster_iterations = src.cluster_iterations;
  b.types.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int k : keep[i]) b.types[i].push_back(src.types[i][k]);
  allocate_tables(m, b);
  b.raw_size = src.raw_size;
  const int na = m.num_joint_actions();
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (int jt = 0; jt < b.num_joint_types(); ++jt) {
    for (int i = 0; i < n; ++i) parts[i] = keep[i][b.game.types.component(jt, i)];
    const int old = src.game.types.encode(parts);
    b.game.prob[jt] = src.game.prob[old];
    b.belief[jt] = src.belief[old];
    b.context[jt] = src.context[old];
    for (int a = 0; a < na; ++a) {
      b.game.payoff[static_cast<std::size_t>(jt) * na + a] = src.payoff(old, a);
      b.reward[static_cast<std::size_t>(jt) * na + a] = src.r(old, a);
    }
  }
  return b;
}

/// Joint type of agent i's type k combined with others-index r (the joint
/// index over all agents except i, agent order preserved).
inline int compose_joint_type(const CollabBayesGame& b, int i, int k, int r) {
  const int n = b.num_agents();
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (int j = n - 1; j >= 0; --j) {
    if (j == i) continue;
    parts[j] = r % b.num_types(j);
    r /= b.num_types(j);
  }
  parts[i] = k;
  return b.game.types.encode(parts);
}

inline int num_others(const CollabBayesGame& b, int i) {
  int c = 1;
  for (int j = 0; j < b.num_agents(); ++j)
    if (j != i) c *= b.num_types(j);
  return c;
}

inline double type_marginal(const CollabBayesGame& b, int i, int k) {
  double p = 0.0;
  for (int r = 0; r < num_others(b, i); ++r) p += b.prob(compose_joint_type(b, i, k, r));
  return p;
}

}  // namespace detail

/// Criterion-1 test: agent i's types ta and tb induce the same distribution
/// over the other agents' types and the same joint beliefs (within tol).
inline bool probabilistically_equivalent(const CollabBayesGame& b, int i, int ta, int tb, double tol) {
  const double pa = detail::type_marginal(b, i, ta);
  const double pb = detail::type_marginal(b, i, tb);
  if (pa <= 0.0 || pb <= 0.0) return false;
  for (int r = 0; r < detail::num_others(b, i); ++r) {
    const int ja = detail::compose_joint_type(b, i, ta, r);
    const int jb = detail::compose_joint_type(b, i, tb, r);
    const double ca = b.prob(ja) / pa;
    const double cb = b.prob(jb) / pb;
    if (std::abs(ca - cb) > tol) return false;
    if (b.prob(ja) > 0.0 && b.prob(jb) > 0.0)
      for (std::size_t s = 0; s < b.belief[ja].size(); ++s)
        if (std::abs(b.belief[ja][s] - b.belief[jb][s]) > tol) return false;
  }
  return true;
}

/// Lossless clustering: drops zero-probability types, then merges
/// probabilistically equivalent types (earlier index absorbs later) for every
/// agent, repeating until a full round over the agents merges nothing.
inline CollabBayesGame cluster_cbg(const DecPomdpModel& m, const CollabBayesGame& in,
                                   const ClusterOptions& opt = {}) {
  const int n = in.num_agents();
  const int na = m.num_joint_actions();
  std::vector<std::vector<int>> keep(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < in.num_types(i); ++k)
      if (detail::type_marginal(in, i, k) > 0.0) keep[i].push_back(k);
  CollabBayesGame b = detail::restrict_types(m, in, keep);
  b.cluster_iterations = 0;

  bool merged_any = true;
  while (merged_any) {
    merged_any = false;
    ++b.cluster_iterations;
    for (int i = 0; i < n; ++i) {
      const int nt = b.num_types(i);
      const int nr = detail::num_others(b, i);
      std::vector<bool> alive(static_cast<std::size_t>(nt), true);
      bool merged = false;
      for (int k1 = 0; k1 < nt; ++k1) {
        if (!alive[k1]) continue;
        for (int k2 = k1 + 1; k2 < nt; ++k2) {
          if (!alive[k2] || !probabilistically_equivalent(b, i, k1, k2, opt.tolerance)) continue;
          for (int r = 0; r < nr; ++r) {
            const int j1 = detail::compose_joint_type(b, i, k1, r);
            const int j2 = detail::compose_joint_type(b, i, k2, r);
            const double q1 = b.game.prob[j1], q2 = b.game.prob[j2];
            for (int a = 0; a < na; ++a) {
              double& u1 = b.game.payoff[static_cast<std::size_t>(j1) * na + a];
              const double u2 = b.game.payoff[static_cast<std::size_t>(j2) * na + a];
              if (q2 <= 0.0) continue;
              if (q1 <= 0.0) {
                u1 = u2;
              } else if (opt.payoff == MergePayoff::minimum) {
                u1 = std::min(u1, u2);
              } else {
                u1 = (q1 * u1 + q2 * u2) / (q1 + q2);
              }
            }
            if (q1 <= 0.0 && q2 > 0.0) {
              b.belief[j1] = b.belief[j2];
              b.context[j1] = b.context[j2];
              for (int a = 0; a < na; ++a)
                b.reward[static_cast<std::size_t>(j1) * na + a] = b.reward[static_cast<std::size_t>(j2) * na + a];
            }
            b.game.prob[j1] = q1 + q2;
            b.game.prob[j2] = 0.0;
          }
          auto& t1 = b.types[i][k1];
          const auto& t2 = b.types[i][k2];
          t1.members.insert(t1.members.end(), t2.members.begin(), t2.members.end());
          std::sort(t1.members.begin(), t1.members.end());
          t1.rep = t1.members.front();
          alive[k2] = false;
          merged = true;
        }
      }
      if (merged) {
        merged_any = true;
        std::vector<std::vector<int>> all(static_cast<std::size_t>(n));
        for (int j = 0; j < n; ++j)
          for (int k = 0; k < b.num_types(j); ++k)
            if (j != i || alive[k]) all[j].push_back(k);
        b = detail::restrict_types(m, b, all);
      }
    }
  }
  return b;
}

/// Agent decision rules for stage t from a policy over the game's types
/// (histories not covered by any type map to action 0).
inline JointDecisionRule decision_rules(const DecPomdpModel& m, const CollabBayesGame& b, const JointCbgPolicy& beta) {
  JointDecisionRule rules;
  for (int i = 0; i < m.num_agents(); ++i) {
    DecisionRule r = default_rule(m, i, b.stage);
    for (int k = 0; k < b.num_types(i); ++k)
      for (ObsHistory oh : b.types[i][k].members) r.actions.at(oh) = beta[i][k];
    rules.push_back(std::move(r));
  }
  return rules;
}

}  // namespace gmaa
