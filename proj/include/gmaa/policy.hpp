#pragma once

#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <boost/multiprecision/cpp_int.hpp>

#include "gmaa/errors.hpp"
#include "gmaa/model.hpp"

namespace gmaa {

/// Observation history of one agent, encoded base-|O_i| with the oldest
/// observation most significant. The empty history is 0.
using ObsHistory = std::uint64_t;

/// One agent's joint observation histories at a stage, one entry per agent.
using JointHistory = std::vector<ObsHistory>;

inline std::uint64_t num_histories(int num_obs, int length) {
  std::uint64_t n = 1;
  for (int l = 0; l < length; ++l) {
    n *= static_cast<std::uint64_t>(num_obs);
    if (n > (std::uint64_t{1} << 40)) throw ResourceCapExceeded("observation history space too large");
  }
  return n;
}

inline ObsHistory extend_history(ObsHistory oh, int num_obs, int obs) {
  return oh * static_cast<ObsHistory>(num_obs) + static_cast<ObsHistory>(obs);
}

/// Observations of a history, oldest first.
inline std::vector<int> history_observations(ObsHistory oh, int num_obs, int length) {
  std::vector<int> out(static_cast<std::size_t>(length));
  for (int l = length; l-- > 0;) {
    out[l] = static_cast<int>(oh % static_cast<ObsHistory>(num_obs));
    oh /= static_cast<ObsHistory>(num_obs);
  }
  return out;
}

/// δ_i^t: action per length-t observation history (dense, |O_i|^t entries).
struct DecisionRule {
  int agent = 0;
  int stage = 0;
  std::vector<int> actions;

  int operator()(ObsHistory oh) const {
    if (oh >= actions.size()) throw ModelError("decision rule undefined for history " + std::to_string(oh));
    return actions[oh];
  }
  bool operator==(const DecisionRule&) const = default;
};

using JointDecisionRule = std::vector<DecisionRule>;

/// φ^t = (δ^0, ..., δ^{t-1}). A depth-h past policy is a full joint policy.
struct PastJointPolicy {
  std::vector<JointDecisionRule> stages;

  int depth() const noexcept { return static_cast<int>(stages.size()); }
  int joint_action(const DecPomdpModel& m, int stage, const JointHistory& joh) const {
    std::vector<int> parts(static_cast<std::size_t>(m.num_agents()));
    for (int i = 0; i < m.num_agents(); ++i) parts[i] = stages[stage][i](joh[i]);
    return m.joint_actions().encode(parts);
  }
  bool operator==(const PastJointPolicy&) const = default;
};

/// Pr(s^t, θ^t | b0, φ^t) for a deterministic φ^t: one entry per joint
/// observation history with positive mass, holding the state probabilities.
struct StateHistoryDistribution {
  int stage = 0;
  std::map<JointHistory, std::vector<double>> mass;

  static StateHistoryDistribution initial(const DecPomdpModel& m) {
    StateHistoryDistribution d;
    const auto p = m.initial_belief().probs();
    d.mass[JointHistory(static_cast<std::size_t>(m.num_agents()), 0)] = std::vector<double>(p.begin(), p.end());
    return d;
  }

  double total() const {
    double sum = 0.0;
    for (const auto& [h, p] : mass)
      for (double x : p) sum += x;
    return sum;
  }

  /// Pr(θ^t) for one joint history (0 if absent).
  double history_probability(const JointHistory& joh) const {
    auto it = mass.find(joh);
    if (it == mass.end()) return 0.0;
    double sum = 0.0;
    for (double x : it->second) sum += x;
    return sum;
  }
};

/// One application of the state/history recursion under joint decision rule δ.
inline StateHistoryDistribution propagate_distribution(const DecPomdpModel& m, const StateHistoryDistribution& d,
                                                       const JointDecisionRule& delta) {
  const int n = m.num_agents();
  const int ns = m.num_states();
  StateHistoryDistribution next;
  next.stage = d.stage + 1;
  std::vector<int> parts(static_cast<std::size_t>(n));
  std::vector<double> pred(static_cast<std::size_t>(ns));
  for (const auto& [joh, probs] : d.mass) {
    for (int i = 0; i < n; ++i) parts[i] = delta[i](joh[i]);
    const int ja = m.joint_actions().encode(parts);
    std::fill(pred.begin(), pred.end(), 0.0);
    for (int s = 0; s < ns; ++s)
      if (probs[s] != 0.0)
        for (int s2 = 0; s2 < ns; ++s2) pred[s2] += probs[s] * m.transition(s, ja, s2);
    for (int jo = 0; jo < m.num_joint_observations(); ++jo) {
      std::vector<double> post(static_cast<std::size_t>(ns));
      double total = 0.0;
      for (int s2 = 0; s2 < ns; ++s2) total += (post[s2] = pred[s2] * m.observation(ja, s2, jo));
      if (total <= 0.0) continue;
      JointHistory child(static_cast<std::size_t>(n));
      for (int i = 0; i < n; ++i)
        child[i] = extend_history(joh[i], m.num_observations(i), m.joint_observations().component(jo, i));
      next.mass.emplace(std::move(child), std::move(post));
    }
  }
  return next;
}

/// V^{0..t-1}(φ^t): expected reward of the first t stages.
inline double past_policy_value(const DecPomdpModel& m, const PastJointPolicy& phi) {
  StateHistoryDistribution d = StateHistoryDistribution::initial(m);
  double value = 0.0;
  for (int t = 0; t < phi.depth(); ++t) {
    for (const auto& [joh, probs] : d.mass) {
      const int ja = phi.joint_action(m, t, joh);
      for (int s = 0; s < m.num_states(); ++s) value += probs[s] * m.reward(s, ja);
    }
    if (t + 1 < phi.depth()) d = propagate_distribution(m, d, phi.stages[t]);
  }
  return value;
}

/// Depth-τ policy tree of one agent. `levels[l]` holds the action for every
/// length-l observation path (dense, |O_i|^l entries).
struct SubTreePolicy {
  int agent = 0;
  int num_observations = 1;
  std::vector<std::vector<int>> levels;

  int depth() const noexcept { return static_cast<int>(levels.size()); }
  int root_action() const { return levels.at(0).at(0); }
  bool operator==(const SubTreePolicy&) const = default;
};

using JointSubTreePolicy = std::vector<SubTreePolicy>;

/// The sub-tree reached by following observation path `path`.
inline SubTreePolicy consume(const SubTreePolicy& g, const std::vector<int>& path) {
  const int l = static_cast<int>(path.size());
  if (l >= g.depth()) throw ModelError("consume: path length must be below the tree depth");
  ObsHistory prefix = 0;
  for (int o : path) {
    if (o < 0 || o >= g.num_observations) throw ModelError("consume: observation index out of range");
    prefix = extend_history(prefix, g.num_observations, o);
  }
  SubTreePolicy out;
  out.agent = g.agent;
  out.num_observations = g.num_observations;
  for (int k = 0; k + l < g.depth(); ++k) {
    const std::uint64_t width = num_histories(g.num_observations, k);
    const auto& src = g.levels[static_cast<std::size_t>(k + l)];
    out.levels.emplace_back(src.begin() + static_cast<std::ptrdiff_t>(prefix * width),
                            src.begin() + static_cast<std::ptrdiff_t>((prefix + 1) * width));
  }
  return out;
}

namespace detail {

inline double evaluate_subtree_at(const DecPomdpModel& m, int s, const JointSubTreePolicy& g, int level,
                                  const JointHistory& prefix) {
  const int n = m.num_agents();
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parts[i] = g[i].levels[level][prefix[i]];
  const int ja = m.joint_actions().encode(parts);
  double v = m.reward(s, ja);
  if (level + 1 == g[0].depth()) return v;
  JointHistory child(static_cast<std::size_t>(n));
  for (int jo = 0; jo < m.num_joint_observations(); ++jo) {
    for (int i = 0; i < n; ++i)
      child[i] = extend_history(prefix[i], m.num_observations(i), m.joint_observations().component(jo, i));
    for (int s2 = 0; s2 < m.num_states(); ++s2) {
      const double p = m.transition(s, ja, s2) * m.observation(ja, s2, jo);
      if (p == 0.0) continue;
      v += p * evaluate_subtree_at(m, s2, g, level + 1, child);
    }
  }
  return v;
}

}  // namespace detail

/// V(s, γ) for a joint sub-tree policy.
inline double evaluate_subtree(const DecPomdpModel& m, int s, const JointSubTreePolicy& g) {
  if (g.empty() || g[0].depth() < 1) throw ModelError("evaluate_subtree: depth must be >= 1");
  return detail::evaluate_subtree_at(m, s, g, 0, JointHistory(g.size(), 0));
}

/// Per-agent policy trees of a full joint policy.
inline JointSubTreePolicy as_subtrees(const DecPomdpModel& m, const PastJointPolicy& pi) {
  JointSubTreePolicy out;
  for (int i = 0; i < m.num_agents(); ++i) {
    SubTreePolicy g;
    g.agent = i;
    g.num_observations = m.num_observations(i);
    for (const auto& stage : pi.stages) g.levels.push_back(stage[i].actions);
    out.push_back(std::move(g));
  }
  return out;
}

namespace detail {

inline double policy_value_at(const DecPomdpModel& m, const JointSubTreePolicy& g, int level,
                              const JointHistory& prefix, const std::vector<double>& mass) {
  const int n = m.num_agents();
  const int ns = m.num_states();
  std::vector<int> parts(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) parts[i] = g[i].levels[level][prefix[i]];
  const int ja = m.joint_actions().encode(parts);
  double v = 0.0;
  for (int s = 0; s < ns; ++s) v += mass[s] * m.reward(s, ja);
  if (level + 1 == g[0].depth()) return v;
  std::vector<double> pred(static_cast<std::size_t>(ns), 0.0), next(static_cast<std::size_t>(ns));
  for (int s = 0; s < ns; ++s)
    if (mass[s] != 0.0)
      for (int s2 = 0; s2 < ns; ++s2) pred[s2] += mass[s] * m.transition(s, ja, s2);
  JointHistory child(static_cast<std::size_t>(n));
  for (int jo = 0; jo < m.num_joint_observations(); ++jo) {
    double total = 0.0;
    for (int s2 = 0; s2 < ns; ++s2) total += (next[s2] = pred[s2] * m.observation(ja, s2, jo));
    if (total <= 0.0) continue;
    for (int i = 0; i < n; ++i)
      child[i] = extend_history(prefix[i], m.num_observations(i), m.joint_observations().component(jo, i));
    v += policy_value_at(m, g, level + 1, child, next);
  }
  return v;
}

}  // namespace detail

/// Full-policy value V(π) by depth-first recursion over joint histories,
/// carrying unnormalized state masses.
inline double policy_value(const DecPomdpModel& m, const PastJointPolicy& pi) {
  if (pi.depth() == 0) return 0.0;
  const auto g = as_subtrees(m, pi);
  const auto b0 = m.initial_belief().probs();
  return detail::policy_value_at(m, g, 0, JointHistory(g.size(), 0), std::vector<double>(b0.begin(), b0.end()));
}

/// Number of deterministic joint policies for horizon h (exact).
inline boost::multiprecision::cpp_int count_joint_policies(const DecPomdpModel& m, int h) {
  boost::multiprecision::cpp_int total = 1;
  for (int i = 0; i < m.num_agents(); ++i) {
    boost::multiprecision::cpp_int histories = 0, width = 1;
    for (int t = 0; t < h; ++t) {
      histories += width;
      width *= m.num_observations(i);
    }
    boost::multiprecision::cpp_int per_agent = 1;
    for (boost::multiprecision::cpp_int k = 0; k < histories; ++k) per_agent *= m.num_actions(i);
    total *= per_agent;
  }
  return total;
}

/// Decision rule with every history mapped to action 0.
inline DecisionRule default_rule(const DecPomdpModel& m, int agent, int stage) {
  DecisionRule r;
  r.agent = agent;
  r.stage = stage;
  r.actions.assign(num_histories(m.num_observations(agent), stage), 0);
  return r;
}

namespace detail {

inline void write_tree(std::ostream& out, const DecPomdpModel& m, const SubTreePolicy& g, int level, ObsHistory oh) {
  const int i = g.agent;
  out << m.action_names(i)[g.levels[level][oh]];
  if (level + 1 == g.depth()) return;
  out << " ( ";
  for (int o = 0; o < g.num_observations; ++o) {
    if (o) out << " , ";
    out << m.observation_names(i)[o] << ": ";
    write_tree(out, m, g, level + 1, extend_history(oh, g.num_observations, o));
  }
  out << " )";
}

}  // namespace detail

/// One line per agent: `agent <i>: action ( o1: subtree , o2: subtree , ... )`.
inline std::string policy_to_tree_text(const DecPomdpModel& m, const PastJointPolicy& pi) {
  std::ostringstream out;
  const auto trees = as_subtrees(m, pi);
  for (const auto& g : trees) {
    out << "agent " << g.agent << ": ";
    if (g.depth() > 0) detail::write_tree(out, m, g, 0, 0);
    out << "\n";
  }
  return out.str();
}

/// CSV `agent,stage,obs_history,action`; histories are observation names joined by '/'.
inline std::string policy_to_csv(const DecPomdpModel& m, const PastJointPolicy& pi) {
  std::ostringstream out;
  out << "agent,stage,obs_history,action\n";
  for (int i = 0; i < m.num_agents(); ++i)
    for (int t = 0; t < pi.depth(); ++t) {
      const auto& rule = pi.stages[t][i];
      for (ObsHistory oh = 0; oh < rule.actions.size(); ++oh) {
        out << i << "," << t << ",";
        const auto obs = history_observations(oh, m.num_observations(i), t);
        for (std::size_t k = 0; k < obs.size(); ++k) out << (k ? "/" : "") << m.observation_names(i)[obs[k]];
        out << "," << m.action_names(i)[rule.actions[oh]] << "\n";
      }
    }
  return out.str();
}

/// Inverse of `policy_to_csv`.
inline PastJointPolicy policy_from_csv(const DecPomdpModel& m, const std::string& csv) {
  auto index_of = [](const std::vector<std::string>& names, const std::string& name) {
    for (std::size_t k = 0; k < names.size(); ++k)
      if (names[k] == name) return static_cast<int>(k);
    throw ModelError("policy csv: unknown name '" + name + "'");
  };
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  PastJointPolicy pi;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (line.back() == ',') f.push_back("");
    if (f.size() != 4) throw ModelError("policy csv: expected 4 fields in '" + line + "'");
    const int i = std::stoi(f[0]);
    const int t = std::stoi(f[1]);
    if (i < 0 || i >= m.num_agents() || t < 0) throw ModelError("policy csv: bad agent or stage");
    while (pi.depth() <= t) {
      JointDecisionRule rule;
      for (int k = 0; k < m.num_agents(); ++k) rule.push_back(default_rule(m, k, pi.depth()));
      pi.stages.push_back(std::move(rule));
    }
    ObsHistory oh = 0;
    int length = 0;
    std::stringstream hs(f[2]);
    std::string obs;
    while (std::getline(hs, obs, '/')) {
      oh = extend_history(oh, m.num_observations(i), index_of(m.observation_names(i), obs));
      ++length;
    }
    if (length != t) throw ModelError("policy csv: history length does not match stage");
    pi.stages[t][i].actions.at(oh) = index_of(m.action_names(i), f[3]);
  }
  return pi;
}

}  // namespace gmaa
