#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmaa/cbg.hpp"
#include "gmaa/cbg_solver.hpp"
#include "gmaa/heuristics.hpp"
#include "gmaa/model.hpp"
#include "gmaa/policy.hpp"

namespace gmaa {

enum class SearchVariant { full, ic, ice };

inline std::string to_string(SearchVariant v) {
  switch (v) {
    case SearchVariant::full: return "gmaa";
    case SearchVariant::ic: return "ic";
    case SearchVariant::ice: return "ice";
  }
  return "?";
}

struct SearchConfig {
  SearchVariant variant = SearchVariant::ice;
  ClusterOptions cluster;
  std::size_t node_cap = 1'000'000;  // open-list size
  double time_limit_s = 600.0;
  bool prune_open_list = true;
  /// Full/IC: last-stage games with more policies than this are solved with
  /// the branch-and-bound solver instead of enumeration.
  double last_stage_enumeration_limit = 2e5;
  /// Full/IC: refuse to enumerate more children than this for one node.
  double child_cap = 5e7;
  bool record_trace = false;
};

/// Canonical encoding of a past joint policy: the actions of every stage,
/// agent and type (in representative order), concatenated.
using PolicyEncoding = std::vector<std::uint16_t>;

struct SearchStats {
  std::string variant;
  std::string heuristic;
  int horizon = 0;
  double v_star = 0.0;
  double wallclock_s = 0.0;
  double heuristic_time_s = 0.0;
  double pe_tolerance = 0.0;
  std::vector<std::uint64_t> nodes_expanded_per_stage;   // non-placeholder selections
  std::vector<std::uint64_t> expand_calls_per_stage;      // including placeholder revisits
  std::vector<std::uint64_t> children_generated_per_stage;
  std::vector<std::uint64_t> cbgs_per_stage;
  std::vector<double> cbg_mean_raw;
  std::vector<double> cbg_mean_clustered;
  std::vector<double> cbg_max_clustered;
  std::uint64_t solver_nodes = 0;
  std::uint64_t peak_open_list = 0;
  std::uint64_t pruned_nodes = 0;
  std::uint64_t peak_live_solvers = 0;
  std::uint64_t lower_bound_updates = 0;
  int max_cluster_iterations = 0;
  std::vector<PolicyEncoding> trace;  // selected non-placeholder nodes, in order

  /// Children created at stages 0..h-2 (the ones that become search nodes).
  std::uint64_t intermediate_children() const {
    std::uint64_t n = 0;
    for (std::size_t t = 0; t + 1 < children_generated_per_stage.size(); ++t) n += children_generated_per_stage[t];
    return n;
  }

  nlohmann::json to_json() const {
    nlohmann::json sizes = nlohmann::json::array();
    for (std::size_t t = 0; t < cbg_mean_clustered.size(); ++t)
      sizes.push_back({{"stage", t},
                       {"count", cbgs_per_stage[t]},
                       {"mean_raw", cbg_mean_raw[t]},
                       {"mean_clustered", cbg_mean_clustered[t]},
                       {"max_clustered", cbg_max_clustered[t]}});
    return {{"variant", variant},
            {"heuristic", heuristic},
            {"horizon", horizon},
            {"v_star", v_star},
            {"wallclock_s", wallclock_s},
            {"heuristic_time_s", heuristic_time_s},
            {"pe_tolerance", pe_tolerance},
            {"nodes_expanded_per_stage", nodes_expanded_per_stage},
            {"expand_calls_per_stage", expand_calls_per_stage},
            {"children_generated_per_stage", children_generated_per_stage},
            {"intermediate_children", intermediate_children()},
            {"cbg_sizes_per_stage", sizes},
            {"solver_nodes", solver_nodes},
            {"peak_open_list", peak_open_list},
            {"pruned_nodes", pruned_nodes},
            {"peak_live_solvers", peak_live_solvers},
            {"lower_bound_updates", lower_bound_updates},
            {"max_cluster_iterations", max_cluster_iterations}};
  }
};

struct SearchResult {
  PastJointPolicy policy;
  double value = 0.0;
  SearchStats stats;
};

/// Node q = <φ^t, v̂>. φ^t is the parent's φ extended with `beta` over the
/// parent's game; it is reconstructed on demand from the parent chain.
struct SearchNode {
  std::shared_ptr<SearchNode> parent;
  JointCbgPolicy beta;
  int depth = 0;
  double v_hat = std::numeric_limits<double>::infinity();
  double v_past = 0.0;  // V^{0..t-1}(φ^t)
  bool placeholder = false;
  std::shared_ptr<const CollabBayesGame> cbg;
  std::unique_ptr<IncrementalCbgSolver> solver;
  PolicyEncoding encoding;
  // Ordering key. A placeholder sorts directly below its last generated child,
  // which keeps it ahead of every child it can still generate.
  int key_depth = 0;
  PolicyEncoding key_encoding;
  std::uint64_t id = 0;
};

/// Open-list order: higher v̂ first, then greater depth, then the
/// lexicographically smaller policy encoding. Returns true if a ranks above b.
struct NodeRank {
  bool operator()(const std::shared_ptr<SearchNode>& a, const std::shared_ptr<SearchNode>& b) const {
    if (a->v_hat != b->v_hat) return a->v_hat > b->v_hat;
    if (a->key_depth != b->key_depth) return a->key_depth > b->key_depth;
    if (a->key_encoding != b->key_encoding) return a->key_encoding < b->key_encoding;
    if (a->placeholder != b->placeholder) return !a->placeholder;
    return a->id < b->id;
  }
};

/// -1, 0, 1 comparison of two non-placeholder nodes under the open-list order
/// (1 means q ranks higher).
inline int node_compare(double v1, int d1, const PolicyEncoding& e1, double v2, int d2, const PolicyEncoding& e2) {
  if (v1 != v2) return v1 > v2 ? 1 : -1;
  if (d1 != d2) return d1 > d2 ? 1 : -1;
  if (e1 != e2) return e1 < e2 ? 1 : -1;
  return 0;
}

inline void append_encoding(PolicyEncoding& enc, const JointCbgPolicy& beta) {
  for (const auto& row : beta)
    for (int a : row) enc.push_back(static_cast<std::uint16_t>(a));
}

/// φ^t of a node, with one decision rule per stage (unreached histories → action 0).
inline PastJointPolicy materialize_policy(const DecPomdpModel& m, const SearchNode& node) {
  std::vector<JointDecisionRule> rev;
  for (const SearchNode* q = &node; q->parent; q = q->parent.get())
    rev.push_back(decision_rules(m, *q->parent->cbg, q->beta));
  PastJointPolicy phi;
  phi.stages.assign(rev.rbegin(), rev.rend());
  return phi;
}

class GmaaSearch {
 public:
  GmaaSearch(const DecPomdpModel& m, const QHeuristic& q, SearchConfig cfg) : m_(m), q_(q), cfg_(std::move(cfg)) {
    const auto h = static_cast<std::size_t>(m.horizon());
    stats_.variant = to_string(cfg_.variant);
    stats_.heuristic = to_string(q.kind()) + "/" + to_string(q.representation());
    stats_.horizon = m.horizon();
    stats_.heuristic_time_s = q.compute_seconds();
    stats_.pe_tolerance = cfg_.cluster.tolerance;
    stats_.nodes_expanded_per_stage.assign(h, 0);
    stats_.expand_calls_per_stage.assign(h, 0);
    stats_.children_generated_per_stage.assign(h, 0);
    stats_.cbgs_per_stage.assign(h, 0);
    stats_.cbg_mean_raw.assign(h, 0.0);
    stats_.cbg_mean_clustered.assign(h, 0.0);
    stats_.cbg_max_clustered.assign(h, 0.0);
  }

  SearchResult run() {
    if (q_.horizon() != m_.horizon()) throw ModelError("heuristic horizon does not match the model");
    start_ = std::chrono::steady_clock::now();
    const int h = m_.horizon();
    auto root = std::make_shared<SearchNode>();
    root->id = next_id_++;
    insert(root);

    std::uint64_t iterations = 0;
    while (!open_.empty()) {
      if ((++iterations & 255u) == 0) check_time();
      auto q = *open_.begin();
      open_.erase(open_.begin());
      const int t = q->depth;
      ++stats_.expand_calls_per_stage[t];
      if (!q->placeholder) {
        ++stats_.nodes_expanded_per_stage[t];
        if (cfg_.record_trace) stats_.trace.push_back(q->encoding);
      }
      if (!q->cbg) q->cbg = build_cbg(*q);

      if (cfg_.variant == SearchVariant::ice) {
        expand_incremental(q, t == h - 1);
      } else if (t == h - 1) {
        expand_last_stage(q);
      } else {
        expand_all(q);
      }
    }
    if (best_policy_.stages.empty()) throw InvariantViolation("search ended without a policy");
    SearchResult result;
    result.policy = best_policy_;
    result.value = lb_;
    stats_.v_star = lb_;
    stats_.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    for (std::size_t t = 0; t < stats_.cbgs_per_stage.size(); ++t)
      if (stats_.cbgs_per_stage[t] > 0) {
        stats_.cbg_mean_raw[t] /= static_cast<double>(stats_.cbgs_per_stage[t]);
        stats_.cbg_mean_clustered[t] /= static_cast<double>(stats_.cbgs_per_stage[t]);
      }
    result.stats = stats_;
    return result;
  }

 private:
  void check_time() const {
    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    if (elapsed > cfg_.time_limit_s) throw ResourceCapExceeded("time limit exceeded");
  }

  std::shared_ptr<const CollabBayesGame> build_cbg(const SearchNode& q) {
    CollabBayesGame b;
    if (cfg_.variant == SearchVariant::full) {
      b = cbg_from_scratch(m_, materialize_policy(m_, q), q_);
    } else if (!q.parent) {
      b = cluster_cbg(m_, initial_cbg(m_, q_), cfg_.cluster);
    } else {
      b = cluster_cbg(m_, extend_cbg(m_, *q.parent->cbg, q.beta, q_), cfg_.cluster);
    }
    const int t = b.stage;
    ++stats_.cbgs_per_stage[t];
    stats_.cbg_mean_raw[t] += b.raw_size;
    stats_.cbg_mean_clustered[t] += b.size();
    stats_.cbg_max_clustered[t] = std::max(stats_.cbg_max_clustered[t], b.size());
    stats_.max_cluster_iterations = std::max(stats_.max_cluster_iterations, b.cluster_iterations);
    return std::make_shared<const CollabBayesGame>(std::move(b));
  }

  std::shared_ptr<SearchNode> make_child(const std::shared_ptr<SearchNode>& q, const JointCbgPolicy& beta,
                                         double v_hat) {
    auto c = std::make_shared<SearchNode>();
    c->parent = q;
    c->beta = beta;
    c->depth = q->depth + 1;
    c->v_hat = v_hat;
    c->v_past = q->v_past + q->cbg->expected_immediate_reward(beta);
    c->encoding = q->encoding;
    append_encoding(c->encoding, beta);
    c->key_depth = c->depth;
    c->key_encoding = c->encoding;
    c->id = next_id_++;
    ++stats_.children_generated_per_stage[q->depth];
    return c;
  }

  void insert(const std::shared_ptr<SearchNode>& node) {
    open_.insert(node);
    stats_.peak_open_list = std::max<std::uint64_t>(stats_.peak_open_list, open_.size());
    if (open_.size() > cfg_.node_cap) throw ResourceCapExceeded("open list exceeds node cap");
  }

  void release_solver(SearchNode& q) {
    if (!q.solver) return;
    stats_.solver_nodes += q.solver->stats().nodes_expanded;
    q.solver.reset();
    --live_solvers_;
  }

  void found_policy(const std::shared_ptr<SearchNode>& parent, const JointCbgPolicy& beta, double v) {
    if (!(v > lb_)) return;
    lb_ = v;
    best_policy_ = materialize_policy(m_, *parent);
    best_policy_.stages.push_back(decision_rules(m_, *parent->cbg, beta));
    ++stats_.lower_bound_updates;
    if (!cfg_.prune_open_list) return;
    while (!open_.empty()) {
      auto last = std::prev(open_.end());
      if (!((*last)->v_hat < lb_)) break;
      release_solver(**last);
      open_.erase(last);
      ++stats_.pruned_nodes;
    }
  }

  void expand_last_stage(const std::shared_ptr<SearchNode>& q) {
    const BayesGame& g = q->cbg->game;
    if (num_cbg_policies(g) <= cfg_.last_stage_enumeration_limit) {
      JointCbgPolicy best;
      double best_v = -std::numeric_limits<double>::infinity();
      enumerate_policies(g, [&](const JointCbgPolicy& beta) {
        const double v = q->v_past + cbg_policy_value(g, beta);
        if (best.empty() || v > best_v) {
          best = beta;
          best_v = v;
        }
        return true;
      });
      stats_.children_generated_per_stage[q->depth] += static_cast<std::uint64_t>(num_cbg_policies(g));
      found_policy(q, best, best_v);
    } else {
      IncrementalCbgSolver solver(g, q->v_past);
      if (auto sol = solver.next_solution(lb_)) found_policy(q, sol->policy, sol->value);
      stats_.solver_nodes += solver.stats().nodes_expanded;
      ++stats_.children_generated_per_stage[q->depth];
    }
    q->cbg.reset();
  }

  void expand_all(const std::shared_ptr<SearchNode>& q) {
    const BayesGame& g = q->cbg->game;
    if (num_cbg_policies(g) > cfg_.child_cap) throw ResourceCapExceeded("child count exceeds cap");
    enumerate_policies(g, [&](const JointCbgPolicy& beta) {
      const double v = q->v_past + cbg_policy_value(g, beta);
      if (v >= lb_) {
        insert(make_child(q, beta, v));
      } else {
        ++stats_.children_generated_per_stage[q->depth];
      }
      return true;
    });
  }

  void expand_incremental(const std::shared_ptr<SearchNode>& q, bool last_stage) {
    if (!q->solver) {
      q->solver = std::make_unique<IncrementalCbgSolver>(q->cbg->game, q->v_past);
      ++live_solvers_;
      stats_.peak_live_solvers = std::max(stats_.peak_live_solvers, live_solvers_);
    }
    const double ub = last_stage ? q->v_hat : std::numeric_limits<double>::infinity();
    auto sol = q->solver->next_solution(lb_, ub);
    if (!sol || !(sol->value >= lb_)) {
      release_solver(*q);
      return;
    }
    if (last_stage) {
      ++stats_.children_generated_per_stage[q->depth];
      release_solver(*q);
      found_policy(q, sol->policy, sol->value);
      q->cbg.reset();
      return;
    }
    auto child = make_child(q, sol->policy, sol->value);
    insert(child);
    q->v_hat = sol->value;
    q->placeholder = true;
    q->key_depth = child->key_depth;
    q->key_encoding = child->key_encoding;
    insert(q);
  }

  const DecPomdpModel& m_;
  const QHeuristic& q_;
  SearchConfig cfg_;
  SearchStats stats_;
  std::set<std::shared_ptr<SearchNode>, NodeRank> open_;
  double lb_ = -std::numeric_limits<double>::infinity();
  PastJointPolicy best_policy_;
  std::uint64_t next_id_ = 0;
  std::uint64_t live_solvers_ = 0;
  std::chrono::steady_clock::time_point start_;
};

/// GMAA* with the chosen expansion strategy. The heuristic must be computed
/// for the same model and horizon.
/// Six-decimal rendering of a value: rounded to 1e-9 first, then truncated,
/// so 5.1908125 prints as 5.190812.
inline std::string format_value(double v) {
  const double cleaned = std::round(v * 1e9) / 1e9;
  const double truncated = std::trunc(cleaned * 1e6) / 1e6;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", truncated == 0.0 ? 0.0 : truncated);
  return buf;
}

inline SearchResult gmaa_search(const DecPomdpModel& m, const QHeuristic& q, const SearchConfig& cfg = {}) {
  return GmaaSearch(m, q, cfg).run();
}

/// Best member of a set of fully specified policies (first on ties).
inline std::pair<PastJointPolicy, double> best_joint_policy_and_value(
    const std::vector<std::pair<PastJointPolicy, double>>& children) {
  if (children.empty()) throw ModelError("best_joint_policy_and_value: empty set");
  std::size_t best = 0;
  for (std::size_t k = 1; k < children.size(); ++k)
    if (children[k].second > children[best].second) best = k;
  return children[best];
}

/// Enumerates every joint policy (canonical order: agent 0's full table
/// first, stage by stage, last entry fastest) and keeps the first best.
inline std::pair<PastJointPolicy, double> brute_force_search(const DecPomdpModel& m, double cap = 1e7) {
  const int n = m.num_agents();
  const int h = m.horizon();
  if (count_joint_policies(m, h) > boost::multiprecision::cpp_int(static_cast<std::uint64_t>(cap)))
    throw ResourceCapExceeded("brute force: joint policy count above cap");
  JointSubTreePolicy g;
  for (int i = 0; i < n; ++i) {
    SubTreePolicy p;
    p.agent = i;
    p.num_observations = m.num_observations(i);
    for (int t = 0; t < h; ++t) p.levels.emplace_back(num_histories(m.num_observations(i), t), 0);
    g.push_back(std::move(p));
  }
  const auto b0 = m.initial_belief().probs();
  const std::vector<double> mass(b0.begin(), b0.end());
  double best_v = -std::numeric_limits<double>::infinity();
  JointSubTreePolicy best;
  while (true) {
    const double v = detail::policy_value_at(m, g, 0, JointHistory(static_cast<std::size_t>(n), 0), mass);
    if (best.empty() || v > best_v) {
      best_v = v;
      best = g;
    }
    // Odometer: last agent, last stage, last history varies fastest.
    bool carry = true;
    for (int i = n - 1; i >= 0 && carry; --i)
      for (int t = h - 1; t >= 0 && carry; --t)
        for (std::size_t k = g[i].levels[t].size(); k-- > 0 && carry;) {
          if (++g[i].levels[t][k] < m.num_actions(i)) {
            carry = false;
          } else {
            g[i].levels[t][k] = 0;
          }
        }
    if (carry) break;
  }
  PastJointPolicy pi;
  for (int t = 0; t < h; ++t) {
    JointDecisionRule rule;
    for (int i = 0; i < n; ++i) rule.push_back(DecisionRule{i, t, best[i].levels[t]});
    pi.stages.push_back(std::move(rule));
  }
  return {pi, best_v};
}

}  // namespace gmaa
