#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "gmaa/errors.hpp"
#include "gmaa/joint_index.hpp"

namespace gmaa {

inline constexpr double kProbabilityTolerance = 1e-9;

/// Probability distribution over states.
class JointBelief {
 public:
  JointBelief() = default;
  explicit JointBelief(std::vector<double> probs) : probs_(std::move(probs)) {}

  static JointBelief point_mass(int num_states, int state) {
    std::vector<double> p(static_cast<std::size_t>(num_states), 0.0);
    p[static_cast<std::size_t>(state)] = 1.0;
    return JointBelief(std::move(p));
  }

  static JointBelief uniform(int num_states) {
    return JointBelief(std::vector<double>(static_cast<std::size_t>(num_states), 1.0 / num_states));
  }

  int size() const noexcept { return static_cast<int>(probs_.size()); }
  double operator[](int s) const { return probs_[static_cast<std::size_t>(s)]; }
  std::span<const double> probs() const noexcept { return probs_; }

  bool is_valid(double tol = kProbabilityTolerance) const {
    double sum = 0.0;
    for (double p : probs_) {
      if (!(p >= 0.0)) return false;
      sum += p;
    }
    return std::abs(sum - 1.0) <= tol;
  }

  bool operator==(const JointBelief&) const = default;

 private:
  std::vector<double> probs_;
};

/// Posterior of a Bayes update. `posterior` is empty when the observation is
/// impossible (likelihood 0); callers prune such branches.
struct BeliefUpdate {
  double likelihood = 0.0;
  std::optional<JointBelief> posterior;
};

/// Finite-horizon Dec-POMDP. Immutable once constructed; all identifiers are
/// interned to dense indices. Joint actions and joint observations use
/// `JointIndex` encodings with agent 0 most significant.
class DecPomdpModel {
 public:
  struct Definition {
    std::vector<std::string> states;
    std::vector<std::vector<std::string>> actions;       // per agent
    std::vector<std::vector<std::string>> observations;  // per agent
    std::vector<double> transition;   // [s][ja][s']
    std::vector<double> observation;  // [ja][s'][jo]
    std::vector<double> reward;       // [s][ja]
    std::vector<double> initial_belief;
    int horizon = 1;
    double discount = 1.0;
  };

  explicit DecPomdpModel(Definition def)
      : states_(std::move(def.states)),
        actions_(std::move(def.actions)),
        observations_(std::move(def.observations)),
        transition_(std::move(def.transition)),
        observation_(std::move(def.observation)),
        reward_(std::move(def.reward)),
        initial_belief_(std::move(def.initial_belief)),
        horizon_(def.horizon),
        discount_(def.discount) {
    if (actions_.empty() || actions_.size() != observations_.size())
      throw ModelError("model needs at least one agent with matching action/observation sets");
    std::vector<int> a_sizes, o_sizes;
    for (const auto& a : actions_) a_sizes.push_back(static_cast<int>(a.size()));
    for (const auto& o : observations_) o_sizes.push_back(static_cast<int>(o.size()));
    joint_actions_ = JointIndex(a_sizes);
    joint_observations_ = JointIndex(o_sizes);
    validate();
  }

  int num_agents() const noexcept { return static_cast<int>(actions_.size()); }
  int num_states() const noexcept { return static_cast<int>(states_.size()); }
  int num_actions(int agent) const { return static_cast<int>(actions_[agent].size()); }
  int num_observations(int agent) const { return static_cast<int>(observations_[agent].size()); }
  int num_joint_actions() const noexcept { return joint_actions_.count(); }
  int num_joint_observations() const noexcept { return joint_observations_.count(); }
  int horizon() const noexcept { return horizon_; }
  double discount() const noexcept { return discount_; }

  const JointIndex& joint_actions() const noexcept { return joint_actions_; }
  const JointIndex& joint_observations() const noexcept { return joint_observations_; }

  const std::vector<std::string>& state_names() const noexcept { return states_; }
  const std::vector<std::string>& action_names(int agent) const { return actions_[agent]; }
  const std::vector<std::string>& observation_names(int agent) const { return observations_[agent]; }

  double transition(int s, int ja, int s_next) const { return transition_[t_index(s, ja, s_next)]; }
  double observation(int ja, int s_next, int jo) const { return observation_[o_index(ja, s_next, jo)]; }
  double reward(int s, int ja) const {
    return reward_[static_cast<std::size_t>(s) * num_joint_actions() + ja];
  }
  const JointBelief& initial_belief() const noexcept { return initial_belief_; }

  const std::vector<double>& transition_tensor() const noexcept { return transition_; }
  const std::vector<double>& observation_tensor() const noexcept { return observation_; }
  const std::vector<double>& reward_tensor() const noexcept { return reward_; }

  /// Copy of this model planning over a different horizon.
  DecPomdpModel with_horizon(int h) const {
    DecPomdpModel copy = *this;
    if (h < 1) throw ModelError("horizon must be >= 1");
    copy.horizon_ = h;
    return copy;
  }

  /// Pr(o | b, a) and the posterior over next states.
  BeliefUpdate belief_update(const JointBelief& b, int ja, int jo) const {
    const int n = num_states();
    std::vector<double> post(static_cast<std::size_t>(n), 0.0);
    for (int s = 0; s < n; ++s) {
      const double bs = b[s];
      if (bs == 0.0) continue;
      for (int s2 = 0; s2 < n; ++s2) post[s2] += bs * transition(s, ja, s2);
    }
    double likelihood = 0.0;
    for (int s2 = 0; s2 < n; ++s2) {
      post[s2] *= observation(ja, s2, jo);
      likelihood += post[s2];
    }
    BeliefUpdate result;
    result.likelihood = likelihood;
    if (likelihood > 0.0) {
      for (double& p : post) p /= likelihood;
      result.posterior = JointBelief(std::move(post));
    }
    return result;
  }

  /// R(b, a) = sum_s b(s) R(s, a).
  double expected_reward(const JointBelief& b, int ja) const {
    double r = 0.0;
    for (int s = 0; s < num_states(); ++s) r += b[s] * reward(s, ja);
    return r;
  }

  bool operator==(const DecPomdpModel&) const = default;

 private:
  std::size_t t_index(int s, int ja, int s_next) const {
    return (static_cast<std::size_t>(s) * num_joint_actions() + ja) * num_states() + s_next;
  }
  std::size_t o_index(int ja, int s_next, int jo) const {
    return (static_cast<std::size_t>(ja) * num_states() + s_next) * num_joint_observations() + jo;
  }

  void validate() {
    const int ns = num_states();
    const int na = num_joint_actions();
    const int no = num_joint_observations();
    if (ns < 1) throw ModelError("model needs at least one state");
    if (horizon_ < 1) throw ModelError("horizon must be >= 1");
    if (transition_.size() != static_cast<std::size_t>(ns) * na * ns)
      throw ModelError("transition tensor has wrong size");
    if (observation_.size() != static_cast<std::size_t>(na) * ns * no)
      throw ModelError("observation tensor has wrong size");
    if (reward_.size() != static_cast<std::size_t>(ns) * na) throw ModelError("reward tensor has wrong size");
    if (initial_belief_.size() != ns) throw ModelError("initial belief has wrong size");
    if (!initial_belief_.is_valid()) throw ModelError("initial belief is not a distribution");
    for (int s = 0; s < ns; ++s)
      for (int a = 0; a < na; ++a) {
        double sum = 0.0;
        for (int s2 = 0; s2 < ns; ++s2) {
          const double p = transition(s, a, s2);
          if (!(p >= 0.0 && p <= 1.0 + kProbabilityTolerance))
            throw ModelError("transition probability out of range");
          sum += p;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
          throw ModelError("transition row (" + states_[s] + ", joint action " + std::to_string(a) +
                           ") sums to " + std::to_string(sum));
      }
    for (int a = 0; a < na; ++a)
      for (int s2 = 0; s2 < ns; ++s2) {
        double sum = 0.0;
        for (int o = 0; o < no; ++o) {
          const double p = observation(a, s2, o);
          if (!(p >= 0.0 && p <= 1.0 + kProbabilityTolerance))
            throw ModelError("observation probability out of range");
          sum += p;
        }
        if (std::abs(sum - 1.0) > kProbabilityTolerance)
          throw ModelError("observation row (joint action " + std::to_string(a) + ", " + states_[s2] +
                           ") sums to " + std::to_string(sum));
      }
    for (double r : reward_)
      if (!std::isfinite(r)) throw ModelError("reward is not finite");
  }

  std::vector<std::string> states_;
  std::vector<std::vector<std::string>> actions_;
  std::vector<std::vector<std::string>> observations_;
  std::vector<double> transition_;
  std::vector<double> observation_;
  std::vector<double> reward_;
  JointBelief initial_belief_;
  int horizon_ = 1;
  double discount_ = 1.0;
  JointIndex joint_actions_;
  JointIndex joint_observations_;
};

inline BeliefUpdate belief_update(const DecPomdpModel& m, const JointBelief& b, int ja, int jo) {
  return m.belief_update(b, ja, jo);
}

inline double expected_reward(const DecPomdpModel& m, const JointBelief& b, int ja) {
  return m.expected_reward(b, ja);
}

}  // namespace gmaa
