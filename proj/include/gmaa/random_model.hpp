#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "gmaa/model.hpp"

namespace gmaa {

struct RandomModelSizes {
  int agents = 2;
  int states = 2;
  int actions = 2;       // per agent
  int observations = 2;  // per agent
};

namespace detail {

inline void fill_distribution(std::mt19937_64& rng, std::vector<double>& out, std::size_t offset, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) sum += (out[offset + k] = u(rng) + 1e-3);
  for (std::size_t k = 0; k < n; ++k) out[offset + k] /= sum;
}

}  // namespace detail

/// Deterministic random Dec-POMDP: dense rows drawn uniformly and normalized,
/// rewards uniform in [-10, 10].
inline DecPomdpModel random_model(std::uint64_t seed, const RandomModelSizes& sizes, int horizon = 1) {
  if (sizes.agents < 1 || sizes.states < 1 || sizes.actions < 1 || sizes.observations < 1)
    throw ModelError("random_model: all sizes must be >= 1");
  std::mt19937_64 rng(seed);
  DecPomdpModel::Definition def;
  for (int s = 0; s < sizes.states; ++s) def.states.push_back("s" + std::to_string(s));
  for (int i = 0; i < sizes.agents; ++i) {
    std::vector<std::string> a, o;
    for (int k = 0; k < sizes.actions; ++k) a.push_back("a" + std::to_string(k));
    for (int k = 0; k < sizes.observations; ++k) o.push_back("o" + std::to_string(k));
    def.actions.push_back(a);
    def.observations.push_back(o);
  }
  std::size_t na = 1, no = 1;
  for (int i = 0; i < sizes.agents; ++i) {
    na *= static_cast<std::size_t>(sizes.actions);
    no *= static_cast<std::size_t>(sizes.observations);
  }
  const auto ns = static_cast<std::size_t>(sizes.states);

  def.transition.assign(ns * na * ns, 0.0);
  for (std::size_t row = 0; row < ns * na; ++row) detail::fill_distribution(rng, def.transition, row * ns, ns);
  def.observation.assign(na * ns * no, 0.0);
  for (std::size_t row = 0; row < na * ns; ++row) detail::fill_distribution(rng, def.observation, row * no, no);
  std::uniform_real_distribution<double> r(-10.0, 10.0);
  def.reward.resize(ns * na);
  for (double& x : def.reward) x = r(rng);
  def.initial_belief.assign(ns, 0.0);
  detail::fill_distribution(rng, def.initial_belief, 0, ns);
  def.horizon = horizon;
  return DecPomdpModel(std::move(def));
}

}  // namespace gmaa
