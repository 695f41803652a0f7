#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <vector>

#include "gmaa/lp.hpp"

namespace gmaa {

/// Value vector over states.
using ValueVector = std::vector<double>;

/// Largest margin by which `v` exceeds every vector in `others` at some belief:
/// max_b min_w (v - w)·b over the probability simplex. +inf when `others` is empty.
inline double max_advantage(const ValueVector& v, const std::vector<const ValueVector*>& others) {
  if (others.empty()) return std::numeric_limits<double>::infinity();
  const std::size_t ns = v.size();
  if (ns == 1) {
    double worst = std::numeric_limits<double>::infinity();
    for (const auto* w : others) worst = std::min(worst, v[0] - (*w)[0]);
    return worst;
  }
  // Substitute b_last = 1 - sum(other b) and shift the margin by its value at
  // b = e_last so the origin is feasible: d_w·b = d_w[last] + sum_k (d_w[k] - d_w[last]) b_k.
  double shift = std::numeric_limits<double>::infinity();
  for (const auto* w : others) shift = std::min(shift, v[ns - 1] - (*w)[ns - 1]);
  std::vector<std::vector<double>> A;
  std::vector<double> rhs;
  for (const auto* w : others) {
    std::vector<double> row(ns, 0.0);  // ns-1 belief coordinates plus the shifted margin
    const double d_last = v[ns - 1] - (*w)[ns - 1];
    for (std::size_t k = 0; k + 1 < ns; ++k) row[k] = -((v[k] - (*w)[k]) - d_last);
    row[ns - 1] = 1.0;
    A.push_back(std::move(row));
    rhs.push_back(d_last - shift);
  }
  A.push_back(std::vector<double>(ns, 1.0));
  A.back()[ns - 1] = 0.0;
  rhs.push_back(1.0);
  std::vector<double> c(ns, 0.0);
  c[ns - 1] = 1.0;
  return simplex_maximize(A, rhs, c) + shift;
}

/// Minimal subset of `vectors` with the same upper surface over the belief
/// simplex. Duplicates collapse to one, pointwise-dominated vectors go first,
/// then each remaining vector (in lexicographic order) is kept only if some
/// belief makes it better than all other surviving vectors by more than `tol`.
inline std::vector<ValueVector> prune_vectors(std::vector<ValueVector> vectors, double tol = 1e-9) {
  std::sort(vectors.begin(), vectors.end());
  vectors.erase(std::unique(vectors.begin(), vectors.end()), vectors.end());

  std::vector<bool> alive(vectors.size(), true);
  for (std::size_t i = 0; i < vectors.size(); ++i)
    for (std::size_t j = 0; j < vectors.size() && alive[i]; ++j) {
      if (i == j || !alive[j]) continue;
      bool dominated = true;
      for (std::size_t s = 0; s < vectors[i].size() && dominated; ++s) dominated = vectors[j][s] >= vectors[i][s];
      if (dominated) alive[i] = false;
    }

  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (!alive[i]) continue;
    std::vector<const ValueVector*> others;
    for (std::size_t j = 0; j < vectors.size(); ++j)
      if (j != i && alive[j]) others.push_back(&vectors[j]);
    if (max_advantage(vectors[i], others) <= tol) alive[i] = false;
  }

  std::vector<ValueVector> out;
  for (std::size_t i = 0; i < vectors.size(); ++i)
    if (alive[i]) out.push_back(std::move(vectors[i]));
  return out;
}

/// max_v v·b.
inline double max_inner_product(const std::vector<ValueVector>& vectors, const std::vector<double>& b) {
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& v : vectors) {
    double x = 0.0;
    for (std::size_t s = 0; s < b.size(); ++s) x += v[s] * b[s];
    best = std::max(best, x);
  }
  return best;
}

}  // namespace gmaa
