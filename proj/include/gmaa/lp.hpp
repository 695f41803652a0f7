#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace gmaa {

/// Dense tableau simplex for `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`
/// (the origin is feasible). Bland's rule, so it terminates on degenerate
/// problems. Returns +inf when unbounded.
inline double simplex_maximize(const std::vector<std::vector<double>>& A, const std::vector<double>& b,
                               const std::vector<double>& c, double eps = 1e-12) {
  const std::size_t m = A.size();
  const std::size_t n = c.size();
  // Tableau columns: n structural, m slack, then rhs.
  const std::size_t cols = n + m + 1;
  std::vector<double> t((m + 1) * cols, 0.0);
  auto at = [&](std::size_t r, std::size_t col) -> double& { return t[r * cols + col]; };
  std::vector<std::size_t> basis(m);
  for (std::size_t r = 0; r < m; ++r) {
    for (std::size_t j = 0; j < n; ++j) at(r, j) = A[r][j];
    at(r, n + r) = 1.0;
    at(r, cols - 1) = b[r];
    basis[r] = n + r;
  }
  for (std::size_t j = 0; j < n; ++j) at(m, j) = -c[j];

  while (true) {
    std::size_t enter = cols;
    for (std::size_t j = 0; j + 1 < cols; ++j)
      if (at(m, j) < -eps) {
        enter = j;
        break;
      }
    if (enter == cols) break;
    std::size_t leave = m;
    double best_ratio = std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < m; ++r) {
      const double a = at(r, enter);
      if (a <= eps) continue;
      const double ratio = at(r, cols - 1) / a;
      if (leave == m || ratio < best_ratio - eps || (ratio <= best_ratio + eps && basis[r] < basis[leave])) {
        best_ratio = ratio;
        leave = r;
      }
    }
    if (leave == m) return std::numeric_limits<double>::infinity();
    const double pivot = at(leave, enter);
    for (std::size_t j = 0; j < cols; ++j) at(leave, j) /= pivot;
    for (std::size_t r = 0; r <= m; ++r) {
      if (r == leave) continue;
      const double f = at(r, enter);
      if (f == 0.0) continue;
      for (std::size_t j = 0; j < cols; ++j) at(r, j) -= f * at(leave, j);
    }
    basis[leave] = enter;
  }
  return at(m, cols - 1);
}

}  // namespace gmaa
