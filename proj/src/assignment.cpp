#include "mma/assignment.hpp"

#include <algorithm>
#include <limits>

namespace mma {

std::vector<int> max_weight_assignment(const std::vector<std::vector<double>>& weight) {
  const std::size_t rows = weight.size();
  const std::size_t cols = rows ? weight.front().size() : 0;
  const std::size_t n = std::max(rows, cols);
  std::vector<int> result(rows, -1);
  if (n == 0) return result;

  // Minimize negated weights on a zero-padded square matrix; 1-based potentials.
  auto cost = [&](std::size_t i, std::size_t j) {
    return (i < rows && j < cols) ? -weight[i][j] : 0.0;
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1), v(n + 1);
  std::vector<std::size_t> p(n + 1), way(n + 1);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      std::size_t i0 = p[j0], j1 = 0;
      double delta = inf;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  for (std::size_t j = 1; j <= n; ++j)
    if (p[j] && p[j] - 1 < rows && j - 1 < cols) result[p[j] - 1] = static_cast<int>(j - 1);
  return result;
}

double assignment_total(const std::vector<std::vector<double>>& weight, const std::vector<int>& rows_to_cols) {
  double total = 0;
  for (std::size_t i = 0; i < rows_to_cols.size(); ++i)
    if (rows_to_cols[i] >= 0) total += weight[i][static_cast<std::size_t>(rows_to_cols[i])];
  return total;
}

}  // namespace mma
