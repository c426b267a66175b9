#include "trivd/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "trivd/error.hpp"

namespace trivd {

namespace {

// Shortest-augmenting-path Hungarian method with potentials, O(n^2 m) for an
// n x m matrix with n <= m. Returns the column of each row.
std::vector<std::size_t> solve_wide(const Eigen::MatrixXd& a) {
  const auto n = static_cast<std::size_t>(a.rows());
  const auto m = static_cast<std::size_t>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> owner(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(static_cast<Eigen::Index>(i0 - 1),
                             static_cast<Eigen::Index>(j - 1)) -
                           u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<std::size_t> col_of(n, 0);
  for (std::size_t j = 1; j <= m; ++j) {
    if (owner[j] != 0) col_of[owner[j] - 1] = j - 1;
  }
  return col_of;
}

void require_finite(const Eigen::MatrixXd& cost) {
  if (!cost.allFinite()) throw NonFiniteError("assignment costs must be finite");
}

Eigen::MatrixXd select(const Eigen::MatrixXd& cost,
                       const std::vector<std::size_t>& rows,
                       const std::vector<std::size_t>& cols) {
  Eigen::MatrixXd out(static_cast<Eigen::Index>(rows.size()),
                      static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      out(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          cost(static_cast<Eigen::Index>(rows[r]),
               static_cast<Eigen::Index>(cols[c]));
    }
  }
  return out;
}

}  // namespace

std::vector<std::optional<std::size_t>> solve_assignment_raw(
    const Eigen::MatrixXd& cost) {
  require_finite(cost);
  const auto rows = static_cast<std::size_t>(cost.rows());
  const auto cols = static_cast<std::size_t>(cost.cols());
  std::vector<std::optional<std::size_t>> out(rows);
  if (rows == 0 || cols == 0) return out;
  if (rows <= cols) {
    const auto col_of = solve_wide(cost);
    for (std::size_t i = 0; i < rows; ++i) out[i] = col_of[i];
  } else {
    const auto row_of = solve_wide(cost.transpose());
    for (std::size_t j = 0; j < cols; ++j) out[row_of[j]] = j;
  }
  return out;
}

double optimal_assignment_cost(const Eigen::MatrixXd& cost) {
  const auto match = solve_assignment_raw(cost);
  double total = 0;
  for (std::size_t i = 0; i < match.size(); ++i) {
    if (match[i]) {
      total += cost(static_cast<Eigen::Index>(i),
                    static_cast<Eigen::Index>(*match[i]));
    }
  }
  return total;
}

std::vector<MatchedPair> solve_assignment(const Eigen::MatrixXd& cost) {
  require_finite(cost);
  const auto n_rows = static_cast<std::size_t>(cost.rows());
  const auto n_cols = static_cast<std::size_t>(cost.cols());
  std::vector<MatchedPair> pairs;
  if (n_rows == 0 || n_cols == 0) return pairs;

  const double optimum = optimal_assignment_cost(cost);
  const double tol = 1e-9 * std::max(1.0, std::abs(optimum));

  // Decide rows in order, taking the smallest column (or, failing that,
  // leaving the row unmatched) that still completes to an optimal matching.
  std::vector<std::size_t> free_cols(n_cols);
  for (std::size_t j = 0; j < n_cols; ++j) free_cols[j] = j;
  double committed = 0;
  for (std::size_t i = 0; i < n_rows && !free_cols.empty(); ++i) {
    std::vector<std::size_t> later_rows;
    for (std::size_t r = i + 1; r < n_rows; ++r) later_rows.push_back(r);

    bool placed = false;
    for (std::size_t k = 0; k < free_cols.size() && !placed; ++k) {
      const std::size_t c = free_cols[k];
      std::vector<std::size_t> rest = free_cols;
      rest.erase(rest.begin() + static_cast<std::ptrdiff_t>(k));
      const double here =
          cost(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      const double tail = optimal_assignment_cost(select(cost, later_rows, rest));
      if (std::abs(committed + here + tail - optimum) <= tol) {
        pairs.push_back({i, c, here});
        committed += here;
        free_cols = std::move(rest);
        placed = true;
      }
    }
    if (!placed && later_rows.size() < free_cols.size()) {
      // Skipping would shrink the matching below min(rows, cols).
      throw Error("assignment tie-break failed to reproduce the optimum");
    }
  }
  return pairs;
}

}  // namespace trivd
