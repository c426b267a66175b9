#pragma once

#include <cstddef>
#include <optional>
#include <vector>

#include <Eigen/Dense>

namespace trivd {

struct MatchedPair {
  std::size_t row = 0;
  std::size_t col = 0;
  double cost = 0;

  friend bool operator==(const MatchedPair&, const MatchedPair&) = default;
};

/// Minimum-cost injective matching of size min(rows, cols).
///
/// Among all optimal matchings the lexicographically smallest pair list
/// (sorted by row) is returned, so results do not depend on solver internals.
/// Costs must be finite; an empty matrix yields no pairs.
std::vector<MatchedPair> solve_assignment(const Eigen::MatrixXd& cost);

/// Column assigned to each row (nullopt when unmatched); no tie-breaking
/// guarantees beyond optimality.
std::vector<std::optional<std::size_t>> solve_assignment_raw(
    const Eigen::MatrixXd& cost);

/// Sum of the costs of an optimal matching.
double optimal_assignment_cost(const Eigen::MatrixXd& cost);

}  // namespace trivd
