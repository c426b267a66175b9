#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "trivd/box.hpp"
#include "trivd/tensor.hpp"

namespace testing {

using Rng = std::mt19937_64;

inline double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline std::size_t pick(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline trivd::Tensor random_tensor(Rng& rng, trivd::Shape shape, double lo = -1,
                                   double hi = 1) {
  return trivd::Tensor::generate(std::move(shape),
                                 [&](std::size_t) { return uniform(rng, lo, hi); });
}

inline Eigen::MatrixXd random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c,
                                     double lo = 0, double hi = 1) {
  Eigen::MatrixXd m(r, c);
  for (Eigen::Index i = 0; i < r; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(rng, lo, hi);
  }
  return m;
}

inline trivd::Box random_box(Rng& rng, double extent = 100) {
  const double x = uniform(rng, 0, extent);
  const double y = uniform(rng, 0, extent);
  return trivd::Box::from_xywh(x, y, uniform(rng, 1, extent / 2),
                               uniform(rng, 1, extent / 2));
}

/// Minimum-cost assignment of min(rows, cols) pairs by enumerating
/// permutations of the longer side.
inline double brute_force_min_cost(const Eigen::MatrixXd& cost) {
  const bool flip = cost.rows() > cost.cols();
  const Eigen::MatrixXd c = flip ? Eigen::MatrixXd(cost.transpose()) : cost;
  std::vector<Eigen::Index> cols(static_cast<std::size_t>(c.cols()));
  std::iota(cols.begin(), cols.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double total = 0;
    for (Eigen::Index r = 0; r < c.rows(); ++r) total += c(r, cols[r]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return c.rows() == 0 ? 0.0 : best;
}

}  // namespace testing
