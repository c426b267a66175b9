#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "trivd/error.hpp"

namespace trivd {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_product(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    os << (i ? "," : "") << shape[i];
  }
  os << ']';
  return os.str();
}

/// Dense row-major n-dimensional array of finite values.
///
/// Storage is an Eigen column vector so that element-wise arithmetic can be
/// written as Eigen expressions over data(). Reshapes only rewrite the shape;
/// the flat element order never changes.
template <typename Scalar>
class BasicTensor {
 public:
  using Storage = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor() : shape_{0} {}

  BasicTensor(Shape shape, Storage data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    validate();
  }

  BasicTensor(Shape shape, const std::vector<Scalar>& data)
      : BasicTensor(std::move(shape),
                    Storage(Eigen::Map<const Storage>(
                        data.data(), static_cast<Eigen::Index>(data.size())))) {}

  static BasicTensor constant(Shape shape, Scalar value) {
    const auto n = static_cast<Eigen::Index>(shape_product(shape));
    return BasicTensor(std::move(shape), Storage::Constant(n, value));
  }

  static BasicTensor zeros(Shape shape) {
    return constant(std::move(shape), Scalar(0));
  }

  /// Builds a tensor by evaluating fn(flat_index) for every element.
  template <typename Fn>
  static BasicTensor generate(Shape shape, Fn&& fn) {
    Storage data(static_cast<Eigen::Index>(shape_product(shape)));
    for (Eigen::Index i = 0; i < data.size(); ++i) {
      data[i] = fn(static_cast<std::size_t>(i));
    }
    return BasicTensor(std::move(shape), std::move(data));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  const Storage& data() const { return data_; }

  std::size_t offset(std::initializer_list<std::size_t> index) const {
    if (index.size() != shape_.size()) {
      throw ShapeError("index rank " + std::to_string(index.size()) +
                       " does not match tensor rank " +
                       std::to_string(shape_.size()));
    }
    std::size_t flat = 0;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      if (i >= shape_[axis]) throw ShapeError("index out of range");
      flat = flat * shape_[axis] + i;
      ++axis;
    }
    return flat;
  }

  Scalar operator()(std::initializer_list<std::size_t> index) const {
    return data_[static_cast<Eigen::Index>(offset(index))];
  }

  Scalar operator[](std::size_t flat) const {
    return data_[static_cast<Eigen::Index>(flat)];
  }

  BasicTensor reshaped(Shape shape) const {
    if (shape_product(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " +
                       shape_string(shape));
    }
    return BasicTensor(std::move(shape), data_);
  }

  /// Same shape, new contents.
  BasicTensor with_data(Storage data) const {
    return BasicTensor(shape_, std::move(data));
  }

  friend BasicTensor operator+(const BasicTensor& a, const BasicTensor& b) {
    a.require_same_shape(b);
    return a.with_data(a.data_ + b.data_);
  }
  friend BasicTensor operator-(const BasicTensor& a, const BasicTensor& b) {
    a.require_same_shape(b);
    return a.with_data(a.data_ - b.data_);
  }
  friend BasicTensor operator*(Scalar s, const BasicTensor& a) {
    return a.with_data(s * a.data_);
  }

  friend bool operator==(const BasicTensor& a, const BasicTensor& b) {
    return a.shape_ == b.shape_ && a.data_ == b.data_;
  }

 private:
  void validate() const {
    if (shape_product(shape_) != size()) {
      throw ShapeError("shape " + shape_string(shape_) + " holds " +
                       std::to_string(shape_product(shape_)) +
                       " elements but data has " + std::to_string(size()));
    }
    if (!data_.allFinite()) {
      throw NonFiniteError("tensor data contains NaN or Inf");
    }
  }

  void require_same_shape(const BasicTensor& other) const {
    if (shape_ != other.shape_) {
      throw ShapeError("shape mismatch " + shape_string(shape_) + " vs " +
                       shape_string(other.shape_));
    }
  }

  Shape shape_;
  Storage data_;
};

using Tensor = BasicTensor<double>;

// ---------------------------------------------------------------------------
// Kernels

/// Averages a [B,T,H,W,C] tensor over its spatial axes, giving [B,T,C].
template <typename Scalar>
BasicTensor<Scalar> spatial_mean(const BasicTensor<Scalar>& features) {
  if (features.rank() != 5) {
    throw ShapeError("spatial_mean expects [B,T,H,W,C], got " +
                     shape_string(features.shape()));
  }
  const std::size_t frames = features.dim(0) * features.dim(1);
  const std::size_t cells = features.dim(2) * features.dim(3);
  const std::size_t channels = features.dim(4);
  if (cells == 0) throw ShapeError("spatial_mean over an empty H*W extent");

  using Storage = typename BasicTensor<Scalar>::Storage;
  Storage out = Storage::Zero(static_cast<Eigen::Index>(frames * channels));
  const auto& in = features.data();
  for (std::size_t f = 0; f < frames; ++f) {
    for (std::size_t s = 0; s < cells; ++s) {
      const std::size_t base = (f * cells + s) * channels;
      for (std::size_t c = 0; c < channels; ++c) {
        out[static_cast<Eigen::Index>(f * channels + c)] +=
            in[static_cast<Eigen::Index>(base + c)];
      }
    }
  }
  out /= static_cast<Scalar>(cells);
  return BasicTensor<Scalar>({features.dim(0), features.dim(1), channels},
                             std::move(out));
}

/// Piecewise-linear sigmoid: clamp(x / scale + shift, 0, 1).
///
/// The defaults give the common clamp(x/6 + 1/2, 0, 1) form. Dividing by
/// `scale` rather than multiplying by its reciprocal keeps hard_sigmoid(3)
/// exactly 1.
struct HardSigmoid {
  double scale = 6.0;
  double shift = 0.5;

  template <typename Scalar>
  Scalar operator()(Scalar x) const {
    return std::clamp(x / static_cast<Scalar>(scale) + static_cast<Scalar>(shift),
                      Scalar(0), Scalar(1));
  }
};

template <typename Scalar>
Scalar hard_sigmoid(Scalar x) {
  return HardSigmoid{}(x);
}

/// Applies v * W + b along the last (channel) axis of v.
template <typename Scalar>
BasicTensor<Scalar> linear_map(const BasicTensor<Scalar>& v,
                               const BasicTensor<Scalar>& weight,
                               const BasicTensor<Scalar>& bias) {
  if (v.rank() == 0 || weight.rank() != 2 || bias.rank() != 1) {
    throw ShapeError("linear_map expects v[...,C_in], W[C_in,C_out], b[C_out]");
  }
  const std::size_t c_in = weight.dim(0);
  const std::size_t c_out = weight.dim(1);
  if (v.shape().back() != c_in || bias.dim(0) != c_out) {
    throw ShapeError("linear_map: v " + shape_string(v.shape()) + ", W " +
                     shape_string(weight.shape()) + ", b " +
                     shape_string(bias.shape()));
  }
  using RowMajor =
      Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  const auto rows = static_cast<Eigen::Index>(v.size() / c_in);
  Eigen::Map<const RowMajor> in(v.data().data(), rows,
                                static_cast<Eigen::Index>(c_in));
  Eigen::Map<const RowMajor> w(weight.data().data(),
                               static_cast<Eigen::Index>(c_in),
                               static_cast<Eigen::Index>(c_out));
  RowMajor out = in * w;
  out.rowwise() += bias.data().transpose();

  Shape shape = v.shape();
  shape.back() = c_out;
  using Storage = typename BasicTensor<Scalar>::Storage;
  return BasicTensor<Scalar>(
      std::move(shape),
      Storage(Eigen::Map<const Storage>(out.data(), out.size())));
}

/// Numerically stable log(sum(exp(v))).
template <typename Derived>
typename Derived::Scalar log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  using Scalar = typename Derived::Scalar;
  if (v.size() == 0) return -std::numeric_limits<Scalar>::infinity();
  const Scalar peak = v.maxCoeff();
  return peak + std::log((v.array() - peak).exp().sum());
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> softmax(
    const Eigen::MatrixBase<Derived>& v) {
  using Vec = Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1>;
  if (v.size() == 0) return Vec();
  Vec e = (v.array() - v.maxCoeff()).exp().matrix();
  return e / e.sum();
}

template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> log_softmax(
    const Eigen::MatrixBase<Derived>& v) {
  return (v.array() - log_sum_exp(v)).matrix();
}

template <typename Scalar>
BasicTensor<Scalar> softmax(const BasicTensor<Scalar>& v) {
  if (v.rank() != 1) throw ShapeError("softmax expects a rank-1 tensor");
  return v.with_data(softmax(v.data()));
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

/// Central-difference gradient of a scalar function of a tensor.
template <typename Scalar, typename Fn>
BasicTensor<Scalar> finite_diff_grad(Fn&& fn, const BasicTensor<Scalar>& x,
                                     Scalar eps) {
  if (!(eps > 0)) throw ValidationError("finite_diff_grad: eps must be > 0");
  using Storage = typename BasicTensor<Scalar>::Storage;
  Storage grad(x.data().size());
  Storage probe = x.data();
  for (Eigen::Index i = 0; i < probe.size(); ++i) {
    const Scalar saved = probe[i];
    probe[i] = saved + eps;
    const Scalar up = fn(x.with_data(probe));
    probe[i] = saved - eps;
    const Scalar down = fn(x.with_data(probe));
    probe[i] = saved;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NonFiniteError("finite_diff_grad: non-finite value at coordinate " +
                           std::to_string(i));
    }
    grad[i] = (up - down) / (2 * eps);
  }
  return x.with_data(std::move(grad));
}

struct GradCheckEntry {
  std::size_t index;
  double analytic;
  double numeric;
};

struct GradCheckReport {
  double max_abs_err = 0;
  double max_rel_err = 0;
  std::vector<GradCheckEntry> per_coordinate;
};

/// Relative error with a floor on the denominator so coordinates whose true
/// gradient is ~0 are judged by absolute error.
inline double relative_error(double analytic, double numeric,
                             double floor = 1e-6) {
  const double denom =
      std::max({std::abs(analytic), std::abs(numeric), floor});
  return std::abs(analytic - numeric) / denom;
}

/// Compares an analytic gradient against central differences of fn at x.
template <typename Scalar, typename Fn>
GradCheckReport grad_check(Fn&& fn, const BasicTensor<Scalar>& analytic,
                           const BasicTensor<Scalar>& x, Scalar eps = 1e-5) {
  if (analytic.shape() != x.shape()) {
    throw ShapeError("grad_check: analytic gradient shape " +
                     shape_string(analytic.shape()) + " vs x " +
                     shape_string(x.shape()));
  }
  const auto numeric = finite_diff_grad(std::forward<Fn>(fn), x, eps);
  GradCheckReport report;
  report.per_coordinate.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = analytic[i];
    const double n = numeric[i];
    report.max_abs_err = std::max(report.max_abs_err, std::abs(a - n));
    report.max_rel_err = std::max(report.max_rel_err, relative_error(a, n));
    report.per_coordinate.push_back({i, a, n});
  }
  return report;
}

}  // namespace trivd
