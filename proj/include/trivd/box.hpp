#pragma once

#include <algorithm>
#include <array>
#include <cmath>

#include "trivd/error.hpp"

namespace trivd {

/// Axis-aligned box in corner form (x0,y0) top-left, (x1,y1) bottom-right.
template <typename Scalar>
struct BasicBox {
  Scalar x0{}, y0{}, x1{}, y1{};

  static BasicBox from_xywh(Scalar x, Scalar y, Scalar w, Scalar h) {
    return BasicBox{x, y, x + w, y + h};
  }

  Scalar width() const { return x1 - x0; }
  Scalar height() const { return y1 - y0; }
  Scalar area() const { return width() * height(); }

  bool valid() const {
    return std::isfinite(x0) && std::isfinite(y0) && std::isfinite(x1) &&
           std::isfinite(y1) && x0 <= x1 && y0 <= y1;
  }

  std::array<Scalar, 4> coords() const { return {x0, y0, x1, y1}; }
  static BasicBox from_coords(const std::array<Scalar, 4>& c) {
    return BasicBox{c[0], c[1], c[2], c[3]};
  }

  friend bool operator==(const BasicBox&, const BasicBox&) = default;
};

using Box = BasicBox<double>;

template <typename Scalar>
void require_valid(const BasicBox<Scalar>& b) {
  if (!b.valid()) throw ValidationError("invalid box (need finite x0<=x1, y0<=y1)");
}

template <typename Scalar>
Scalar intersection_area(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar w = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const Scalar h = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  return (w > 0 && h > 0) ? w * h : Scalar(0);
}

/// Tightest box enclosing both.
template <typename Scalar>
BasicBox<Scalar> hull(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  return {std::min(a.x0, b.x0), std::min(a.y0, b.y0), std::max(a.x1, b.x1),
          std::max(a.y1, b.y1)};
}

/// IoU; zero whenever the union has no area.
template <typename Scalar>
Scalar iou(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  return uni > 0 ? inter / uni : Scalar(0);
}

/// Generalized IoU: IoU - |C \ (A u B)| / |C| with C the enclosing hull.
/// Degenerate inputs stay finite: a zero-area hull yields plain IoU (= 0).
template <typename Scalar>
Scalar giou(const BasicBox<Scalar>& a, const BasicBox<Scalar>& b) {
  const Scalar inter = intersection_area(a, b);
  const Scalar uni = a.area() + b.area() - inter;
  const Scalar io = uni > 0 ? inter / uni : Scalar(0);
  const Scalar enclosing = hull(a, b).area();
  if (!(enclosing > 0)) return io;
  return io - (enclosing - uni) / enclosing;
}

/// d giou(a, b) / d b, coordinates in (x0,y0,x1,y1) order. At the switching
/// points of min/max the derivative of the branch taken is returned.
template <typename Scalar>
std::array<Scalar, 4> giou_grad_second(const BasicBox<Scalar>& a,
                                       const BasicBox<Scalar>& b) {
  using A4 = std::array<Scalar, 4>;
  const Scalar iw = std::min(a.x1, b.x1) - std::max(a.x0, b.x0);
  const Scalar ih = std::min(a.y1, b.y1) - std::max(a.y0, b.y0);
  const bool overlap = iw > 0 && ih > 0;
  const Scalar inter = overlap ? iw * ih : Scalar(0);

  A4 d_inter{};
  if (overlap) {
    const Scalar diw_x0 = b.x0 > a.x0 ? Scalar(-1) : Scalar(0);
    const Scalar diw_x1 = b.x1 < a.x1 ? Scalar(1) : Scalar(0);
    const Scalar dih_y0 = b.y0 > a.y0 ? Scalar(-1) : Scalar(0);
    const Scalar dih_y1 = b.y1 < a.y1 ? Scalar(1) : Scalar(0);
    d_inter = {diw_x0 * ih, dih_y0 * iw, diw_x1 * ih, dih_y1 * iw};
  }
  const A4 d_area_b{-b.height(), -b.width(), b.height(), b.width()};

  const Scalar uni = a.area() + b.area() - inter;
  A4 d_uni{};
  for (int k = 0; k < 4; ++k) d_uni[k] = d_area_b[k] - d_inter[k];

  const auto c = hull(a, b);
  const Scalar cw = c.width();
  const Scalar ch = c.height();
  const Scalar enclosing = cw * ch;
  const Scalar dcw_x0 = b.x0 < a.x0 ? Scalar(-1) : Scalar(0);
  const Scalar dcw_x1 = b.x1 > a.x1 ? Scalar(1) : Scalar(0);
  const Scalar dch_y0 = b.y0 < a.y0 ? Scalar(-1) : Scalar(0);
  const Scalar dch_y1 = b.y1 > a.y1 ? Scalar(1) : Scalar(0);
  const A4 d_enc{dcw_x0 * ch, dch_y0 * cw, dcw_x1 * ch, dch_y1 * cw};

  A4 grad{};
  if (!(uni > 0)) return grad;
  for (int k = 0; k < 4; ++k) {
    // iou = I/U ; giou = iou - 1 + U/C
    grad[k] = d_inter[k] / uni - inter * d_uni[k] / (uni * uni);
    if (enclosing > 0) {
      grad[k] += d_uni[k] / enclosing -
                 uni * d_enc[k] / (enclosing * enclosing);
    }
  }
  return grad;
}

}  // namespace trivd
