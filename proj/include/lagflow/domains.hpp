#pragma once

// Uniformly convex planar domains described by a concave defining function
//
//   h(p) = k0 * (1 - ((p1 - c1)/a1)^2 - ((p2 - c2)/a2)^2),   k0 = sqrt(a1 a2) / 2
//
// which is positive inside, zero on the boundary and negative outside. For a
// disc (a1 = a2 = R) this is (R^2 - |p - c|^2) / (2R), so |Dh| = 1 on the
// boundary exactly. For a proper ellipse |Dh| on the boundary ranges over
// [2 k0 / max(a), 2 k0 / min(a)].

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "lagflow/error.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/vec2.hpp"

namespace lagflow {

enum class DomainKind { Disc, AxisEllipse };

struct BoundaryPoint {
  Vec2 position;
  Vec2 inward_normal;
  double arc_parameter = 0.0;  // in [0, 2 pi)
};

class ConvexDomain {
 public:
  static ConvexDomain disc(Vec2 center, double radius) {
    if (!(radius > 0.0) || !std::isfinite(radius)) throw Error(ErrorKind::InvalidArgument, "disc radius must be positive");
    return ConvexDomain(DomainKind::Disc, center, radius, radius);
  }

  static ConvexDomain ellipse(Vec2 center, double a1, double a2) {
    if (!(a1 > 0.0) || !(a2 > 0.0) || !std::isfinite(a1) || !std::isfinite(a2)) {
      throw Error(ErrorKind::InvalidArgument, "ellipse semi-axes must be positive");
    }
    return ConvexDomain(DomainKind::AxisEllipse, center, a1, a2);
  }

  DomainKind kind() const noexcept { return kind_; }
  Vec2 center() const noexcept { return center_; }
  /// Semi-axes along x and y; both equal the radius for a disc.
  std::pair<double, double> semi_axes() const noexcept { return {a1_, a2_}; }
  /// Value of h at the center.
  double scale() const noexcept { return k0_; }

  double h(Vec2 p) const noexcept {
    const double qx = (p.x - center_.x) / a1_;
    const double qy = (p.y - center_.y) / a2_;
    return k0_ * (1.0 - qx * qx - qy * qy);
  }

  Vec2 h_grad(Vec2 p) const noexcept {
    return {-2.0 * k0_ * (p.x - center_.x) / (a1_ * a1_), -2.0 * k0_ * (p.y - center_.y) / (a2_ * a2_)};
  }

  SymMatrix2 h_hess(Vec2 /*p*/) const noexcept { return {-2.0 * k0_ / (a1_ * a1_), 0.0, -2.0 * k0_ / (a2_ * a2_)}; }

  /// Uniform concavity constant: D^2 h <= -theta I.
  double theta() const noexcept { return 2.0 * k0_ / std::max(a1_ * a1_, a2_ * a2_); }

  /// (min, max) of |Dh| over the boundary.
  std::pair<double, double> grad_bounds() const noexcept {
    return {2.0 * k0_ / std::max(a1_, a2_), 2.0 * k0_ / std::min(a1_, a2_)};
  }

  bool contains(Vec2 p) const noexcept { return h(p) > 0.0; }

  double diameter() const noexcept { return 2.0 * std::max(a1_, a2_); }

  /// Axis-aligned bounding box (lower-left, upper-right).
  std::pair<Vec2, Vec2> bounding_box() const noexcept {
    return {{center_.x - a1_, center_.y - a2_}, {center_.x + a1_, center_.y + a2_}};
  }

  /// max over the closed domain of k . x
  double support(Vec2 k) const noexcept { return dot(k, center_) + std::hypot(k.x * a1_, k.y * a2_); }

  Vec2 boundary_position(double t) const noexcept {
    return {center_.x + a1_ * std::cos(t), center_.y + a2_ * std::sin(t)};
  }

  BoundaryPoint boundary_point(double t) const noexcept {
    t = wrap_angle(t);
    const Vec2 p = boundary_position(t);
    const Vec2 g = h_grad(p);
    return {p, g / norm(g), t};
  }

  /// Nearest boundary point in the Euclidean sense.
  BoundaryPoint project_to_boundary(Vec2 p) const {
    const Vec2 q = p - center_;
    if (kind_ == DomainKind::Disc) {
      const double t = (q.x == 0.0 && q.y == 0.0) ? 0.0 : std::atan2(q.y, q.x);
      return boundary_point(t);
    }
    // Coarse scan picks the basin of the global minimiser, Newton polishes
    // the stationarity condition (E(t) - p) . E'(t) = 0.
    constexpr int kScan = 128;
    double best_t = 0.0;
    double best_d = std::numeric_limits<double>::infinity();
    for (int k = 0; k < kScan; ++k) {
      const double t = 2.0 * kPi * k / kScan;
      const Vec2 e = boundary_position(t) - p;
      const double d = dot(e, e);
      if (d < best_d) {
        best_d = d;
        best_t = t;
      }
    }
    double t = best_t;
    const double bracket = 2.0 * kPi / kScan;
    for (int it = 0; it < 50; ++it) {
      const double c = std::cos(t);
      const double s = std::sin(t);
      const Vec2 e{a1_ * c - q.x, a2_ * s - q.y};
      const Vec2 de{-a1_ * s, a2_ * c};
      const Vec2 dde{-a1_ * c, -a2_ * s};
      const double g = dot(e, de);
      const double dg = dot(de, de) + dot(e, dde);
      double step = dg > 0.0 ? -g / dg : -std::copysign(0.25 * bracket, g);
      step = std::clamp(step, -bracket, bracket);
      t += step;
      if (std::abs(step) < 1e-15 * (1.0 + std::abs(t))) return boundary_point(t);
    }
    throw Error(ErrorKind::ProjectionDiverged, "boundary projection did not converge in 50 iterations");
  }

  /// m points with arc parameters 2 pi k / m.
  std::vector<BoundaryPoint> sample_boundary(int m) const {
    if (m < 3) throw Error(ErrorKind::InvalidArgument, "need at least 3 boundary samples");
    std::vector<BoundaryPoint> out;
    out.reserve(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) out.push_back(boundary_point(2.0 * kPi * k / m));
    return out;
  }

  std::string describe() const {
    if (kind_ == DomainKind::Disc) {
      return "disc(center=(" + std::to_string(center_.x) + "," + std::to_string(center_.y) + "), radius=" +
             std::to_string(a1_) + ")";
    }
    return "ellipse(center=(" + std::to_string(center_.x) + "," + std::to_string(center_.y) + "), semi_axes=(" +
           std::to_string(a1_) + "," + std::to_string(a2_) + "))";
  }

 private:
  ConvexDomain(DomainKind kind, Vec2 center, double a1, double a2)
      : kind_(kind), center_(center), a1_(a1), a2_(a2), k0_(0.5 * std::sqrt(a1 * a2)) {}

  static double wrap_angle(double t) noexcept {
    t = std::fmod(t, 2.0 * kPi);
    if (t < 0.0) t += 2.0 * kPi;
    if (t >= 2.0 * kPi) t = 0.0;
    return t;
  }

  DomainKind kind_;
  Vec2 center_;
  double a1_;
  double a2_;
  double k0_;
};

}  // namespace lagflow
