#pragma once

// Cartesian node set over a convex domain.
//
// A node is Interior when it and its eight neighbours lie inside the domain,
// Boundary when it lies inside but is not Interior, and Exterior otherwise.
// Every Boundary node carries its nearest boundary projection and the
// one-sided stencil used to impose the oblique condition there.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/vec2.hpp"

namespace lagflow {

enum class NodeClass : std::uint8_t { Exterior, Boundary, Interior };

/// Integer grid offset.
struct Offset {
  int di = 0;
  int dj = 0;
  friend constexpr bool operator==(Offset, Offset) = default;
};

/// Contribution of one node value to a linear functional.
struct NodeWeight {
  int node = -1;
  Vec2 weight;
};

struct BoundaryStencil {
  BoundaryPoint projection;
  /// Grid step pointing into the domain, best aligned with the inward normal.
  Offset step;
  /// Interior node whose 9-point Hessian is used at this boundary node.
  int hessian_node = -1;
  /// The tangential derivative is taken centrally at node + tangent_anchor * step.
  int tangent_anchor = 0;
  /// Du at the projection as a linear combination of node values, ascending node id.
  std::vector<NodeWeight> gradient_weights;
};

class FlowGrid {
 public:
  FlowGrid() = default;

  int nx() const noexcept { return nx_; }
  int ny() const noexcept { return ny_; }
  int size() const noexcept { return nx_ * ny_; }
  double spacing() const noexcept { return spacing_; }
  Vec2 origin() const noexcept { return origin_; }

  int id(int i, int j) const noexcept { return j * nx_ + i; }
  int col(int id) const noexcept { return id % nx_; }
  int row(int id) const noexcept { return id / nx_; }
  bool in_range(int i, int j) const noexcept { return i >= 0 && j >= 0 && i < nx_ && j < ny_; }
  Vec2 position(int id) const noexcept { return {origin_.x + col(id) * spacing_, origin_.y + row(id) * spacing_}; }
  Vec2 position(int i, int j) const noexcept { return {origin_.x + i * spacing_, origin_.y + j * spacing_}; }

  NodeClass classify(int id) const noexcept { return cls_[static_cast<std::size_t>(id)]; }
  NodeClass classify(int i, int j) const noexcept {
    return in_range(i, j) ? cls_[static_cast<std::size_t>(id(i, j))] : NodeClass::Exterior;
  }
  bool active(int i, int j) const noexcept { return classify(i, j) != NodeClass::Exterior; }

  /// Node ids in ascending order.
  const std::vector<int>& interior() const noexcept { return interior_; }
  /// Node ids in ascending arc parameter of their boundary projection.
  const std::vector<int>& boundary() const noexcept { return boundary_; }
  const std::vector<BoundaryStencil>& stencils() const noexcept { return stencils_; }
  /// Position of a node in boundary(), or -1.
  int boundary_slot(int id) const noexcept { return slot_[static_cast<std::size_t>(id)]; }

  std::size_t active_count() const noexcept { return interior_.size() + boundary_.size(); }

  friend FlowGrid build_grid(const ConvexDomain& omega, double spacing);

 private:
  int nx_ = 0;
  int ny_ = 0;
  double spacing_ = 0.0;
  Vec2 origin_;
  std::vector<NodeClass> cls_;
  std::vector<int> interior_;
  std::vector<int> boundary_;
  std::vector<BoundaryStencil> stencils_;
  std::vector<int> slot_;
};

namespace detail {

inline constexpr std::array<Offset, 8> kNeighbours{
    {{1, 0}, {1, 1}, {0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}}};

inline bool choose_stencil(const FlowGrid& g, int id, BoundaryStencil& st) {
  const int i = g.col(id);
  const int j = g.row(id);
  const Vec2 nu = st.projection.inward_normal;

  // Prefer steps whose second node is Interior (its Hessian stencil then
  // avoids the boundary node itself); among those, the best aligned.
  double best = -1.0;
  bool best_deep = false;
  for (Offset d : kNeighbours) {
    if (!g.active(i + d.di, j + d.dj)) continue;
    const double align = dot(Vec2{double(d.di), double(d.dj)}, nu) / std::hypot(d.di, d.dj);
    if (align <= 0.0) continue;
    const bool deep = g.classify(i + 2 * d.di, j + 2 * d.dj) == NodeClass::Interior;
    if ((deep && !best_deep) || (deep == best_deep && align > best)) {
      best = align;
      best_deep = deep;
      st.step = d;
    }
  }
  if (best <= 0.0) return false;

  const Offset d = st.step;
  if (best_deep) {
    st.hessian_node = g.id(i + 2 * d.di, j + 2 * d.dj);
  } else {
    // Nearest Interior node, preferring ones not adjacent to the boundary node.
    double best_far = std::numeric_limits<double>::infinity();
    double best_any = std::numeric_limits<double>::infinity();
    int far_node = -1;
    int any_node = -1;
    for (int node : g.interior()) {
      const int di = g.col(node) - i;
      const int dj = g.row(node) - j;
      const double dist = std::hypot(di, dj);
      if (std::max(std::abs(di), std::abs(dj)) >= 2 && dist < best_far) {
        best_far = dist;
        far_node = node;
      }
      if (dist < best_any) {
        best_any = dist;
        any_node = node;
      }
    }
    st.hessian_node = far_node >= 0 && best_far <= 3.0 ? far_node : any_node;
    if (st.hessian_node < 0) return false;
  }

  const Offset t{-d.dj, d.di};
  for (int k = 0; k <= 2; ++k) {
    const int ai = i + k * d.di;
    const int aj = j + k * d.dj;
    if (g.active(ai, aj) && g.active(ai + t.di, aj + t.dj) && g.active(ai - t.di, aj - t.dj)) {
      st.tangent_anchor = k;
      return true;
    }
  }
  return false;
}

template <typename Value>
SymMatrix2 nine_point_hessian(const FlowGrid& g, int id, Value&& v) {
  const int i = g.col(id);
  const int j = g.row(id);
  const double h2 = g.spacing() * g.spacing();
  const double c = v(i, j);
  return {(v(i + 1, j) - 2.0 * c + v(i - 1, j)) / h2,
          (v(i + 1, j + 1) - v(i + 1, j - 1) - v(i - 1, j + 1) + v(i - 1, j - 1)) / (4.0 * h2),
          (v(i, j + 1) - 2.0 * c + v(i, j - 1)) / h2};
}

/// Du at the boundary projection of boundary node b:
///   Du(p) = Du(b) + H (p - b),
/// with H the 9-point Hessian at the stencil's Hessian node, the component of
/// Du(b) along the step from a one-sided difference corrected by 1/2 d^T H d,
/// and the across component from a central difference at the anchor node,
/// shifted back to b with H. Exact on quadratics.
template <typename Value>
Vec2 stencil_gradient(const FlowGrid& g, int b, const BoundaryStencil& st, Value&& v) {
  const SymMatrix2 H = nine_point_hessian(g, st.hessian_node, v);
  const int bi = g.col(b);
  const int bj = g.row(b);
  const double hs = g.spacing();
  const Offset s = st.step;
  const Vec2 d{s.di * hs, s.dj * hs};
  const double len = norm(d);
  const Vec2 dn = d / len;
  const Vec2 tn = perp(dn);

  const double along = (v(bi + s.di, bj + s.dj) - v(bi, bj)) / len - 0.5 * H.quad(d) / len;
  const int ai = bi + st.tangent_anchor * s.di;
  const int aj = bj + st.tangent_anchor * s.dj;
  const double across = (v(ai - s.dj, aj + s.di) - v(ai + s.dj, aj - s.di)) / (2.0 * len) -
                        dot(H * (double(st.tangent_anchor) * d), tn);
  return along * dn + across * tn + H * (st.projection.position - g.position(b));
}

/// Expands stencil_gradient into per-node weights by probing with indicator fields.
inline std::vector<NodeWeight> gradient_weights(const FlowGrid& g, int b, const BoundaryStencil& st) {
  std::vector<int> support;
  auto collect = [&](int i, int j) {
    support.push_back(g.id(i, j));
    return 0.0;
  };
  stencil_gradient(g, b, st, collect);
  std::sort(support.begin(), support.end());
  support.erase(std::unique(support.begin(), support.end()), support.end());
  std::vector<NodeWeight> out;
  for (int node : support) {
    const Vec2 w = stencil_gradient(g, b, st, [&](int i, int j) { return g.id(i, j) == node ? 1.0 : 0.0; });
    if (w.x != 0.0 || w.y != 0.0) out.push_back({node, w});
  }
  return out;
}

}  // namespace detail

inline FlowGrid build_grid(const ConvexDomain& omega, double spacing) {
  if (!(spacing > 0.0) || !std::isfinite(spacing)) throw Error(ErrorKind::InvalidArgument, "spacing must be positive");
  const auto [a1, a2] = omega.semi_axes();
  const double m1 = std::ceil(a1 / spacing) + 1.0;
  const double m2 = std::ceil(a2 / spacing) + 1.0;
  if (m1 > 4096.0 || m2 > 4096.0) throw Error(ErrorKind::InvalidArgument, "grid would exceed 8193 nodes per axis");

  FlowGrid g;
  g.spacing_ = spacing;
  g.nx_ = 2 * static_cast<int>(m1) + 1;
  g.ny_ = 2 * static_cast<int>(m2) + 1;
  g.origin_ = {omega.center().x - m1 * spacing, omega.center().y - m2 * spacing};

  const auto n = static_cast<std::size_t>(g.size());
  std::vector<char> inside(n, 0);
  for (int id = 0; id < g.size(); ++id) inside[static_cast<std::size_t>(id)] = omega.contains(g.position(id)) ? 1 : 0;

  g.cls_.assign(n, NodeClass::Exterior);
  g.slot_.assign(n, -1);
  std::size_t inside_count = 0;
  for (int j = 0; j < g.ny_; ++j) {
    for (int i = 0; i < g.nx_; ++i) {
      const int id = g.id(i, j);
      if (!inside[static_cast<std::size_t>(id)]) continue;
      ++inside_count;
      bool full = true;
      for (Offset d : detail::kNeighbours) {
        const int ni = i + d.di;
        const int nj = j + d.dj;
        if (!g.in_range(ni, nj) || !inside[static_cast<std::size_t>(g.id(ni, nj))]) {
          full = false;
          break;
        }
      }
      g.cls_[static_cast<std::size_t>(id)] = full ? NodeClass::Interior : NodeClass::Boundary;
      (full ? g.interior_ : g.boundary_).push_back(id);
    }
  }
  if (inside_count < 9 || g.interior_.empty()) {
    throw Error(ErrorKind::GridTooCoarse, "spacing " + std::to_string(spacing) + " leaves " +
                                              std::to_string(inside_count) + " nodes inside the domain and " +
                                              std::to_string(g.interior_.size()) + " interior nodes");
  }

  std::vector<BoundaryStencil> stencils(g.boundary_.size());
  for (std::size_t k = 0; k < g.boundary_.size(); ++k) {
    stencils[k].projection = omega.project_to_boundary(g.position(g.boundary_[k]));
  }
  std::vector<std::size_t> order(g.boundary_.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    return stencils[x].projection.arc_parameter < stencils[y].projection.arc_parameter;
  });
  std::vector<int> sorted_ids(order.size());
  g.stencils_.resize(order.size());
  for (std::size_t k = 0; k < order.size(); ++k) {
    sorted_ids[k] = g.boundary_[order[k]];
    g.stencils_[k] = stencils[order[k]];
  }
  g.boundary_ = std::move(sorted_ids);
  for (std::size_t k = 0; k < g.boundary_.size(); ++k) g.slot_[static_cast<std::size_t>(g.boundary_[k])] = static_cast<int>(k);

  for (std::size_t k = 0; k < g.boundary_.size(); ++k) {
    if (!detail::choose_stencil(g, g.boundary_[k], g.stencils_[k])) {
      throw Error(ErrorKind::GridTooCoarse,
                  "no inward one-sided stencil at boundary node " + std::to_string(g.boundary_[k]));
    }
    g.stencils_[k].gradient_weights = detail::gradient_weights(g, g.boundary_[k], g.stencils_[k]);
  }
  return g;
}

}  // namespace lagflow
