#pragma once

// Discrete Legendre transform between node fields on two grids.
//
// For each target node y the discrete supremum max_x (x . y - u(x)) picks a
// source node x_k. The value is then refined with the local quadratic model
// at x_k (central gradient g, 9-point Hessian H):
//
//   u~(y) = x_k . y - u(x_k) + 1/2 (y - g)^T H^{-1} (y - g),
//   Du~(y) = x_k + H^{-1} (y - g),
//
// which is exact for quadratic u. A target node is valid only when the model
// is available at x_k and its maximiser stays within one cell of x_k;
// elsewhere (the collar outside the discrete gradient image) it is invalid.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "lagflow/error.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/parallel.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/state_io.hpp"

namespace lagflow {

/// Node values on a grid with a validity mask.
struct DualField {
  FlowGrid grid;
  std::vector<double> values;
  std::vector<char> valid;
  std::vector<Vec2> argmax;  // refined maximiser, i.e. the gradient of the transform
  std::vector<int> source_node;  // discrete maximiser node on the source grid
  double t = 0.0;

  bool is_valid(int id) const noexcept { return valid[static_cast<std::size_t>(id)] != 0; }
  bool is_valid(int i, int j) const noexcept { return grid.in_range(i, j) && is_valid(grid.id(i, j)); }

  /// Valid with all eight neighbours valid, so second differences exist.
  bool has_stencil(int id) const noexcept {
    if (!is_valid(id)) return false;
    for (Offset d : detail::kNeighbours) {
      if (!is_valid(grid.col(id) + d.di, grid.row(id) + d.dj)) return false;
    }
    return true;
  }

  std::size_t valid_count() const noexcept {
    return static_cast<std::size_t>(std::count(valid.begin(), valid.end(), char{1}));
  }

  SymMatrix2 hessian(int id) const {
    if (!has_stencil(id)) throw Error(ErrorKind::InvalidArgument, "node lacks a valid 9-point neighbourhood");
    return detail::hessian_at(values, grid, id);
  }

  Vec2 central_gradient(int id) const {
    const int i = grid.col(id);
    const int j = grid.row(id);
    const double h2 = 2.0 * grid.spacing();
    auto v = [&](int a, int b) { return values[static_cast<std::size_t>(grid.id(a, b))]; };
    return {(v(i + 1, j) - v(i - 1, j)) / h2, (v(i, j + 1) - v(i, j - 1)) / h2};
  }
};

namespace detail {

inline Vec2 central_gradient(std::span<const double> u, const FlowGrid& g, int id) {
  const int i = g.col(id);
  const int j = g.row(id);
  const double h2 = 2.0 * g.spacing();
  auto v = [&](int a, int b) { return u[static_cast<std::size_t>(g.id(a, b))]; };
  return {(v(i + 1, j) - v(i - 1, j)) / h2, (v(i, j + 1) - v(i, j - 1)) / h2};
}

/// candidates: nodes entering the discrete supremum (ascending id).
/// modelled(id): whether the local quadratic model exists at a source node.
template <typename Modelled>
DualField conjugate(std::span<const double> u, const FlowGrid& source, const std::vector<int>& candidates,
                    Modelled&& modelled, const FlowGrid& target, double t, int threads) {
  DualField out;
  out.grid = target;
  out.t = t;
  const auto n = static_cast<std::size_t>(target.size());
  out.values.assign(n, 0.0);
  out.valid.assign(n, 0);
  out.argmax.assign(n, Vec2{});
  out.source_node.assign(n, -1);

  std::vector<int> nodes;
  for (int id = 0; id < target.size(); ++id) {
    if (target.classify(id) != NodeClass::Exterior) nodes.push_back(id);
  }
  std::vector<Vec2> xs(candidates.size());
  for (std::size_t c = 0; c < candidates.size(); ++c) xs[c] = source.position(candidates[c]);

  parallel_for(nodes.size(), threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const auto id = static_cast<std::size_t>(nodes[q]);
      const Vec2 y = target.position(nodes[q]);
      double best = -std::numeric_limits<double>::infinity();
      std::size_t arg = 0;
      for (std::size_t c = 0; c < candidates.size(); ++c) {
        const double v = dot(xs[c], y) - u[static_cast<std::size_t>(candidates[c])];
        if (v > best) {
          best = v;
          arg = c;
        }
      }
      const int k = candidates[arg];
      out.source_node[id] = k;
      out.values[id] = best;
      out.argmax[id] = xs[arg];
      if (!modelled(k)) continue;
      const SymMatrix2 H = hessian_at(u, source, k);
      if (!(H.a11 > 0.0) || !(H.det() > 0.0)) continue;
      const Vec2 r = y - central_gradient(u, source, k);
      const Vec2 step = H.inverse() * r;
      if (std::max(std::abs(step.x), std::abs(step.y)) > source.spacing()) continue;
      out.values[id] = best + 0.5 * dot(r, step);
      out.argmax[id] = xs[arg] + step;
      out.valid[id] = 1;
    }
  });
  return out;
}

}  // namespace detail

/// Transform of a flow state on its grid onto the target grid.
inline DualField legendre_transform(const FlowState& state, const FlowGrid& source, const FlowGrid& target,
                                    int threads = 1) {
  std::vector<int> candidates;
  for (int id = 0; id < source.size(); ++id) {
    if (source.classify(id) != NodeClass::Exterior) candidates.push_back(id);
  }
  return detail::conjugate(
      state.u, source, candidates, [&](int k) { return source.classify(k) == NodeClass::Interior; }, target,
      state.t, threads);
}

/// Transform of a dual field back onto a grid; only valid nodes take part.
inline DualField legendre_transform(const DualField& dual, const FlowGrid& target, int threads = 1) {
  std::vector<int> candidates;
  for (int id = 0; id < dual.grid.size(); ++id) {
    if (dual.is_valid(id)) candidates.push_back(id);
  }
  if (candidates.empty()) throw Error(ErrorKind::InvalidArgument, "dual field has no valid nodes");
  return detail::conjugate(
      dual.values, dual.grid, candidates, [&](int k) { return dual.has_stencil(k); }, target, dual.t, threads);
}

/// Source nodes away from the one-cell boundary collar: Interior with all
/// eight neighbours Interior.
inline bool collar_free(const FlowGrid& grid, int id) {
  if (grid.classify(id) != NodeClass::Interior) return false;
  for (Offset d : detail::kNeighbours) {
    if (grid.classify(grid.col(id) + d.di, grid.row(id) + d.dj) != NodeClass::Interior) return false;
  }
  return true;
}

struct LegendreCheck {
  double max_error = 0.0;
  std::size_t compared = 0;   // nodes entering the maximum
  std::size_t skipped = 0;    // eligible nodes without a valid counterpart
};

/// max |u** - u| over collar-free nodes where the double transform is valid.
inline LegendreCheck involution_error(const FlowState& state, const FlowGrid& grid, const DualField& dual,
                                      int threads = 1) {
  const DualField back = legendre_transform(dual, grid, threads);
  LegendreCheck out;
  for (int id : grid.interior()) {
    if (!collar_free(grid, id)) continue;
    if (!back.is_valid(id)) {
      ++out.skipped;
      continue;
    }
    ++out.compared;
    out.max_error = std::max(out.max_error, std::abs(back.values[static_cast<std::size_t>(id)] -
                                                     state.u[static_cast<std::size_t>(id)]));
  }
  return out;
}

namespace detail {
inline int nearest_node(const FlowGrid& g, Vec2 x) {
  const int i = static_cast<int>(std::lround((x.x - g.origin().x) / g.spacing()));
  const int j = static_cast<int>(std::lround((x.y - g.origin().y) / g.spacing()));
  return g.in_range(i, j) ? g.id(i, j) : -1;
}
}  // namespace detail

/// Compares the eigenvalues of D^2 u~ at dual nodes with the reciprocals of
/// those of D^2 u at the matched source node (nearest to Du~).
inline LegendreCheck hessian_reciprocity(const FlowState& state, const FlowGrid& grid, const DualField& dual) {
  LegendreCheck out;
  for (int id = 0; id < dual.grid.size(); ++id) {
    if (!dual.has_stencil(id)) continue;
    const int x = detail::nearest_node(grid, dual.argmax[static_cast<std::size_t>(id)]);
    if (x < 0 || grid.classify(x) != NodeClass::Interior) {
      ++out.skipped;
      continue;
    }
    const auto mu = eigenvalues(dual.hessian(id));
    const auto lambda = eigenvalues(detail::hessian_at(state.u, grid, x));
    if (!(lambda[0] > 0.0)) throw Error(ErrorKind::NotPositiveDefinite, "source Hessian is not convex");
    ++out.compared;
    out.max_error = std::max({out.max_error, std::abs(mu[0] - 1.0 / lambda[1]), std::abs(mu[1] - 1.0 / lambda[0])});
  }
  return out;
}

/// max |Du~(Du(x)) - x| over collar-free source nodes, with Du~ at the
/// off-grid point Du(x) from the nearest stencil-complete dual node plus a
/// Hessian correction. Both gradients are central differences.
inline LegendreCheck gradient_inversion(const FlowState& state, const FlowGrid& grid, const DualField& dual) {
  LegendreCheck out;
  for (int id : grid.interior()) {
    if (!collar_free(grid, id)) continue;
    const Vec2 y = detail::central_gradient(state.u, grid, id);
    const int k = detail::nearest_node(dual.grid, y);
    if (k < 0 || !dual.has_stencil(k)) {
      ++out.skipped;
      continue;
    }
    const Vec2 dy = dual.central_gradient(k) + dual.hessian(k) * (y - dual.grid.position(k));
    ++out.compared;
    out.max_error = std::max(out.max_error, norm(dy - grid.position(id)));
  }
  return out;
}

/// Residual of the dual equation  du~/dt = F~(lambda(D^2 u~)) + f(Du~), using
/// du~/dt (y) = -du/dt (x) at the matched source node. Evaluated at dual
/// nodes with a complete valid neighbourhood whose matched node is Interior.
inline LegendreCheck dual_flow_residual(const FlowState& state, const FlowGrid& grid, const DualField& dual,
                                        const Tau& op, const ForcingFunction& f) {
  if (!state.has_rates()) throw Error(ErrorKind::InvalidArgument, "state has no cached rates");
  LegendreCheck out;
  for (int id = 0; id < dual.grid.size(); ++id) {
    if (!dual.has_stencil(id)) continue;
    const int x = dual.source_node[static_cast<std::size_t>(id)];
    if (grid.classify(x) != NodeClass::Interior) {
      ++out.skipped;
      continue;
    }
    const auto mu = eigenvalues(dual.hessian(id));
    if (!(mu[0] > 0.0)) {
      const Vec2 y = dual.grid.position(id);
      throw Error(ErrorKind::NonConvexDual, "dual Hessian eigenvalue " + std::to_string(mu[0]) + " at (" +
                                                std::to_string(y.x) + ", " + std::to_string(y.y) + ")");
    }
    const double rhs = -(op.term(1.0 / mu[0]) + op.term(1.0 / mu[1])) + f(dual.argmax[static_cast<std::size_t>(id)]);
    ++out.compared;
    out.max_error = std::max(out.max_error, std::abs(-state.udot[static_cast<std::size_t>(x)] - rhs));
  }
  return out;
}

inline void write_dual(std::ostream& os, const DualField& dual) {
  write_node_values(os, kDualTag, dual.grid, dual.values, dual.t, [&](int id) { return dual.is_valid(id); });
}

}  // namespace lagflow
