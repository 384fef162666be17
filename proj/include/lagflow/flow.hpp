#pragma once

// Explicit time stepping of
//
//   du/dt = F(lambda(D^2 u)) - f(x)   in Omega,
//   h~(Du) = 0                        on the boundary of Omega,
//
// where h~ is the defining function of the target domain. Interior nodes use
// the 9-point Hessian; each Boundary node solves the scalar equation
// h~(Du(p)) = 0 for its own value, with Du extrapolated to the boundary
// projection p. The boundary gradient is exact on quadratics, so quadratic
// data matched to an ellipse pair is a discrete translating solution.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/parallel.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/vec2.hpp"

namespace lagflow {

class ForcingFunction {
 public:
  enum class Kind { Zero, Linear };

  static ForcingFunction zero() noexcept { return ForcingFunction(Kind::Zero, {}); }
  static ForcingFunction linear(Vec2 kappa) noexcept { return ForcingFunction(Kind::Linear, kappa); }

  Kind kind() const noexcept { return kind_; }
  Vec2 kappa() const noexcept { return kappa_; }

  double operator()(Vec2 x) const noexcept { return kind_ == Kind::Zero ? 0.0 : dot(kappa_, x); }
  Vec2 gradient(Vec2 /*x*/) const noexcept { return kind_ == Kind::Zero ? Vec2{} : kappa_; }
  bool concave() const noexcept { return true; }

  /// (min, max) over the closed domain.
  std::pair<double, double> extremes(const ConvexDomain& omega) const noexcept {
    if (kind_ == Kind::Zero) return {0.0, 0.0};
    return {-omega.support(-kappa_), omega.support(kappa_)};
  }

  double oscillation(const ConvexDomain& omega) const noexcept {
    const auto [lo, hi] = extremes(omega);
    return hi - lo;
  }

  /// max |Df| over the closed domain.
  double gradient_bound() const noexcept { return kind_ == Kind::Zero ? 0.0 : norm(kappa_); }

 private:
  ForcingFunction(Kind kind, Vec2 kappa) : kind_(kind), kappa_(kappa) {}

  Kind kind_;
  Vec2 kappa_;
};

/// Node values on a FlowGrid. Exterior entries of u are unused; udot and
/// slope_max cache the right-hand side of the last evaluation.
struct FlowState {
  std::vector<double> u;
  double t = 0.0;
  std::vector<double> udot;
  double slope_max = 0.0;  // max over Interior of the largest eigenvalue of F^{ij}

  bool has_rates() const noexcept { return !udot.empty() && udot.size() == u.size(); }
};

/// Samples fn at every non-Exterior node.
template <typename Fn>
FlowState sample_field(const FlowGrid& grid, Fn&& fn) {
  FlowState s;
  s.u.assign(static_cast<std::size_t>(grid.size()), 0.0);
  for (int id : grid.interior()) s.u[static_cast<std::size_t>(id)] = fn(grid.position(id));
  for (int id : grid.boundary()) s.u[static_cast<std::size_t>(id)] = fn(grid.position(id));
  return s;
}

/// u0(x) = o~ . x + 1/2 sum_i (b_i / a_i) (x_i - o_i)^2, whose gradient maps
/// the ellipse (o, a) onto the ellipse (o~, b).
struct QuadraticField {
  Vec2 source_center;
  Vec2 target_center;
  double k1 = 1.0;
  double k2 = 1.0;

  double operator()(Vec2 x) const noexcept {
    const Vec2 q = x - source_center;
    return dot(target_center, x) + 0.5 * (k1 * q.x * q.x + k2 * q.y * q.y);
  }
  Vec2 gradient(Vec2 x) const noexcept {
    const Vec2 q = x - source_center;
    return {target_center.x + k1 * q.x, target_center.y + k2 * q.y};
  }
  SymMatrix2 hessian() const noexcept { return {k1, 0.0, k2}; }
  FlowState sample(const FlowGrid& grid) const { return sample_field(grid, *this); }
};

inline QuadraticField quadratic_initial(const ConvexDomain& omega, const ConvexDomain& omega_tilde) {
  const auto [a1, a2] = omega.semi_axes();
  const auto [b1, b2] = omega_tilde.semi_axes();
  return {omega.center(), omega_tilde.center(), b1 / a1, b2 / a2};
}

namespace detail {

inline SymMatrix2 hessian_at(std::span<const double> u, const FlowGrid& g, int id) {
  return nine_point_hessian(g, id, [&](int i, int j) { return u[static_cast<std::size_t>(g.id(i, j))]; });
}

/// Du at the boundary projection of slot k, from the precomputed weights.
inline Vec2 projected_gradient(std::span<const double> u, const FlowGrid& g, std::size_t k) noexcept {
  Vec2 s{};
  for (const NodeWeight& w : g.stencils()[k].gradient_weights) s += u[static_cast<std::size_t>(w.node)] * w.weight;
  return s;
}

}  // namespace detail

/// Central second differences at an Interior node.
inline SymMatrix2 discrete_hessian(const FlowState& state, const FlowGrid& grid, int node) {
  if (node < 0 || node >= grid.size() || grid.classify(node) != NodeClass::Interior) {
    throw Error(ErrorKind::InvalidArgument, "discrete_hessian needs an Interior node");
  }
  return detail::hessian_at(state.u, grid, node);
}

/// Discrete Du at the boundary projection of a Boundary node.
inline Vec2 boundary_gradient(const FlowState& state, const FlowGrid& grid, std::size_t slot) {
  return detail::projected_gradient(state.u, grid, slot);
}

/// Hessian used at a Boundary node (the 9-point Hessian of its stencil node).
inline SymMatrix2 boundary_hessian(const FlowState& state, const FlowGrid& grid, std::size_t slot) {
  return detail::hessian_at(state.u, grid, grid.stencils()[slot].hessian_node);
}

inline double boundary_residual(const FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde) {
  double r = 0.0;
  for (std::size_t k = 0; k < grid.boundary().size(); ++k) {
    r = std::max(r, std::abs(omega_tilde.h(boundary_gradient(state, grid, k))));
  }
  return r;
}

struct BoundaryOptions {
  double tol_bc = 1e-10;
  int max_sweeps = 20;
};

struct BoundaryResult {
  double residual = 0.0;  // max |h~(Du)| over Boundary nodes after the last iteration
  int sweeps = 0;         // Newton iterations on the coupled boundary system
  std::vector<double> history;  // residual before the first iteration and after each one
};

/// Solves h~(Du(p_k)) = 0 for all Boundary values at once. Du(p_k) is affine
/// in the node values, so the Jacobian is diag(Dh~(Du)) times the fixed
/// stencil weights. The LU factors are kept between calls and refreshed when
/// the contraction rate degrades, so consecutive time steps mostly reuse them.
class BoundarySolver {
 public:
  BoundaryResult solve(FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde,
                       const BoundaryOptions& opt = {}) {
    const auto& nodes = grid.boundary();
    const std::size_t m = nodes.size();
    if (own_.size() != m) setup(grid);
    du_.resize(m);
    phi_.resize(static_cast<Eigen::Index>(m));

    BoundaryResult out;
    out.residual = refresh(state, grid, omega_tilde);
    out.history.push_back(out.residual);
    bool fresh = false;
    while (out.residual >= opt.tol_bc) {
      if (out.sweeps == opt.max_sweeps) {
        throw Error(ErrorKind::NewtonDiverged, "boundary residual " + std::to_string(out.residual) + " after " +
                                                   std::to_string(out.sweeps) + " Newton iterations");
      }
      if (!factored_ || stale_) {
        factorize(grid, omega_tilde);
        fresh = true;
      }
      const Eigen::VectorXd delta = lu_.solve(phi_);
      for (std::size_t k = 0; k < m; ++k) {
        state.u[static_cast<std::size_t>(nodes[k])] -= delta[static_cast<Eigen::Index>(k)];
      }
      ++out.sweeps;
      const double previous = out.residual;
      out.residual = refresh(state, grid, omega_tilde);
      out.history.push_back(out.residual);
      stale_ = !(out.residual <= 0.1 * previous) && !fresh;
      fresh = false;
    }
    return out;
  }

 private:
  using Matrix = Eigen::SparseMatrix<double>;

  void setup(const FlowGrid& grid) {
    const std::size_t m = grid.boundary().size();
    own_.assign(m, Vec2{});
    for (std::size_t k = 0; k < m; ++k) {
      for (const NodeWeight& w : grid.stencils()[k].gradient_weights) {
        if (w.node == grid.boundary()[k]) own_[k] = w.weight;
      }
    }
    factored_ = false;
    analysed_ = false;
  }

  double refresh(const FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde) {
    double r = 0.0;
    for (std::size_t k = 0; k < du_.size(); ++k) {
      du_[k] = detail::projected_gradient(state.u, grid, k);
      const auto i = static_cast<Eigen::Index>(k);
      phi_[i] = omega_tilde.h(du_[k]);
      r = std::max(r, std::abs(phi_[i]));
      // Derivative of the node's own equation in its own value.
      const double own = -dot(omega_tilde.h_grad(du_[k]), own_[k]);
      if (!(own > 1e-10)) {
        throw Error(ErrorKind::ObliquenessLost, "boundary Newton derivative " + std::to_string(own) + " at node " +
                                                    std::to_string(grid.boundary()[k]));
      }
    }
    return r;
  }

  void factorize(const FlowGrid& grid, const ConvexDomain& omega_tilde) {
    const std::size_t m = du_.size();
    entries_.clear();
    for (std::size_t k = 0; k < m; ++k) {
      const Vec2 beta = omega_tilde.h_grad(du_[k]);
      for (const NodeWeight& w : grid.stencils()[k].gradient_weights) {
        const int slot = grid.boundary_slot(w.node);
        if (slot >= 0) entries_.emplace_back(static_cast<Eigen::Index>(k), slot, dot(beta, w.weight));
      }
    }
    jac_.resize(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m));
    jac_.setFromTriplets(entries_.begin(), entries_.end());
    if (!analysed_) {
      lu_.analyzePattern(jac_);
      analysed_ = true;
    }
    lu_.factorize(jac_);
    if (lu_.info() != Eigen::Success) throw Error(ErrorKind::NewtonDiverged, "singular boundary Jacobian");
    factored_ = true;
    stale_ = false;
  }

  std::vector<Vec2> own_;
  std::vector<Vec2> du_;
  Eigen::VectorXd phi_;
  std::vector<Eigen::Triplet<double>> entries_;
  Matrix jac_;
  Eigen::SparseLU<Matrix> lu_;
  bool analysed_ = false;
  bool factored_ = false;
  bool stale_ = false;
};

inline BoundaryResult enforce_boundary(FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde,
                                       const BoundaryOptions& opt = {}) {
  BoundarySolver solver;
  return solver.solve(state, grid, omega_tilde, opt);
}

/// Per-node obliqueness data at the boundary projection.
struct ObliquenessSample {
  double raw = 0.0;         // <beta, nu> with beta = Dh~(Du)
  double normalized = 0.0;  // <beta, nu> / |beta|
  double identity = 0.0;    // sqrt(u^{ij} nu_i nu_j * beta^T D^2u beta)
};

inline ObliquenessSample obliqueness_at(const FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde,
                                        std::size_t slot) {
  const SymMatrix2 H = boundary_hessian(state, grid, slot);
  const Vec2 du = boundary_gradient(state, grid, slot);
  const Vec2 beta = omega_tilde.h_grad(du);
  const Vec2 nu = grid.stencils()[slot].projection.inward_normal;
  ObliquenessSample s;
  s.raw = dot(beta, nu);
  s.normalized = s.raw / norm(beta);
  if (!(H.det() > 0.0) || !(H.a11 > 0.0)) {
    throw Error(ErrorKind::SingularHessian, "boundary Hessian is not positive definite at node " +
                                                std::to_string(grid.boundary()[slot]));
  }
  s.identity = std::sqrt(H.inverse().quad(nu) * H.quad(beta));
  return s;
}

/// Minimum normalized obliqueness over Boundary nodes (no identity check).
inline double min_obliqueness(const FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < grid.boundary().size(); ++k) {
    const Vec2 beta = omega_tilde.h_grad(boundary_gradient(state, grid, k));
    m = std::min(m, dot(beta, grid.stencils()[k].projection.inward_normal) / norm(beta));
  }
  return m;
}

struct StepReport {
  double t = 0.0;
  double dt_used = 0.0;
  double c_estimate = 0.0;  // mean of udot over Interior nodes
  double osc_udot = 0.0;
  double udot_min = 0.0;
  double udot_max = 0.0;
  double min_eig = 0.0;      // smallest Hessian eigenvalue over Interior
  double max_eig = 0.0;      // largest Hessian eigenvalue over Interior
  double max_min_eig = 0.0;  // max over nodes of the node's smaller eigenvalue
  double min_max_eig = 0.0;  // min over nodes of the node's larger eigenvalue
  double min_obliqueness = 0.0;
  double boundary_residual = 0.0;
  int sweeps = 0;
};

struct StepOptions {
  double cfl = 0.5;
  double tol_bc = 1e-10;
  int max_sweeps = 20;
  int threads = 1;
};

/// Recomputes udot and slope_max at Interior nodes and fills the interior
/// fields of a report. Throws ConvexityLost on a non-convex discrete Hessian.
inline StepReport evaluate(FlowState& state, const FlowGrid& grid, const Tau& op, const ForcingFunction& f,
                           int threads = 1) {
  const auto& interior = grid.interior();
  const std::size_t n = interior.size();
  state.udot.assign(state.u.size(), 0.0);
  std::vector<double> lo(n), hi(n), slope(n);
  std::vector<char> bad(n, 0);
  parallel_for(n, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t q = begin; q < end; ++q) {
      const int id = interior[q];
      const auto l = eigenvalues(detail::hessian_at(state.u, grid, id));
      lo[q] = l[0];
      hi[q] = l[1];
      if (!(l[0] > 0.0) || !std::isfinite(l[1])) {
        bad[q] = 1;
        continue;
      }
      state.udot[static_cast<std::size_t>(id)] = op.term(l[0]) + op.term(l[1]) - f(grid.position(id));
      slope[q] = op.term_slope(l[0]);
    }
  });

  StepReport r;
  r.t = state.t;
  r.min_eig = std::numeric_limits<double>::infinity();
  r.max_eig = -std::numeric_limits<double>::infinity();
  r.max_min_eig = -std::numeric_limits<double>::infinity();
  r.min_max_eig = std::numeric_limits<double>::infinity();
  r.udot_min = std::numeric_limits<double>::infinity();
  r.udot_max = -std::numeric_limits<double>::infinity();
  double sum = 0.0;
  double smax = 0.0;
  for (std::size_t q = 0; q < n; ++q) {
    if (bad[q]) {
      const Vec2 x = grid.position(interior[q]);
      throw Error(ErrorKind::ConvexityLost, "discrete Hessian eigenvalue " + std::to_string(lo[q]) + " at (" +
                                                std::to_string(x.x) + ", " + std::to_string(x.y) +
                                                "), t = " + std::to_string(state.t));
    }
    const double ud = state.udot[static_cast<std::size_t>(interior[q])];
    sum += ud;
    r.udot_min = std::min(r.udot_min, ud);
    r.udot_max = std::max(r.udot_max, ud);
    r.min_eig = std::min(r.min_eig, lo[q]);
    r.max_eig = std::max(r.max_eig, hi[q]);
    r.max_min_eig = std::max(r.max_min_eig, lo[q]);
    r.min_max_eig = std::min(r.min_max_eig, hi[q]);
    smax = std::max(smax, slope[q]);
  }
  state.slope_max = smax;
  r.c_estimate = sum / static_cast<double>(n);
  r.osc_udot = r.udot_max - r.udot_min;
  return r;
}

/// One explicit Euler step followed by the boundary sweep:
///   u <- u + dt (F[D^2 u] - f),  dt = cfl h^2 / (4 max F^{ij}).
/// A solver may be passed to reuse boundary factorizations across steps.
inline std::pair<FlowState, StepReport> step(const FlowState& state, const FlowGrid& grid,
                                             const ConvexDomain& omega_tilde, const Tau& op,
                                             const ForcingFunction& f, const StepOptions& opt = {},
                                             BoundarySolver* solver = nullptr) {
  if (!(opt.cfl > 0.0) || opt.cfl > 1.0) throw Error(ErrorKind::InvalidArgument, "cfl must lie in (0, 1]");
  FlowState cur = state;
  if (!cur.has_rates()) evaluate(cur, grid, op, f, opt.threads);

  const double hs = grid.spacing();
  const double dt = opt.cfl * hs * hs / (4.0 * cur.slope_max);
  FlowState next;
  next.u = cur.u;
  next.t = cur.t + dt;
  for (int id : grid.interior()) next.u[static_cast<std::size_t>(id)] += dt * cur.udot[static_cast<std::size_t>(id)];

  BoundarySolver local;
  const BoundaryResult bc = (solver ? *solver : local).solve(next, grid, omega_tilde, {opt.tol_bc, opt.max_sweeps});
  StepReport r = evaluate(next, grid, op, f, opt.threads);
  r.dt_used = dt;
  r.boundary_residual = bc.residual;
  r.sweeps = bc.sweeps;
  r.min_obliqueness = min_obliqueness(next, grid, omega_tilde);
  return {std::move(next), r};
}

struct FlowProblem {
  ConvexDomain omega;
  ConvexDomain omega_tilde;
  FlowGrid grid;
  Tau op;
  ForcingFunction forcing;
  StepOptions step;
  double tol_c = 1e-8;
  double t_max = 100.0;
  int record_every = 1;
};

struct RunResult {
  FlowState final_state;
  std::vector<StepReport> series;  // recorded reports, strictly increasing in t
  double c_infinity = 0.0;
  bool converged = false;
  std::size_t steps = 0;
};

/// Called with every state (including t = 0) and its report.
using StepObserver = std::function<void(const FlowState&, const StepReport&, std::size_t step_index)>;

/// Steps until osc(udot) < tol_c or t > t_max. Not converging is reported
/// through RunResult::converged, not thrown.
inline RunResult run(const FlowProblem& pb, FlowState initial, const StepObserver& observer = {}) {
  RunResult out;
  FlowState state = std::move(initial);
  if (state.u.size() != static_cast<std::size_t>(pb.grid.size())) {
    throw Error(ErrorKind::InvalidArgument, "initial state does not match the grid");
  }
  StepReport report = evaluate(state, pb.grid, pb.op, pb.forcing, pb.step.threads);
  report.boundary_residual = boundary_residual(state, pb.grid, pb.omega_tilde);
  report.min_obliqueness = min_obliqueness(state, pb.grid, pb.omega_tilde);
  if (observer) observer(state, report, 0);
  out.series.push_back(report);
  out.converged = report.osc_udot < pb.tol_c;

  const int every = std::max(1, pb.record_every);
  BoundarySolver solver;
  while (!out.converged && state.t <= pb.t_max) {
    auto [next, r] = step(state, pb.grid, pb.omega_tilde, pb.op, pb.forcing, pb.step, &solver);
    state = std::move(next);
    report = r;
    ++out.steps;
    if (observer) observer(state, report, out.steps);
    out.converged = report.osc_udot < pb.tol_c;
    if (out.steps % static_cast<std::size_t>(every) == 0 || out.converged) out.series.push_back(report);
  }
  if (out.series.back().t != report.t) out.series.push_back(report);
  out.c_infinity = report.c_estimate;
  out.final_state = std::move(state);
  return out;
}

}  // namespace lagflow
