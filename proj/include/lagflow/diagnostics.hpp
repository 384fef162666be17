#pragma once

// Computable a priori estimates for the flow and the admissibility gate.
//
// Slack: 10 h^2 for interior quantities, 10 h for quantities that depend on
// the one-sided boundary stencils.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <iterator>
#include <limits>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "lagflow/domains.hpp"
#include "lagflow/error.hpp"
#include "lagflow/flow.hpp"
#include "lagflow/grid.hpp"
#include "lagflow/operators.hpp"
#include "lagflow/spectral_algebra.hpp"
#include "lagflow/state_io.hpp"

namespace lagflow {

/// Extremes of F[D^2 u] and of the Hessian eigenvalues over Interior nodes.
struct OperatorRange {
  double f_min = std::numeric_limits<double>::quiet_NaN();  // min F[D^2 u]
  double f_max = std::numeric_limits<double>::quiet_NaN();  // max F[D^2 u]
  double min_eig = std::numeric_limits<double>::infinity();
  double max_eig = -std::numeric_limits<double>::infinity();
  double max_min_eig = -std::numeric_limits<double>::infinity();
  double min_max_eig = std::numeric_limits<double>::infinity();
  std::size_t nonconvex_nodes = 0;
};

inline OperatorRange operator_range(const FlowState& u, const FlowGrid& grid, const Tau& op) {
  OperatorRange r;
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int id : grid.interior()) {
    const auto l = eigenvalues(detail::hessian_at(u.u, grid, id));
    r.min_eig = std::min(r.min_eig, l[0]);
    r.max_eig = std::max(r.max_eig, l[1]);
    r.max_min_eig = std::max(r.max_min_eig, l[0]);
    r.min_max_eig = std::min(r.min_max_eig, l[1]);
    if (!(l[0] > 0.0)) {
      ++r.nonconvex_nodes;
      continue;
    }
    const double v = op.term(l[0]) + op.term(l[1]);
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  if (lo <= hi) {
    r.f_min = lo;
    r.f_max = hi;
  }
  return r;
}

struct AdmissibilityReport {
  double spacing = 0.0;
  double delta_max = std::numeric_limits<double>::quiet_NaN();  // strict upper bound for osc f
  double osc_f = 0.0;
  double f_min = 0.0;
  double f_max = 0.0;
  double df_max = 0.0;  // max |Df| over the closed domain
  double df_threshold = std::numeric_limits<double>::quiet_NaN();
  double lambda1 = 0.0;   // trace window lower end at s1
  double s1 = 0.0;        // max over nodes of the smaller Hessian eigenvalue of u0
  double operator_min = 0.0;  // min F[D^2 u0]
  double operator_max = 0.0;  // max F[D^2 u0]
  bool concave_ok = false;
  bool u0_convex = false;
  double initial_bc_residual = 0.0;

  bool admissible() const noexcept {
    return u0_convex && osc_f < delta_max && df_max < df_threshold && concave_ok && initial_bc_residual < 10.0 * spacing;
  }

  /// Failed conditions, empty when admissible.
  std::vector<std::string> failures() const {
    std::vector<std::string> out;
    if (!u0_convex) out.push_back("initial data is not discretely convex");
    if (u0_convex && !(osc_f < delta_max)) out.push_back("osc f = " + format_double(osc_f) + " >= delta_max = " + format_double(delta_max));
    // The threshold needs the eigenvalues of a convex u0.
    if (u0_convex && !(df_max < df_threshold)) {
      out.push_back("|Df| = " + format_double(df_max) + " >= threshold " + format_double(df_threshold));
    }
    if (!concave_ok) out.push_back("f is not concave");
    if (!(initial_bc_residual < 10.0 * spacing)) {
      out.push_back("initial boundary residual " + format_double(initial_bc_residual) + " >= 10 h");
    }
    return out;
  }
};

/// Hypotheses of the convergence result, checked on the grid:
///   delta_max = min{F(+inf) - max F[D^2 u0], min F[D^2 u0] - F(0)},
///   df_threshold = theta~ Lambda_1 / (2 max |Dh~|),
/// with Lambda_1 the trace window lower end at the largest node-wise smaller
/// eigenvalue of D^2 u0.
inline AdmissibilityReport check_admissibility(const ForcingFunction& f, const FlowState& u0, const Tau& op,
                                               const ConvexDomain& omega, const ConvexDomain& omega_tilde,
                                               const FlowGrid& grid) {
  AdmissibilityReport r;
  r.spacing = grid.spacing();
  const OperatorRange range = operator_range(u0, grid, op);
  r.u0_convex = range.nonconvex_nodes == 0 && !grid.interior().empty();
  const auto [lo_end, hi_end] = endpoints(op, 2);
  r.operator_min = range.f_min;
  r.operator_max = range.f_max;
  // F[D^2 u0] is undefined at non-convex nodes, and so is delta_max.
  r.delta_max = r.u0_convex ? std::min(hi_end - range.f_max, range.f_min - lo_end)
                            : std::numeric_limits<double>::quiet_NaN();
  std::tie(r.f_min, r.f_max) = f.extremes(omega);
  r.osc_f = r.f_max - r.f_min;
  r.df_max = f.gradient_bound();
  r.concave_ok = f.concave();
  r.s1 = range.max_min_eig;
  if (r.u0_convex) {
    const auto [trace, weighted] = structure_window(op, r.s1, range.min_max_eig, 2);
    r.lambda1 = trace.lambda1;
    r.df_threshold = omega_tilde.theta() * r.lambda1 / (2.0 * omega_tilde.grad_bounds().second);
  }
  r.initial_bc_residual = boundary_residual(u0, grid, omega_tilde);
  return r;
}

/// Bounds for du/dt from the maximum principle:
///   min F[D^2 u0] - max f <= du/dt <= max F[D^2 u0] - min f.
inline std::pair<double, double> udot_bounds(const FlowState& u0, const ForcingFunction& f, const Tau& op,
                                             const FlowGrid& grid, const ConvexDomain& omega) {
  const OperatorRange range = operator_range(u0, grid, op);
  if (range.nonconvex_nodes > 0) throw Error(ErrorKind::NotPositiveDefinite, "initial data is not discretely convex");
  const auto [fmin, fmax] = f.extremes(omega);
  return {range.f_min - fmax, range.f_max - fmin};
}

/// x > 0 with F(x, ..., x) = level, by bisection on log x.
inline double diagonal_level(const Tau& op, int n, double level) {
  const auto [lo_end, hi_end] = endpoints(op, n);
  if (!(level > lo_end) || !(level < hi_end)) {
    throw Error(ErrorKind::LevelOutOfRange, "level " + format_double(level) + " outside (" + format_double(lo_end) +
                                                ", " + format_double(hi_end) + ")");
  }
  auto value = [&](double x) { return n * op.term(x); };
  double lo = 1.0;
  double hi = 1.0;
  while (value(lo) >= level && lo > 1e-300) lo *= 0.5;
  while (value(hi) <= level && hi < 1e300) hi *= 2.0;
  if (!(value(lo) < level) || !(value(hi) > level)) {
    throw Error(ErrorKind::LevelOutOfRange, "level " + format_double(level) + " not bracketed in floating point");
  }
  for (int it = 0; it < 400 && hi - lo > 1e-16 * hi; ++it) {
    const double mid = std::sqrt(lo * hi);
    const double m = (mid > lo && mid < hi) ? mid : 0.5 * (lo + hi);
    (value(m) < level ? lo : hi) = m;
  }
  return 0.5 * (lo + hi);
}

/// (mu, omega): every node has min eigenvalue <= mu and max eigenvalue >= omega.
inline std::pair<double, double> eigenvalue_window(double udot_lo, double udot_hi, std::pair<double, double> f_extremes,
                                                   const Tau& op, int n) {
  const double mu = diagonal_level(op, n, udot_hi + f_extremes.second);
  const double omega = diagonal_level(op, n, udot_lo + f_extremes.first);
  return {mu, omega};
}

struct ObliquenessReport {
  double min_normalized = std::numeric_limits<double>::infinity();  // min <beta, nu> / |beta|
  double min_raw = std::numeric_limits<double>::infinity();         // min <beta, nu>
  double identity_residual = 0.0;  // max |<beta,nu> - sqrt(nu^T H^-1 nu * beta^T H beta)|
};

inline ObliquenessReport obliqueness(const FlowState& state, const FlowGrid& grid, const ConvexDomain& omega_tilde) {
  ObliquenessReport r;
  for (std::size_t k = 0; k < grid.boundary().size(); ++k) {
    const ObliquenessSample s = obliqueness_at(state, grid, omega_tilde, k);
    r.min_normalized = std::min(r.min_normalized, s.normalized);
    r.min_raw = std::min(r.min_raw, s.raw);
    r.identity_residual = std::max(r.identity_residual, std::abs(s.raw - s.identity));
  }
  return r;
}

/// (min, max) Hessian eigenvalue over Interior nodes.
inline std::pair<double, double> c2_pinch(const FlowState& state, const FlowGrid& grid) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (int id : grid.interior()) {
    const auto l = eigenvalues(detail::hessian_at(state.u, grid, id));
    lo = std::min(lo, l[0]);
    hi = std::max(hi, l[1]);
  }
  return {lo, hi};
}

struct EstimateRecord {
  double t = 0.0;
  double dt = 0.0;
  double c_estimate = 0.0;
  double osc_udot = 0.0;
  double min_eig = 0.0;
  double max_eig = 0.0;
  double mu = 0.0;
  double omega = 0.0;
  double obliq_min = 0.0;
  double obliq_identity_residual = 0.0;
  double bc_residual = 0.0;
  double udot_min = 0.0;
  double udot_max = 0.0;
  double hessian_cond = 0.0;  // max over nodes of max eig / min eig
  std::size_t violations = 0;  // raised at this observation
};

struct Violation {
  double t = 0.0;
  std::string estimate;
  double margin = 0.0;  // amount by which the bound is exceeded
};

/// Checks every estimate on each observed state and keeps the ledger rows.
class EstimateMonitor {
 public:
  struct Bounds {
    double udot_lo = 0.0;
    double udot_hi = 0.0;
    double mu = 0.0;
    double omega = 0.0;
    double c2_bound = 100.0;
    double spacing = 0.0;
  };

  static Bounds bounds_for(const FlowState& u0, const ForcingFunction& f, const Tau& op, const FlowGrid& grid,
                           const ConvexDomain& omega, double c2_bound) {
    Bounds b;
    std::tie(b.udot_lo, b.udot_hi) = udot_bounds(u0, f, op, grid, omega);
    std::tie(b.mu, b.omega) = eigenvalue_window(b.udot_lo, b.udot_hi, f.extremes(omega), op, 2);
    b.c2_bound = c2_bound;
    b.spacing = grid.spacing();
    return b;
  }

  explicit EstimateMonitor(Bounds b, std::size_t keep_violations = 1000) : b_(b), keep_(keep_violations) {}

  const Bounds& bounds() const noexcept { return b_; }

  /// Checks the state; records a ledger row when record is true.
  EstimateRecord observe(const FlowState& state, const StepReport& rep, const FlowGrid& grid,
                         const ConvexDomain& omega_tilde, bool record = true) {
    const double h = b_.spacing;
    const double s2 = 10.0 * h * h;
    const double s1 = 10.0 * h;
    EstimateRecord r;
    r.t = rep.t;
    r.dt = rep.dt_used;
    r.c_estimate = rep.c_estimate;
    r.osc_udot = rep.osc_udot;
    r.min_eig = rep.min_eig;
    r.max_eig = rep.max_eig;
    r.mu = b_.mu;
    r.omega = b_.omega;
    r.bc_residual = rep.boundary_residual;
    r.udot_min = rep.udot_min;
    r.udot_max = rep.udot_max;
    r.hessian_cond = cond_max(state, grid);
    const ObliquenessReport ob = obliqueness(state, grid, omega_tilde);
    r.obliq_min = ob.min_normalized;
    r.obliq_identity_residual = ob.identity_residual;

    const std::size_t before = total_;
    flag(r.t, "udot_lower", b_.udot_lo - s2 - rep.udot_min);
    flag(r.t, "udot_upper", rep.udot_max - (b_.udot_hi + s2));
    if (has_prev_) flag(r.t, "osc_udot_increase", rep.osc_udot - (prev_osc_ + s2 * (rep.t - prev_t_)));
    flag(r.t, "eigen_window_mu", rep.max_min_eig - (b_.mu + s2));
    flag(r.t, "eigen_window_omega", (b_.omega - s2) - rep.min_max_eig);
    flag(r.t, "obliqueness", -ob.min_normalized);
    flag(r.t, "obliqueness_identity", ob.identity_residual - s1);
    flag(r.t, "c2_lower", 1.0 / b_.c2_bound - rep.min_eig);
    flag(r.t, "c2_upper", rep.max_eig - b_.c2_bound);
    flag(r.t, "boundary_residual", rep.boundary_residual - s1);
    r.violations = total_ - before;

    has_prev_ = true;
    prev_osc_ = rep.osc_udot;
    prev_t_ = rep.t;
    if (record) records_.push_back(r);
    return r;
  }

  const std::vector<EstimateRecord>& records() const noexcept { return records_; }
  const std::vector<Violation>& violations() const noexcept { return violations_; }
  std::size_t violation_count() const noexcept { return total_; }
  const std::map<std::string, std::size_t>& violation_counts() const noexcept { return counts_; }

  static void write_csv_header(std::ostream& os) {
    os << "t,dt,c_estimate,osc_udot,min_eig,max_eig,mu,omega,obliq_min,obliq_identity_residual,bc_residual\n";
  }

  static void write_csv_row(std::ostream& os, const EstimateRecord& r) {
    const double v[] = {r.t,  r.dt,    r.c_estimate, r.osc_udot,  r.min_eig,
                        r.max_eig, r.mu, r.omega, r.obliq_min, r.obliq_identity_residual, r.bc_residual};
    for (std::size_t i = 0; i < std::size(v); ++i) os << (i ? "," : "") << format_double(v[i]);
    os << '\n';
  }

  void write_csv(std::ostream& os) const {
    write_csv_header(os);
    for (const auto& r : records_) write_csv_row(os, r);
  }

 private:
  static double cond_max(const FlowState& state, const FlowGrid& grid) {
    double c = 0.0;
    for (int id : grid.interior()) {
      const auto l = eigenvalues(detail::hessian_at(state.u, grid, id));
      c = std::max(c, l[0] > 0.0 ? l[1] / l[0] : std::numeric_limits<double>::infinity());
    }
    return c;
  }

  void flag(double t, const char* which, double margin) {
    if (!(margin > 0.0) && !std::isnan(margin)) return;
    ++total_;
    ++counts_[which];
    if (violations_.size() < keep_) violations_.push_back({t, which, margin});
  }

  Bounds b_;
  std::size_t keep_;
  std::vector<EstimateRecord> records_;
  std::vector<Violation> violations_;
  std::map<std::string, std::size_t> counts_;
  std::size_t total_ = 0;
  bool has_prev_ = false;
  double prev_osc_ = 0.0;
  double prev_t_ = 0.0;
};

}  // namespace lagflow
