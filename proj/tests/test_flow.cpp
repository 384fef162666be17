#include <gtest/gtest.h>

#include <cmath>

#include "lagflow/flow.hpp"

using namespace lagflow;

namespace {

const ConvexDomain kUnitDisc = ConvexDomain::disc({0, 0}, 1.0);

int node_at(const FlowGrid& g, Vec2 x) {
  for (int id = 0; id < g.size(); ++id)
    if (norm(g.position(id) - x) < 1e-9) return id;
  return -1;
}

FlowProblem disc_problem(double tau, double spacing, ForcingFunction f = ForcingFunction::zero()) {
  return FlowProblem{kUnitDisc, kUnitDisc, build_grid(kUnitDisc, spacing), Tau(tau), f, {}, 1e-8, 100.0, 1};
}

}  // namespace

TEST(Flow, QuadraticInitialExamples) {
  const auto q = quadratic_initial(kUnitDisc, kUnitDisc);
  EXPECT_DOUBLE_EQ(q({0.3, 0.4}), 0.125);
  EXPECT_EQ(q.gradient({0.3, 0.4}), (Vec2{0.3, 0.4}));

  const auto e = quadratic_initial(ConvexDomain::ellipse({0, 0}, 2, 1), ConvexDomain::ellipse({0, 0}, 1, 2));
  EXPECT_EQ(e.hessian(), (SymMatrix2{0.5, 0.0, 2.0}));

  const auto t = quadratic_initial(kUnitDisc, ConvexDomain::disc({1, 0}, 1.0));
  EXPECT_DOUBLE_EQ(t({0.5, 0.5}), 0.5 + 0.25);
}

TEST(Flow, QuadraticGradientMapsBoundaryOntoTarget) {
  const auto src = ConvexDomain::ellipse({0.2, -0.3}, 2.0, 0.7);
  const auto dst = ConvexDomain::ellipse({-1.0, 0.5}, 0.4, 1.3);
  const auto q = quadratic_initial(src, dst);
  for (const auto& b : src.sample_boundary(100)) EXPECT_NEAR(dst.h(q.gradient(b.position)), 0.0, 1e-14);
}

TEST(Flow, DiscreteHessianExactOnQuadratics) {
  const FlowGrid g = build_grid(kUnitDisc, 0.1);
  const FlowState a = sample_field(g, [](Vec2 x) { return x.x * x.x; });
  const FlowState b = sample_field(g, [](Vec2 x) { return x.x * x.y; });
  for (int id : g.interior()) {
    const SymMatrix2 ha = discrete_hessian(a, g, id);
    const SymMatrix2 hb = discrete_hessian(b, g, id);
    EXPECT_NEAR(ha.a11, 2.0, 1e-11);
    EXPECT_NEAR(ha.a12, 0.0, 1e-11);
    EXPECT_NEAR(ha.a22, 0.0, 1e-11);
    EXPECT_NEAR(hb.a11, 0.0, 1e-11);
    EXPECT_NEAR(hb.a12, 1.0, 1e-11);
    EXPECT_NEAR(hb.a22, 0.0, 1e-11);
  }
  EXPECT_THROW(discrete_hessian(a, g, g.boundary().front()), Error);
}

TEST(Flow, DiscreteHessianTaylorRemainder) {
  const double h = 0.1;
  const FlowGrid g = build_grid(kUnitDisc, h);
  const FlowState s = sample_field(g, [](Vec2 x) { return std::pow(x.x, 4); });
  const int id = node_at(g, {0.5, 0.0});
  ASSERT_GE(id, 0);
  const double u11 = discrete_hessian(s, g, id).a11;
  EXPECT_NEAR(u11, 3.02, 1e-10);
  EXPECT_LE(std::abs(u11 - 3.0), h * h * 24 / 12 + 1e-12);
}

TEST(Flow, BoundaryGradientExactOnQuadratics) {
  const auto e = ConvexDomain::ellipse({0.1, 0.0}, 1.7, 1.0);
  const FlowGrid g = build_grid(e, 0.05);
  auto field = [](Vec2 x) { return 0.7 * x.x * x.x + 0.3 * x.x * x.y + 1.1 * x.y * x.y - 0.2 * x.x + 3.0; };
  auto gradient = [](Vec2 x) { return Vec2{1.4 * x.x + 0.3 * x.y - 0.2, 0.3 * x.x + 2.2 * x.y}; };
  const FlowState s = sample_field(g, field);
  for (std::size_t k = 0; k < g.boundary().size(); ++k) {
    const Vec2 p = g.stencils()[k].projection.position;
    const Vec2 du = boundary_gradient(s, g, k);
    EXPECT_NEAR(du.x, gradient(p).x, 1e-9);
    EXPECT_NEAR(du.y, gradient(p).y, 1e-9);
  }
}

TEST(Flow, GradientWeightsMatchGeometricFormula) {
  const auto e = ConvexDomain::ellipse({0.0, 0.2}, 1.3, 0.9);
  const FlowGrid g = build_grid(e, 0.07);
  const FlowState s = sample_field(g, [](Vec2 x) { return std::exp(0.3 * x.x) + x.y * x.y * x.y + x.x * x.y; });
  for (std::size_t k = 0; k < g.boundary().size(); ++k) {
    const Vec2 direct = detail::stencil_gradient(g, g.boundary()[k], g.stencils()[k], [&](int i, int j) {
      return s.u[static_cast<std::size_t>(g.id(i, j))];
    });
    const Vec2 weighted = boundary_gradient(s, g, k);
    EXPECT_NEAR(direct.x, weighted.x, 1e-11);
    EXPECT_NEAR(direct.y, weighted.y, 1e-11);
  }
}

TEST(Flow, EnforceBoundaryStationaryAndGauge) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 32);
  FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x); });
  const FlowState before = s;
  const auto r = enforce_boundary(s, g, kUnitDisc);
  EXPECT_LT(r.residual, 1e-10);
  EXPECT_EQ(s.u, before.u);

  FlowState shifted = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x) + 0.01; });
  EXPECT_NEAR(boundary_residual(shifted, g, kUnitDisc), r.residual, 1e-10);
}

TEST(Flow, EnforceBoundaryConvergesFromWrongSlope) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 32);
  FlowState s = sample_field(g, [](Vec2 x) { return 0.6 * dot(x, x); });
  const auto r = enforce_boundary(s, g, kUnitDisc);
  ASSERT_GE(r.history.size(), 2u);
  for (std::size_t k = 1; k < r.history.size(); ++k) EXPECT_LT(r.history[k], r.history[k - 1]);
  EXPECT_LT(r.residual, 1e-10);
  for (std::size_t k = 0; k < g.boundary().size(); ++k) EXPECT_NEAR(norm(boundary_gradient(s, g, k)), 1.0, 1e-9);

  // Each boundary value is the root of its own scalar equation given the
  // others; check against bisection. h~(Du) is quadratic in the node value,
  // so the bracket stays on the branch near the root.
  for (std::size_t k = 0; k < g.boundary().size(); k += 7) {
    const auto id = static_cast<std::size_t>(g.boundary()[k]);
    FlowState probe = s;
    auto phi = [&](double ub) {
      probe.u[id] = ub;
      return kUnitDisc.h(boundary_gradient(probe, g, k));
    };
    double lo = s.u[id] - 0.01, hi = s.u[id] + 0.01;
    // Raising the node value pulls Du inward, so phi decreases.
    ASSERT_GT(phi(lo), 0.0);
    ASSERT_LT(phi(hi), 0.0);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      (phi(mid) > 0.0 ? lo : hi) = mid;
    }
    EXPECT_NEAR(s.u[id], 0.5 * (lo + hi), 1e-9);
  }
}

TEST(Flow, StationaryStepShiftsUniformly) {
  const auto pb = disc_problem(kPi / 2, 1.0 / 32);
  FlowState s = quadratic_initial(kUnitDisc, kUnitDisc).sample(pb.grid);
  const auto [next, rep] = step(s, pb.grid, pb.omega_tilde, pb.op, pb.forcing);
  EXPECT_NEAR(rep.c_estimate, kPi / 2, 1e-10);
  EXPECT_LT(rep.osc_udot, 1e-9);
  EXPECT_GT(rep.dt_used, 0.0);
  // dt = cfl h^2 / (4 * 1/2)
  EXPECT_NEAR(rep.dt_used, 0.5 / (32.0 * 32.0) / 2.0, 1e-15);
  for (int id : pb.grid.interior())
    EXPECT_NEAR(next.u[static_cast<std::size_t>(id)] - s.u[static_cast<std::size_t>(id)], rep.dt_used * kPi / 2, 1e-12);
  // Boundary values are only solved to the boundary tolerance.
  for (int id : pb.grid.boundary())
    EXPECT_NEAR(next.u[static_cast<std::size_t>(id)] - s.u[static_cast<std::size_t>(id)], rep.dt_used * kPi / 2, 1e-10 * pb.grid.spacing());
  EXPECT_NEAR(rep.min_obliqueness, 1.0, 1e-8);
}

TEST(Flow, LinearForcingShiftsRate) {
  const auto f = ForcingFunction::linear({0.01, 0.0});
  const auto pb = disc_problem(kPi / 2, 1.0 / 32, f);
  FlowState s = quadratic_initial(kUnitDisc, kUnitDisc).sample(pb.grid);
  const StepReport rep = evaluate(s, pb.grid, pb.op, f);
  double mean_f = 0.0;
  for (int id : pb.grid.interior()) mean_f += f(pb.grid.position(id));
  mean_f /= static_cast<double>(pb.grid.interior().size());
  EXPECT_NEAR(rep.c_estimate, kPi / 2 - mean_f, 1e-12);
  EXPECT_DOUBLE_EQ(f.oscillation(kUnitDisc), 0.02);
}

TEST(Flow, RejectsBadCfl) {
  const auto pb = disc_problem(kPi / 2, 0.25);
  FlowState s = quadratic_initial(kUnitDisc, kUnitDisc).sample(pb.grid);
  EXPECT_THROW(step(s, pb.grid, pb.omega_tilde, pb.op, pb.forcing, {0.0}), Error);
  EXPECT_THROW(step(s, pb.grid, pb.omega_tilde, pb.op, pb.forcing, {1.5}), Error);
}

TEST(Flow, RunStationaryConvergesImmediately) {
  for (double tau : {kPi / 8, kPi / 4, 3 * kPi / 8, kPi / 2}) {
    const auto pb = disc_problem(tau, 1.0 / 32);
    const auto res = run(pb, quadratic_initial(kUnitDisc, kUnitDisc).sample(pb.grid));
    EXPECT_TRUE(res.converged);
    EXPECT_EQ(res.steps, 0u);
    EXPECT_NEAR(res.c_infinity, eval(Tau(tau), {1.0, 1.0}), 1e-10) << tau;
  }
}

TEST(Flow, QuadraticExactnessOnEllipsePair) {
  const auto src = ConvexDomain::ellipse({0, 0}, 2.0, 1.0);
  const auto dst = ConvexDomain::ellipse({0.5, 0}, 1.0, 2.0);
  const FlowGrid g = build_grid(src, 0.1);
  const Tau op(1.0);
  FlowState s = quadratic_initial(src, dst).sample(g);
  const FlowState s0 = s;
  // Tight boundary tolerance so the comparison is not limited by the solver stop.
  const StepOptions opt{0.5, 1e-14, 20, 1};
  for (int k = 0; k < 20; ++k) s = step(s, g, dst, op, ForcingFunction::zero(), opt).first;
  const double shift = s.u[static_cast<std::size_t>(g.interior().front())] - s0.u[static_cast<std::size_t>(g.interior().front())];
  EXPECT_GT(shift, 0.0);
  for (int id : g.interior()) EXPECT_NEAR(s.u[static_cast<std::size_t>(id)] - s0.u[static_cast<std::size_t>(id)], shift, 1e-12);
  for (int id : g.boundary()) EXPECT_NEAR(s.u[static_cast<std::size_t>(id)] - s0.u[static_cast<std::size_t>(id)], shift, 1e-12);
}

TEST(Flow, ConstantGaugeLeavesReportsUnchanged) {
  const auto pb = disc_problem(kPi / 2, 1.0 / 16);
  auto bump = [](Vec2 x) { return 0.5 * dot(x, x) + 0.02 * std::exp(-dot(x, x) / 0.08); };
  FlowState a = sample_field(pb.grid, bump);
  FlowState b = sample_field(pb.grid, [&](Vec2 x) { return bump(x) + 1.0; });
  for (int k = 0; k < 30; ++k) {
    auto [na, ra] = step(a, pb.grid, pb.omega_tilde, pb.op, pb.forcing);
    auto [nb, rb] = step(b, pb.grid, pb.omega_tilde, pb.op, pb.forcing);
    EXPECT_NEAR(ra.dt_used, rb.dt_used, 1e-12 * ra.dt_used);
    EXPECT_NEAR(ra.c_estimate, rb.c_estimate, 1e-9);
    EXPECT_NEAR(ra.min_eig, rb.min_eig, 1e-9);
    a = std::move(na);
    b = std::move(nb);
  }
  for (int id : pb.grid.interior())
    EXPECT_NEAR(b.u[static_cast<std::size_t>(id)] - a.u[static_cast<std::size_t>(id)], 1.0, 1e-11);
}

TEST(Flow, ConvexityLostOnNonConvexData) {
  const auto pb = disc_problem(kPi / 2, 1.0 / 16);
  FlowState s = sample_field(pb.grid, [](Vec2 x) { return 0.5 * dot(x, x) + 0.05 * std::exp(-dot(x, x) / 0.08); });
  try {
    evaluate(s, pb.grid, pb.op, pb.forcing);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::ConvexityLost);
  }
}

TEST(Flow, ThreadCountDoesNotChangeResults) {
  const auto pb = disc_problem(kPi / 2, 1.0 / 16);
  auto bump = [](Vec2 x) { return 0.5 * dot(x, x) + 0.02 * std::exp(-dot(x, x) / 0.08); };
  FlowState a = sample_field(pb.grid, bump);
  FlowState b = a;
  for (int k = 0; k < 10; ++k) {
    a = step(a, pb.grid, pb.omega_tilde, pb.op, pb.forcing, {0.5, 1e-10, 20, 1}).first;
    b = step(b, pb.grid, pb.omega_tilde, pb.op, pb.forcing, {0.5, 1e-10, 20, 4}).first;
  }
  EXPECT_EQ(a.u, b.u);
  EXPECT_EQ(a.udot, b.udot);
}

TEST(Flow, ForcingExtremesUseDomainHull) {
  const auto f = ForcingFunction::linear({0.03, -0.04});
  const auto e = ConvexDomain::ellipse({1, 1}, 2, 1);
  const auto [lo, hi] = f.extremes(e);
  double mn = INFINITY, mx = -INFINITY;
  for (const auto& b : e.sample_boundary(100000)) {
    mn = std::min(mn, f(b.position));
    mx = std::max(mx, f(b.position));
  }
  EXPECT_NEAR(lo, mn, 1e-9);
  EXPECT_NEAR(hi, mx, 1e-9);
  EXPECT_TRUE(f.concave());
}
