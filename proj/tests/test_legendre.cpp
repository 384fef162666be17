#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "lagflow/legendre.hpp"

using namespace lagflow;

namespace {

const ConvexDomain kUnitDisc = ConvexDomain::disc({0, 0}, 1.0);

struct Case {
  const char* name;
  std::function<double(Vec2)> u;
  ConvexDomain image;  // contains Du(unit disc)
  double c;            // involution constant, (max eig + 1/min eig) / 4
};

std::vector<Case> cases() {
  return {
      {"quadratic21", [](Vec2 x) { return 0.5 * (2 * x.x * x.x + x.y * x.y); }, ConvexDomain::ellipse({0, 0}, 2, 1),
       (2.0 + 1.0) / 4},
      {"quartic", [](Vec2 x) { return 0.5 * dot(x, x) + std::pow(x.x, 4) / 12; }, ConvexDomain::disc({0, 0}, 1.4),
       (2.0 + 1.0) / 4},
      {"exponential", [](Vec2 x) { return 0.5 * dot(x, x) + 0.1 * std::exp(x.x + 0.5 * x.y); },
       ConvexDomain::disc({0.1, 0.05}, 1.45), (1.0 + 0.125 * std::exp(std::sqrt(1.25)) + 1.0) / 4},
  };
}

}  // namespace

TEST(Legendre, SelfDualQuadratic) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 16);
  const FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x); });
  const DualField d = legendre_transform(s, g, g);
  ASSERT_GT(d.valid_count(), 0u);
  for (int id = 0; id < g.size(); ++id) {
    if (!d.is_valid(id)) continue;
    const Vec2 y = g.position(id);
    EXPECT_NEAR(d.values[static_cast<std::size_t>(id)], 0.5 * dot(y, y), 1e-12);
    EXPECT_NEAR(norm(d.argmax[static_cast<std::size_t>(id)] - y), 0.0, 1e-12);
  }
}

TEST(Legendre, DiscreteSupWithoutRefinementIsSecondOrder) {
  // Invalid nodes keep the raw supremum, which is within h^2 of the truth.
  const double h = 1.0 / 16;
  const FlowGrid g = build_grid(kUnitDisc, h);
  const FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x); });
  const DualField d = legendre_transform(s, g, g);
  for (int id : g.interior()) {
    const Vec2 y = g.position(id);
    EXPECT_LE(std::abs(d.values[static_cast<std::size_t>(id)] - 0.5 * dot(y, y)), h * h);
  }
}

TEST(Legendre, AnisotropicQuadraticClosedForm) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 16);
  const FlowGrid tg = build_grid(ConvexDomain::ellipse({0, 0}, 2, 1), 1.0 / 16);
  const FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * (2 * x.x * x.x + x.y * x.y); });
  const DualField d = legendre_transform(s, g, tg);
  ASSERT_GT(d.valid_count(), 100u);
  for (int id = 0; id < tg.size(); ++id) {
    if (!d.is_valid(id)) continue;
    const Vec2 y = tg.position(id);
    EXPECT_NEAR(d.values[static_cast<std::size_t>(id)], 0.5 * (y.x * y.x / 2 + y.y * y.y), 1e-11);
  }
}

TEST(Legendre, ConstantsFlipSign) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 16);
  const FlowState a = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x); });
  const FlowState b = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x) + 0.3; });
  const DualField da = legendre_transform(a, g, g);
  const DualField db = legendre_transform(b, g, g);
  for (int id = 0; id < g.size(); ++id) {
    if (!da.is_valid(id)) continue;
    EXPECT_TRUE(db.is_valid(id));
    EXPECT_NEAR(db.values[static_cast<std::size_t>(id)], da.values[static_cast<std::size_t>(id)] - 0.3, 1e-12);
  }
}

TEST(Legendre, DualIsConvexAtStencilNodes) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 32);
  for (const Case& c : cases()) {
    const FlowState s = sample_field(g, c.u);
    const FlowGrid tg = build_grid(c.image, 1.0 / 32);
    const DualField d = legendre_transform(s, g, tg);
    std::size_t checked = 0;
    for (int id = 0; id < tg.size(); ++id) {
      if (!d.has_stencil(id)) continue;
      ++checked;
      EXPECT_GT(eigenvalues(d.hessian(id))[0], 0.0) << c.name;
    }
    EXPECT_GT(checked, 100u) << c.name;
  }
}

TEST(Legendre, InvolutionReciprocityAndInversion) {
  for (double h : {1.0 / 16, 1.0 / 32}) {
    const FlowGrid g = build_grid(kUnitDisc, h);
    for (const Case& c : cases()) {
      const FlowState s = sample_field(g, c.u);
      const FlowGrid tg = build_grid(c.image, h);
      const DualField d = legendre_transform(s, g, tg);
      const LegendreCheck inv = involution_error(s, g, d);
      EXPECT_GT(inv.compared, 50u) << c.name;
      EXPECT_LT(inv.max_error, c.c * h * h) << c.name << " h=" << h;
      const LegendreCheck rec = hessian_reciprocity(s, g, d);
      EXPECT_GT(rec.compared, 50u) << c.name;
      EXPECT_LT(rec.max_error, 10 * h) << c.name << " h=" << h;
      const LegendreCheck grad = gradient_inversion(s, g, d);
      EXPECT_GT(grad.compared, 50u) << c.name;
      EXPECT_LT(grad.max_error, 10 * h) << c.name << " h=" << h;
    }
  }
}

TEST(Legendre, DualFlowResidualStationary) {
  const double h = 1.0 / 32;
  const FlowGrid g = build_grid(kUnitDisc, h);
  const Tau op(kPi / 2);
  FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * dot(x, x); });
  evaluate(s, g, op, ForcingFunction::zero());
  const DualField d = legendre_transform(s, g, g);
  const LegendreCheck r = dual_flow_residual(s, g, d, op, ForcingFunction::zero());
  EXPECT_GT(r.compared, 100u);
  EXPECT_LT(r.max_error, 1e-9);
}

TEST(Legendre, DualFlowResidualAnisotropicAtStart) {
  // lambda = (2, 1), mu = (1/2, 1): u_t = F(2,1) and F~(1/2,1) = -F(2,1).
  const double h = 1.0 / 32;
  const FlowGrid g = build_grid(kUnitDisc, h);
  const FlowGrid tg = build_grid(ConvexDomain::ellipse({0, 0}, 2, 1), h);
  const Tau op(kPi / 2);
  FlowState s = sample_field(g, [](Vec2 x) { return 0.5 * (2 * x.x * x.x + x.y * x.y); });
  evaluate(s, g, op, ForcingFunction::zero());
  for (int id : g.interior()) EXPECT_NEAR(s.udot[static_cast<std::size_t>(id)], std::atan(2.0) + kPi / 4, 1e-10);
  const DualField d = legendre_transform(s, g, tg);
  const LegendreCheck r = dual_flow_residual(s, g, d, op, ForcingFunction::zero());
  EXPECT_GT(r.compared, 100u);
  EXPECT_LT(r.max_error, 1e-9);
}

TEST(Legendre, ThreadedTransformIsIdentical) {
  const FlowGrid g = build_grid(kUnitDisc, 1.0 / 16);
  const FlowState s = sample_field(g, cases()[2].u);
  const FlowGrid tg = build_grid(cases()[2].image, 1.0 / 16);
  const DualField a = legendre_transform(s, g, tg, 1);
  const DualField b = legendre_transform(s, g, tg, 3);
  EXPECT_EQ(a.values, b.values);
  EXPECT_EQ(a.valid, b.valid);
}
