#include <gtest/gtest.h>

#include <queue>

#include "lagflow/grid.hpp"

using namespace lagflow;

TEST(Grid, CoarseDiscHasCentreInterior) {
  const auto d = ConvexDomain::disc({0, 0}, 1.0);
  const FlowGrid g = build_grid(d, 0.5);
  ASSERT_FALSE(g.interior().empty());
  bool centre = false;
  for (int id : g.interior()) centre |= g.position(id) == Vec2{0, 0};
  EXPECT_TRUE(centre);
}

TEST(Grid, TooCoarse) {
  try {
    build_grid(ConvexDomain::disc({0, 0}, 1.0), 0.9);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::GridTooCoarse);
  }
  EXPECT_THROW(build_grid(ConvexDomain::disc({0, 0}, 1.0), 0.0), Error);
}

TEST(Grid, ClassificationMatchesBruteForceScan) {
  const auto e = ConvexDomain::ellipse({0, 0}, 2.0, 1.0);
  const double h = 0.1;
  const FlowGrid g = build_grid(e, h);
  auto inside = [&](Vec2 p) { return (p.x / 2) * (p.x / 2) + p.y * p.y < 1.0; };
  std::size_t interior = 0, boundary = 0;
  for (int j = 0; j < g.ny(); ++j) {
    for (int i = 0; i < g.nx(); ++i) {
      const Vec2 p = g.position(i, j);
      if (!inside(p)) {
        EXPECT_EQ(g.classify(i, j), NodeClass::Exterior);
        continue;
      }
      bool all = true;
      for (int dj = -1; dj <= 1; ++dj)
        for (int di = -1; di <= 1; ++di) all &= inside(g.position(i + di, j + dj));
      const NodeClass want = all ? NodeClass::Interior : NodeClass::Boundary;
      EXPECT_EQ(g.classify(i, j), want) << i << "," << j;
      (all ? interior : boundary)++;
    }
  }
  EXPECT_EQ(interior, g.interior().size());
  EXPECT_EQ(boundary, g.boundary().size());
  EXPECT_GE(g.interior().size(), 9u);
}

TEST(Grid, BoundaryLayerIsConnectedAndSeparating) {
  for (double h : {0.2, 1.0 / 32}) {
    const auto e = ConvexDomain::ellipse({0.2, -0.1}, 1.5, 1.0);
    const FlowGrid g = build_grid(e, h);
    // Boundary nodes form one 8-connected component.
    std::vector<char> seen(static_cast<std::size_t>(g.size()), 0);
    std::queue<int> q;
    q.push(g.boundary().front());
    seen[static_cast<std::size_t>(g.boundary().front())] = 1;
    std::size_t reached = 0;
    while (!q.empty()) {
      const int id = q.front();
      q.pop();
      ++reached;
      for (Offset d : detail::kNeighbours) {
        const int i = g.col(id) + d.di, j = g.row(id) + d.dj;
        if (g.classify(i, j) != NodeClass::Boundary) continue;
        const auto n = static_cast<std::size_t>(g.id(i, j));
        if (!seen[n]) {
          seen[n] = 1;
          q.push(g.id(i, j));
        }
      }
    }
    EXPECT_EQ(reached, g.boundary().size());
    // No Interior node touches an Exterior node.
    for (int id : g.interior())
      for (Offset d : detail::kNeighbours) EXPECT_NE(g.classify(g.col(id) + d.di, g.row(id) + d.dj), NodeClass::Exterior);
  }
}

TEST(Grid, BoundaryOrderedByArcParameter) {
  const FlowGrid g = build_grid(ConvexDomain::disc({0, 0}, 1.0), 1.0 / 16);
  for (std::size_t k = 1; k < g.boundary().size(); ++k) {
    EXPECT_LE(g.stencils()[k - 1].projection.arc_parameter, g.stencils()[k].projection.arc_parameter);
  }
  for (std::size_t k = 0; k < g.boundary().size(); ++k) EXPECT_EQ(g.boundary_slot(g.boundary()[k]), static_cast<int>(k));
}

TEST(Grid, StencilsPointInward) {
  const auto e = ConvexDomain::ellipse({0, 0}, 2.0, 0.8);
  const FlowGrid g = build_grid(e, 0.05);
  for (std::size_t k = 0; k < g.boundary().size(); ++k) {
    const auto& st = g.stencils()[k];
    const int b = g.boundary()[k];
    EXPECT_GT(dot(Vec2{double(st.step.di), double(st.step.dj)}, st.projection.inward_normal), 0.0);
    EXPECT_TRUE(g.active(g.col(b) + st.step.di, g.row(b) + st.step.dj));
    EXPECT_EQ(g.classify(st.hessian_node), NodeClass::Interior);
  }
}
