#include <hdivwave/mesh.hpp>

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

using namespace hdivwave;

namespace {

MeshFamily grid(MeshKind kind, int base) {
  MeshFamily f;
  f.kind = kind;
  f.base_divisions = base;
  return f;
}

void expect_consistent_signs(const HybridMesh& mesh) {
  for (Index e = 0; e < mesh.num_edges(); ++e) {
    const auto [c0, c1] = mesh.edge_cells(e);
    if (c1 < 0) continue;
    int s0 = 0, s1 = 0;
    for (const EdgeRef& r : mesh.cell_edges(c0))
      if (r.edge == e) s0 = r.sign;
    for (const EdgeRef& r : mesh.cell_edges(c1))
      if (r.edge == e) s1 = r.sign;
    EXPECT_EQ(s0, -s1) << "edge " << e;
  }
}

}  // namespace

TEST(Mesh, QuadGridCounts) {
  const HybridMesh m = generate(grid(MeshKind::structured_quad, 2), 0);
  EXPECT_EQ(m.num_vertices(), 9);
  EXPECT_EQ(m.num_cells(), 4);
  EXPECT_EQ(m.num_edges(), 12);
  EXPECT_EQ(m.boundary_edges().size(), 8u);
}

TEST(Mesh, TriangleGridCounts) {
  const HybridMesh m = generate(grid(MeshKind::structured_triangle, 2), 0);
  EXPECT_EQ(m.num_vertices(), 9);
  EXPECT_EQ(m.num_cells(), 8);
  EXPECT_EQ(m.num_edges(), 16);
}

TEST(Mesh, HybridInterfaceJoinsQuadAndTriangle) {
  const HybridMesh m = generate(grid(MeshKind::hybrid, 4), 0);
  EXPECT_TRUE(m.has_shape(Shape::triangle));
  EXPECT_TRUE(m.has_shape(Shape::parallelogram));
  int interface_edges = 0;
  for (Index e = 0; e < m.num_edges(); ++e) {
    const Vec2 a = m.vertex(m.edge(e)[0]), b = m.vertex(m.edge(e)[1]);
    if (std::abs(a.x() - 0.5) > 1e-14 || std::abs(b.x() - 0.5) > 1e-14) continue;
    ++interface_edges;
    const auto [c0, c1] = m.edge_cells(e);
    ASSERT_GE(c1, 0);
    EXPECT_NE(m.cell(c0).shape, m.cell(c1).shape);
  }
  EXPECT_EQ(interface_edges, 4);
  for (Index c = 0; c < m.num_cells(); ++c) {
    const Vec2 a = m.vertex(m.cell(c).vertices[0]);
    EXPECT_EQ(m.cell(c).shape, a.x() < 0.5 ? Shape::parallelogram : Shape::triangle);
  }
}

TEST(Mesh, SingleTriangleAllBoundary) {
  const HybridMesh m({{0, 0}, {1, 0}, {0, 1}}, {{Shape::triangle, {0, 1, 2, -1}}});
  EXPECT_EQ(m.num_edges(), 3);
  EXPECT_EQ(m.boundary_edges().size(), 3u);
}

TEST(Mesh, SharedDiagonalHasOppositeSigns) {
  const HybridMesh m({{0, 0}, {1, 0}, {1, 1}, {0, 1}},
                     {{Shape::triangle, {0, 1, 2, -1}}, {Shape::triangle, {0, 2, 3, -1}}});
  EXPECT_EQ(m.num_edges(), 5);
  expect_consistent_signs(m);
}

TEST(Mesh, EdgeNormalIsClockwiseRotationOfTangent) {
  const HybridMesh m({{0, 0}, {1, 0}, {0, 1}}, {{Shape::triangle, {0, 1, 2, -1}}});
  for (Index e = 0; e < m.num_edges(); ++e) {
    EXPECT_LT(m.edge(e)[0], m.edge(e)[1]);
    const Vec2 t = m.edge_vector(e).normalized();
    EXPECT_NEAR((m.edge_normal(e) - Vec2{t.y(), -t.x()}).norm(), 0.0, 1e-15);
  }
  // edge (0,1) runs along the bottom; its normal points down and out of the cell
  EXPECT_NEAR((m.edge_normal(0) - Vec2{0, -1}).norm(), 0.0, 1e-15);
  EXPECT_EQ(m.cell_edges(0)[0].sign, 1);
}

TEST(Mesh, InteriorVertexOfTriangleGridHasSixEdges) {
  const HybridMesh m = generate(grid(MeshKind::structured_triangle, 4), 0);
  for (Index v = 0; v < m.num_vertices(); ++v) {
    const Vec2 p = m.vertex(v);
    const bool interior = p.x() > 0 && p.x() < 1 && p.y() > 0 && p.y() < 1;
    if (interior) {
      EXPECT_EQ(m.vertex_edges(v).size(), 6u);
    }
  }
}

TEST(Mesh, InvariantsOnAllFamilies) {
  for (MeshKind kind :
       {MeshKind::structured_triangle, MeshKind::structured_quad, MeshKind::hybrid, MeshKind::perturbed}) {
    for (int level = 0; level <= 3; ++level) {
      const HybridMesh m = generate(grid(kind, 2), level);
      SCOPED_TRACE(std::string(to_string(kind)) + " level " + std::to_string(level));
      expect_consistent_signs(m);
      EXPECT_NEAR(m.total_area(), 1.0, 1e-12);
      for (Index c = 0; c < m.num_cells(); ++c) EXPECT_GT(m.signed_area(c), 0.0);
      for (Index e = 0; e < m.num_edges(); ++e) {
        const auto [c0, c1] = m.edge_cells(e);
        EXPECT_GE(c0, 0);
        const Vec2 mid = 0.5 * (m.vertex(m.edge(e)[0]) + m.vertex(m.edge(e)[1]));
        const bool on_boundary = mid.x() < 1e-14 || mid.x() > 1 - 1e-14 || mid.y() < 1e-14 || mid.y() > 1 - 1e-14;
        EXPECT_EQ(c1 < 0, on_boundary);
      }
      EXPECT_LE(m.quasi_uniformity(), 4.0);
    }
  }
}

TEST(Mesh, SideSizingHalvesExactly) {
  const MeshFamily f = grid(MeshKind::structured_quad, 3);
  for (int level = 0; level < 5; ++level) {
    EXPECT_DOUBLE_EQ(f.nominal_h(level), 1.0 / (3 << level));
    EXPECT_DOUBLE_EQ(generate(f, level).nominal_h(), f.nominal_h(level));
  }
}

TEST(Mesh, DiameterSizingBoundsCellDiameter) {
  MeshFamily f = grid(MeshKind::structured_triangle, 1);
  f.sizing = MeshSizing::diameter;
  for (int level = 0; level <= 6; ++level) {
    const HybridMesh m = generate(f, level);
    EXPECT_DOUBLE_EQ(m.nominal_h(), std::ldexp(1.0, -level));
    EXPECT_LE(m.max_cell_diameter(), m.nominal_h() * (1 + 1e-12));
    EXPECT_GT(m.max_cell_diameter(), 0.7 * m.nominal_h());
  }
  EXPECT_EQ(f.divisions(3), 12);
  EXPECT_EQ(f.divisions(6), 91);
}

TEST(Mesh, PerturbationKeepsBoundaryAndBoundsMoves) {
  MeshFamily f = grid(MeshKind::perturbed, 4);
  f.perturbation = 0.3;
  const HybridMesh p = generate(f, 1);
  f.perturbation = 0.0;
  const HybridMesh s = generate(f, 1);
  const double side = 1.0 / 8.0;
  bool moved = false;
  ASSERT_EQ(p.num_vertices(), s.num_vertices());
  for (Index v = 0; v < p.num_vertices(); ++v) {
    const double d = (p.vertex(v) - s.vertex(v)).norm();
    EXPECT_LE(d, 0.3 * side + 1e-15);
    const Vec2 x = s.vertex(v);
    if (x.x() == 0 || x.x() == 1 || x.y() == 0 || x.y() == 1) {
      EXPECT_EQ(d, 0.0);
    }
    moved = moved || d > 0;
  }
  EXPECT_TRUE(moved);
  for (Index c = 0; c < p.num_cells(); ++c) EXPECT_EQ(p.cell(c).shape, Shape::triangle);
}

TEST(Mesh, PerturbationIsDeterministic) {
  const MeshFamily f = grid(MeshKind::perturbed, 4);
  const HybridMesh a = generate(f, 2), b = generate(f, 2);
  for (Index v = 0; v < a.num_vertices(); ++v) EXPECT_EQ(a.vertex(v), b.vertex(v));
}

TEST(Mesh, RejectsLargePerturbation) {
  MeshFamily f = grid(MeshKind::perturbed, 2);
  f.perturbation = 0.5;
  EXPECT_THROW(generate(f, 0), Error);
  EXPECT_THROW(generate(grid(MeshKind::hybrid, 2), -1), Error);
}

TEST(Mesh, RejectsNonParallelogram) {
  EXPECT_THROW(HybridMesh({{0, 0}, {1, 0}, {1.2, 1}, {0, 1}}, {{Shape::parallelogram, {0, 1, 2, 3}}}), MeshError);
  EXPECT_NO_THROW(HybridMesh({{0, 0}, {1, 0}, {1.5, 1}, {0.5, 1}}, {{Shape::parallelogram, {0, 1, 2, 3}}}));
}

TEST(Mesh, RejectsClockwiseCell) {
  EXPECT_THROW(HybridMesh({{0, 0}, {1, 0}, {0, 1}}, {{Shape::triangle, {0, 2, 1, -1}}}), MeshError);
}

TEST(Mesh, RejectsNonManifoldEdge) {
  EXPECT_THROW(HybridMesh({{0, 0}, {1, 0}, {0.5, 1}, {0.5, -1}, {0.5, 2}},
                          {{Shape::triangle, {0, 1, 2, -1}},
                           {Shape::triangle, {1, 0, 3, -1}},
                           {Shape::triangle, {0, 1, 4, -1}}}),
               MeshError);
}

TEST(Mesh, TextRoundTrip) {
  const HybridMesh m = generate(grid(MeshKind::hybrid, 2), 1);
  std::stringstream ss;
  write_mesh(ss, m);
  EXPECT_EQ(ss.str().substr(0, 20), "vertices 25 cells 24");
  const HybridMesh r = read_mesh(ss);
  ASSERT_EQ(r.num_vertices(), m.num_vertices());
  ASSERT_EQ(r.num_cells(), m.num_cells());
  EXPECT_EQ(r.num_edges(), m.num_edges());
  for (Index v = 0; v < m.num_vertices(); ++v) EXPECT_EQ(r.vertex(v), m.vertex(v));
  for (Index c = 0; c < m.num_cells(); ++c) {
    EXPECT_EQ(r.cell(c).shape, m.cell(c).shape);
    EXPECT_EQ(r.cell(c).vertices, m.cell(c).vertices);
  }
}

TEST(Mesh, ReadRejectsMalformedInput) {
  std::stringstream bad("vertices 3 cells 1\n0 0\n1 0\n0 1\npent 0 1 2\n");
  EXPECT_THROW(read_mesh(bad), Error);
  std::stringstream out_of_range("vertices 3 cells 1\n0 0\n1 0\n0 1\ntri 0 1 7\n");
  EXPECT_THROW(read_mesh(out_of_range), Error);
}
