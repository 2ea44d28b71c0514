#include <gtest/gtest.h>

#include <algorithm>
#include <set>
#include <sstream>

#include "perflod/mesh.hpp"

using namespace perflod;

namespace {

// Union-find over triangles sharing two vertices; independent of triangle_neighbors.
int component_count(const StructuredMesh& m, const std::vector<char>& active) {
  std::vector<int> parent(static_cast<std::size_t>(m.triangle_count()));
  for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = static_cast<int>(i);
  auto find = [&](int a) {
    while (parent[static_cast<std::size_t>(a)] != a) a = parent[static_cast<std::size_t>(a)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(a)])];
    return a;
  };
  for (int a = 0; a < m.triangle_count(); ++a)
    for (int b = a + 1; b < m.triangle_count(); ++b) {
      if (!active[static_cast<std::size_t>(a)] || !active[static_cast<std::size_t>(b)]) continue;
      int shared = 0;
      for (int u : m.triangle(a))
        for (int v : m.triangle(b)) shared += u == v;
      if (shared == 2) parent[static_cast<std::size_t>(find(a))] = find(b);
    }
  std::set<int> roots;
  for (int t = 0; t < m.triangle_count(); ++t)
    if (active[static_cast<std::size_t>(t)]) roots.insert(find(t));
  return static_cast<int>(roots.size());
}

bool point_in_triangle(const StructuredMesh& m, int t, Point2 p) {
  const auto& tri = m.triangle(t);
  auto cross = [](Point2 a, Point2 b, Point2 c) { return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x); };
  const Point2 a = m.vertex(tri[0]), b = m.vertex(tri[1]), c = m.vertex(tri[2]);
  const double e = 1e-14;
  return cross(a, b, p) >= -e && cross(b, c, p) >= -e && cross(c, a, p) >= -e;
}

// Patch by repeated vertex-sharing expansion using plain sets.
std::set<int> brute_layers(const StructuredMesh& m, int x, int k) {
  std::set<int> tris;
  for (int t = 0; t < m.triangle_count(); ++t)
    for (int v : m.triangle(t))
      if (v == x) tris.insert(t);
  for (int layer = 0; layer < k; ++layer) {
    std::set<int> verts;
    for (int t : tris)
      for (int v : m.triangle(t)) verts.insert(v);
    std::set<int> next = tris;
    for (int t = 0; t < m.triangle_count(); ++t)
      for (int v : m.triangle(t))
        if (verts.count(v)) next.insert(t);
    tris = next;
  }
  return tris;
}

} // namespace

TEST(StructuredMesh, CountsAndOrientation) {
  const auto m = build_structured_mesh(2);
  EXPECT_EQ(m.vertex_count(), 9);
  EXPECT_EQ(m.triangle_count(), 8);
  EXPECT_DOUBLE_EQ(m.triangle_area(), 0.125);
  for (int t = 0; t < m.triangle_count(); ++t) {
    const auto& tri = m.triangle(t);
    const Point2 a = m.vertex(tri[0]), b = m.vertex(tri[1]), c = m.vertex(tri[2]);
    const double area = 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
    EXPECT_DOUBLE_EQ(area, m.triangle_area());
  }
  EXPECT_EQ(m.triangle(0), (Triangle{0, 1, 4}));
  EXPECT_EQ(m.triangle(1), (Triangle{0, 4, 3}));
  EXPECT_TRUE(m.on_boundary(0));
  EXPECT_FALSE(m.on_boundary(4));
}

TEST(StructuredMesh, RejectsNonPowerOfTwo) {
  EXPECT_THROW(build_structured_mesh(3), std::invalid_argument);
  EXPECT_THROW(build_structured_mesh(0), std::invalid_argument);
}

TEST(StructuredMesh, IncidentListsAreComplete) {
  const auto m = build_structured_mesh(4);
  for (int v = 0; v < m.vertex_count(); ++v) {
    std::vector<int> expected;
    for (int t = 0; t < m.triangle_count(); ++t)
      for (int u : m.triangle(t))
        if (u == v) expected.push_back(t);
    const auto [first, last] = m.incident(v);
    EXPECT_EQ(std::vector<int>(first, last), expected);
  }
}

TEST(StructuredMesh, NeighborsAreSymmetric) {
  const auto m = build_structured_mesh(4);
  const auto nb = triangle_neighbors(m.triangles());
  int boundary_edges = 0;
  for (int t = 0; t < m.triangle_count(); ++t)
    for (int l = 0; l < 3; ++l) {
      const int s = nb[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)];
      if (s < 0) {
        ++boundary_edges;
        continue;
      }
      const auto& ns = nb[static_cast<std::size_t>(s)];
      EXPECT_NE(std::find(ns.begin(), ns.end(), t), ns.end());
    }
  EXPECT_EQ(boundary_edges, 16);
}

TEST(Perforate, UnperforatedFreeDofs) {
  const auto pm = perforate(build_structured_mesh(8), {GeometryKind::Unperforated});
  EXPECT_EQ(pm.free_count(), 49);
  EXPECT_EQ(pm.active_count(), 128);
  EXPECT_EQ(static_cast<int>(pm.boundary_vertices.size()), 32);
}

TEST(Perforate, PeriodicRemovesQuarterOfTriangles) {
  const auto pm = perforate(build_structured_mesh(32), {GeometryKind::PeriodicSquares, 0.125});
  EXPECT_EQ(pm.active_count(), 2048 * 3 / 4);
  // vertices strictly inside holes are not dofs
  int inside = 0;
  for (int v = 0; v < pm.base.vertex_count(); ++v) {
    const auto [first, last] = pm.base.incident(v);
    const bool all_solid = std::none_of(first, last, [&](int t) { return pm.is_active(t); });
    if (all_solid) {
      ++inside;
      EXPECT_EQ(pm.free_dof[static_cast<std::size_t>(v)], -1);
    }
  }
  EXPECT_EQ(inside, 64);
}

TEST(Perforate, MisalignedGridThrows) {
  EXPECT_THROW(perforate(build_structured_mesh(16), {GeometryKind::PeriodicSquares, 0.125}), ConfigError);
  EXPECT_THROW(perforate(build_structured_mesh(4), {GeometryKind::Filament, 0.125}), ConfigError);
}

TEST(Perforate, ConnectivityMatchesUnionFind) {
  const std::vector<GeometrySpec> specs{{GeometryKind::PeriodicSquares, 0.25},
                                        {GeometryKind::Filament, 0.125},
                                        {GeometryKind::Dumbbell, 0.125, 0.125}};
  for (const auto& g : specs) {
    const auto pm = perforate(build_structured_mesh(32), g);
    EXPECT_EQ(component_count(pm.base, pm.active), 1);
    EXPECT_TRUE(active_graph_connected(pm.base, pm.active));
  }
  // vertical solid column splits the square
  const auto m = build_structured_mesh(8);
  std::vector<char> active(static_cast<std::size_t>(m.triangle_count()), 1);
  for (int t = 0; t < m.triangle_count(); ++t)
    if (std::abs(m.barycenter(t).x - 0.5) < 0.125) active[static_cast<std::size_t>(t)] = 0;
  EXPECT_EQ(component_count(m, active), 2);
  EXPECT_FALSE(active_graph_connected(m, active));
  // corner-touching pair is disconnected through edges
  std::vector<char> pair(static_cast<std::size_t>(m.triangle_count()), 0);
  pair[0] = 1;                                    // lower triangle of cell (0,0)
  pair[static_cast<std::size_t>(2 * (1 * 8 + 1) + 1)] = 1; // upper triangle of cell (1,1)
  EXPECT_EQ(component_count(m, pair), 2);
  EXPECT_FALSE(active_graph_connected(m, pair));
}

TEST(Perforate, WriteMeshLineCounts) {
  const auto pm = perforate(build_structured_mesh(4), {GeometryKind::Unperforated});
  std::ostringstream out;
  write_mesh(out, pm);
  const std::string s = out.str();
  EXPECT_EQ(std::count(s.begin(), s.end(), '\n'), 25 + 32);
  EXPECT_EQ(s.substr(0, 2), "v ");
}

TEST(MeshHierarchy, ParentContainsChildBarycenter) {
  const auto pm = perforate(build_structured_mesh(16), {GeometryKind::Unperforated});
  for (int coarse_n : {1, 2, 4, 16}) {
    MeshHierarchy mh(pm, coarse_n);
    EXPECT_EQ(mh.ratio(), 16 / coarse_n);
    std::size_t total = 0;
    for (int t = 0; t < pm.base.triangle_count(); ++t)
      EXPECT_TRUE(point_in_triangle(mh.coarse(), mh.coarse_parent(t), pm.base.barycenter(t)));
    for (int c = 0; c < mh.coarse().triangle_count(); ++c) {
      EXPECT_EQ(static_cast<int>(mh.children(c).size()), mh.ratio() * mh.ratio());
      total += mh.children(c).size();
    }
    EXPECT_EQ(static_cast<int>(total), pm.base.triangle_count());
  }
}

TEST(MeshHierarchy, NonNestedThrows) {
  const auto pm = perforate(build_structured_mesh(16), {GeometryKind::Unperforated});
  EXPECT_THROW(MeshHierarchy(pm, 32), ConfigError);
  EXPECT_THROW(MeshHierarchy(pm, 3), ConfigError);
}

TEST(MeshHierarchy, LayersMatchBruteForce) {
  const auto pm = perforate(build_structured_mesh(8), {GeometryKind::Unperforated});
  MeshHierarchy mh(pm, 8);
  for (int x : {10, 20, 40, 70})
    for (int k = 0; k <= 4; ++k) {
      const auto got = mh.coarse_layers(x, k);
      const auto want = brute_layers(mh.coarse(), x, k);
      EXPECT_EQ(std::set<int>(got.begin(), got.end()), want) << "x " << x << " k " << k;
    }
  EXPECT_EQ(mh.coarse_layers(40, 0).size(), 6u);
  EXPECT_THROW(mh.coarse_layers(0, 1), std::invalid_argument);
  EXPECT_THROW(mh.coarse_layers(40, -1), std::invalid_argument);
}

TEST(MeshHierarchy, SaturationLayer) {
  const auto pm = perforate(build_structured_mesh(16), {GeometryKind::Unperforated});
  MeshHierarchy mh(pm, 8);
  const int k = mh.saturation_layer();
  EXPECT_EQ(k, 13);
  int worst = 0;
  for (int x = 0; x < mh.coarse().vertex_count(); ++x)
    if (mh.is_interior_node(x)) {
      const int kx = mh.saturation_layer(x);
      worst = std::max(worst, kx);
      EXPECT_EQ(brute_layers(mh.coarse(), x, kx).size(), 128u);
      if (kx > 0) EXPECT_LT(brute_layers(mh.coarse(), x, kx - 1).size(), 128u);
    }
  EXPECT_EQ(worst, k);
}

TEST(MeshHierarchy, InteriorDofsHaveAllActiveNeighborsInside) {
  const auto pm = perforate(build_structured_mesh(32), {GeometryKind::PeriodicSquares, 0.125});
  MeshHierarchy mh(pm, 8);
  const int x = mh.coarse().vertex_index(3, 4);
  for (int k = 0; k <= 2; ++k) {
    const auto ps = mh.patch(x, k);
    const std::set<int> fine(ps.fine_triangles.begin(), ps.fine_triangles.end());
    const std::set<int> interior(ps.interior_fine_dofs.begin(), ps.interior_fine_dofs.end());
    for (int t : ps.fine_triangles) EXPECT_TRUE(pm.is_active(t));
    for (int dof = 0; dof < pm.free_count(); ++dof) {
      const int v = pm.dof_vertex[static_cast<std::size_t>(dof)];
      const auto [first, last] = pm.base.incident(v);
      bool touches = false, all = true;
      for (const int* it = first; it != last; ++it) {
        if (!pm.is_active(*it)) continue;
        touches = touches || fine.count(*it);
        all = all && fine.count(*it);
      }
      EXPECT_EQ(interior.count(dof) == 1, touches && all) << "dof " << dof;
    }
  }
  EXPECT_LT(mh.patch(x, 0).interior_fine_dofs.size(), mh.patch(x, 1).interior_fine_dofs.size());
}
