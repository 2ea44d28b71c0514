#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "perflod/errors.hpp"
#include "perflod/geometry.hpp"

namespace perflod {

using Triangle = std::array<int, 3>;

/// Uniform triangulation of [0,1]^2 with n cells per side. Cell (i,j) is split
/// along the diagonal from its lower-left to its upper-right corner into a
/// lower triangle (index 2c) and an upper triangle (index 2c+1), c = j*n + i.
class StructuredMesh {
public:
  explicit StructuredMesh(int n) : n_(n) {
    if (n <= 0) throw std::invalid_argument("structured mesh needs n >= 1 cells per side");
    const int nv = (n + 1) * (n + 1);
    vertices_.resize(static_cast<std::size_t>(nv));
    for (int j = 0; j <= n; ++j)
      for (int i = 0; i <= n; ++i)
        vertices_[static_cast<std::size_t>(vertex_index(i, j))] = {static_cast<double>(i) / n,
                                                                   static_cast<double>(j) / n};
    triangles_.reserve(static_cast<std::size_t>(2) * n * n);
    for (int j = 0; j < n; ++j)
      for (int i = 0; i < n; ++i) {
        const int v00 = vertex_index(i, j), v10 = vertex_index(i + 1, j);
        const int v11 = vertex_index(i + 1, j + 1), v01 = vertex_index(i, j + 1);
        triangles_.push_back({v00, v10, v11});
        triangles_.push_back({v00, v11, v01});
      }

    incident_offsets_.assign(static_cast<std::size_t>(nv) + 1, 0);
    for (const auto& t : triangles_)
      for (int v : t) ++incident_offsets_[static_cast<std::size_t>(v) + 1];
    for (int v = 0; v < nv; ++v) incident_offsets_[v + 1] += incident_offsets_[v];
    incident_.resize(triangles_.size() * 3);
    std::vector<int> fill(incident_offsets_.begin(), incident_offsets_.end() - 1);
    for (int t = 0; t < triangle_count(); ++t)
      for (int v : triangles_[static_cast<std::size_t>(t)]) incident_[static_cast<std::size_t>(fill[v]++)] = t;
  }

  int cells_per_side() const noexcept { return n_; }
  double h() const noexcept { return 1.0 / n_; }
  int vertex_count() const noexcept { return static_cast<int>(vertices_.size()); }
  int triangle_count() const noexcept { return static_cast<int>(triangles_.size()); }

  int vertex_index(int i, int j) const noexcept { return j * (n_ + 1) + i; }
  std::pair<int, int> vertex_grid(int v) const noexcept { return {v % (n_ + 1), v / (n_ + 1)}; }

  const std::vector<Point2>& vertices() const noexcept { return vertices_; }
  const std::vector<Triangle>& triangles() const noexcept { return triangles_; }
  const Point2& vertex(int v) const { return vertices_[static_cast<std::size_t>(v)]; }
  const Triangle& triangle(int t) const { return triangles_[static_cast<std::size_t>(t)]; }

  bool on_boundary(int v) const noexcept {
    const auto [i, j] = vertex_grid(v);
    return i == 0 || j == 0 || i == n_ || j == n_;
  }

  Point2 barycenter(int t) const {
    const auto& tri = triangle(t);
    Point2 b;
    for (int v : tri) {
      b.x += vertex(v).x;
      b.y += vertex(v).y;
    }
    return {b.x / 3.0, b.y / 3.0};
  }

  double triangle_area() const noexcept { return 0.5 / (static_cast<double>(n_) * n_); }

  /// Triangles containing vertex v, in increasing index order.
  std::pair<const int*, const int*> incident(int v) const noexcept {
    const int* base = incident_.data();
    return {base + incident_offsets_[static_cast<std::size_t>(v)],
            base + incident_offsets_[static_cast<std::size_t>(v) + 1]};
  }

private:
  int n_;
  std::vector<Point2> vertices_;
  std::vector<Triangle> triangles_;
  std::vector<int> incident_offsets_;
  std::vector<int> incident_;
};

inline StructuredMesh build_structured_mesh(int n) {
  if (n <= 0) throw std::invalid_argument("build_structured_mesh: n must be >= 1");
  if ((n & (n - 1)) != 0) throw std::invalid_argument("build_structured_mesh: n must be a power of two");
  return StructuredMesh(n);
}

/// For each triangle, the neighbor across the edge opposite local vertex l
/// (or -1 when that edge is on the boundary of the triangle set).
inline std::vector<std::array<int, 3>> triangle_neighbors(const std::vector<Triangle>& tris) {
  struct EdgeRef {
    long long key;
    int tri;
    int local;
  };
  std::vector<EdgeRef> edges;
  edges.reserve(tris.size() * 3);
  for (std::size_t t = 0; t < tris.size(); ++t)
    for (int l = 0; l < 3; ++l) {
      const int a = tris[t][(l + 1) % 3], b = tris[t][(l + 2) % 3];
      const long long key = (static_cast<long long>(std::min(a, b)) << 32) | static_cast<unsigned>(std::max(a, b));
      edges.push_back({key, static_cast<int>(t), l});
    }
  std::sort(edges.begin(), edges.end(), [](const EdgeRef& p, const EdgeRef& q) {
    return p.key != q.key ? p.key < q.key : p.tri < q.tri;
  });
  std::vector<std::array<int, 3>> nb(tris.size(), {-1, -1, -1});
  for (std::size_t e = 0; e + 1 < edges.size(); ++e)
    if (edges[e].key == edges[e + 1].key) {
      nb[static_cast<std::size_t>(edges[e].tri)][static_cast<std::size_t>(edges[e].local)] = edges[e + 1].tri;
      nb[static_cast<std::size_t>(edges[e + 1].tri)][static_cast<std::size_t>(edges[e + 1].local)] = edges[e].tri;
      ++e;
    }
  return nb;
}

/// Fine mesh with the solid set removed. Triangles whose barycenter lies in
/// the solid are inactive; vertices touching an active triangle and not on
/// the outer boundary are the free degrees of freedom.
struct PerforatedMesh {
  StructuredMesh base;
  GeometrySpec spec;
  std::vector<char> active;
  std::vector<int> free_dof;   // per vertex, -1 when not a free dof
  std::vector<int> dof_vertex; // per free dof
  std::vector<int> boundary_vertices;

  int free_count() const noexcept { return static_cast<int>(dof_vertex.size()); }
  double h() const noexcept { return base.h(); }
  bool is_active(int t) const { return active[static_cast<std::size_t>(t)] != 0; }

  int active_count() const {
    return static_cast<int>(std::count(active.begin(), active.end(), static_cast<char>(1)));
  }

  std::vector<int> active_triangles() const {
    std::vector<int> out;
    for (int t = 0; t < base.triangle_count(); ++t)
      if (is_active(t)) out.push_back(t);
    return out;
  }
};

/// Breadth-first search over edge-adjacent active triangles.
inline bool active_graph_connected(const StructuredMesh& mesh, const std::vector<char>& active) {
  const auto nb = triangle_neighbors(mesh.triangles());
  int start = -1, total = 0;
  for (int t = 0; t < mesh.triangle_count(); ++t)
    if (active[static_cast<std::size_t>(t)]) {
      if (start < 0) start = t;
      ++total;
    }
  if (start < 0) return false;
  std::vector<char> seen(active.size(), 0);
  std::deque<int> queue{start};
  seen[static_cast<std::size_t>(start)] = 1;
  int reached = 0;
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    ++reached;
    for (int s : nb[static_cast<std::size_t>(t)])
      if (s >= 0 && active[static_cast<std::size_t>(s)] && !seen[static_cast<std::size_t>(s)]) {
        seen[static_cast<std::size_t>(s)] = 1;
        queue.push_back(s);
      }
  }
  return reached == total;
}

inline PerforatedMesh perforate(StructuredMesh mesh, const GeometrySpec& spec) {
  validate(spec);
  const double cells_per_unit = alignment_unit(spec) * mesh.cells_per_side();
  if (cells_per_unit < 1.0 || cells_per_unit != std::floor(cells_per_unit))
    throw ConfigError("fine grid h = 1/" + std::to_string(mesh.cells_per_side()) + " does not resolve " +
                      to_string(spec.kind) + " with eta = " + format_length(spec.eta));

  PerforatedMesh pm{std::move(mesh), spec, {}, {}, {}, {}};
  const auto& base = pm.base;
  pm.active.resize(static_cast<std::size_t>(base.triangle_count()));
  for (int t = 0; t < base.triangle_count(); ++t)
    pm.active[static_cast<std::size_t>(t)] = is_solid(spec, base.barycenter(t)) ? 0 : 1;

  if (!active_graph_connected(base, pm.active))
    throw GeometryError("perforated domain is disconnected for " + to_string(spec.kind) +
                        " with eta = " + format_length(spec.eta));

  pm.free_dof.assign(static_cast<std::size_t>(base.vertex_count()), -1);
  for (int v = 0; v < base.vertex_count(); ++v) {
    if (base.on_boundary(v)) {
      pm.boundary_vertices.push_back(v);
      continue;
    }
    const auto [first, last] = base.incident(v);
    const bool touches = std::any_of(first, last, [&](int t) { return pm.is_active(t); });
    if (touches) {
      pm.free_dof[static_cast<std::size_t>(v)] = static_cast<int>(pm.dof_vertex.size());
      pm.dof_vertex.push_back(v);
    }
  }
  return pm;
}

/// Plain-text dump: "v x y" per vertex, then "t i j k a" per triangle with a
/// the activity flag.
inline void write_mesh(std::ostream& out, const PerforatedMesh& pm) {
  char buf[96];
  for (const auto& p : pm.base.vertices()) {
    std::snprintf(buf, sizeof buf, "v %.17g %.17g\n", p.x, p.y);
    out << buf;
  }
  for (int t = 0; t < pm.base.triangle_count(); ++t) {
    const auto& tri = pm.base.triangle(t);
    out << "t " << tri[0] << ' ' << tri[1] << ' ' << tri[2] << ' ' << (pm.is_active(t) ? 1 : 0) << '\n';
  }
}

/// Coarse extension patch around coarse node x after k layers.
struct PatchSet {
  int node = -1;
  int layers = 0;
  std::vector<int> coarse_triangles;   // sorted coarse triangle indices
  std::vector<int> fine_triangles;     // sorted active fine triangles inside
  std::vector<int> interior_fine_dofs; // sorted free dofs with every active neighbor inside
};

/// A fine perforated mesh together with a nested coarse structured mesh.
/// Parent/child relations use integer grid arithmetic only.
class MeshHierarchy {
public:
  MeshHierarchy(const PerforatedMesh& fine, int coarse_n) : fine_(&fine), coarse_(coarse_n) {
    const int nf = fine.base.cells_per_side();
    if (coarse_n <= 0 || nf % coarse_n != 0)
      throw ConfigError("coarse grid 1/" + std::to_string(coarse_n) + " is not nested in fine grid 1/" +
                        std::to_string(nf));
    ratio_ = nf / coarse_n;
    parent_.resize(static_cast<std::size_t>(fine.base.triangle_count()));
    children_.assign(static_cast<std::size_t>(coarse_.triangle_count()), {});
    for (int t = 0; t < fine.base.triangle_count(); ++t) {
      const int c = t / 2, s = t % 2;
      const int i = c % nf, j = c / nf;
      const int a = i % ratio_, b = j % ratio_;
      const bool lower = (s == 0) ? (a >= b) : (a > b);
      const int p = 2 * ((j / ratio_) * coarse_n + i / ratio_) + (lower ? 0 : 1);
      parent_[static_cast<std::size_t>(t)] = p;
      children_[static_cast<std::size_t>(p)].push_back(t);
    }
  }

  const PerforatedMesh& fine() const noexcept { return *fine_; }
  const StructuredMesh& coarse() const noexcept { return coarse_; }
  int ratio() const noexcept { return ratio_; }
  int coarse_parent(int fine_triangle) const { return parent_[static_cast<std::size_t>(fine_triangle)]; }
  const std::vector<int>& children(int coarse_triangle) const {
    return children_[static_cast<std::size_t>(coarse_triangle)];
  }

  bool is_interior_node(int x) const {
    return x >= 0 && x < coarse_.vertex_count() && !coarse_.on_boundary(x);
  }

  /// Layer 0 is the support of the hat function at x; each further layer
  /// adds every coarse triangle sharing at least a vertex with the previous one.
  std::vector<int> coarse_layers(int x, int k) const {
    if (!is_interior_node(x)) throw std::invalid_argument("patch centre must be an interior coarse node");
    if (k < 0) throw std::invalid_argument("patch layer count must be nonnegative");
    std::vector<char> in(static_cast<std::size_t>(coarse_.triangle_count()), 0);
    std::vector<int> current;
    {
      const auto [first, last] = coarse_.incident(x);
      current.assign(first, last);
      for (int t : current) in[static_cast<std::size_t>(t)] = 1;
    }
    for (int layer = 1; layer <= k; ++layer) {
      std::vector<char> vert(static_cast<std::size_t>(coarse_.vertex_count()), 0);
      for (int t : current)
        for (int v : coarse_.triangle(t)) vert[static_cast<std::size_t>(v)] = 1;
      std::vector<int> next = current;
      for (int v = 0; v < coarse_.vertex_count(); ++v) {
        if (!vert[static_cast<std::size_t>(v)]) continue;
        const auto [first, last] = coarse_.incident(v);
        for (const int* it = first; it != last; ++it)
          if (!in[static_cast<std::size_t>(*it)]) {
            in[static_cast<std::size_t>(*it)] = 1;
            next.push_back(*it);
          }
      }
      if (next.size() == current.size()) break; // saturated
      current = std::move(next);
    }
    std::sort(current.begin(), current.end());
    return current;
  }

  PatchSet patch(int x, int k) const {
    PatchSet ps;
    ps.node = x;
    ps.layers = k;
    ps.coarse_triangles = coarse_layers(x, k);
    const auto& pm = *fine_;
    std::vector<char> inside(static_cast<std::size_t>(pm.base.triangle_count()), 0);
    for (int ct : ps.coarse_triangles)
      for (int ft : children(ct))
        if (pm.is_active(ft)) {
          inside[static_cast<std::size_t>(ft)] = 1;
          ps.fine_triangles.push_back(ft);
        }
    std::sort(ps.fine_triangles.begin(), ps.fine_triangles.end());

    std::vector<char> checked(static_cast<std::size_t>(pm.base.vertex_count()), 0);
    for (int ft : ps.fine_triangles)
      for (int v : pm.base.triangle(ft)) {
        if (checked[static_cast<std::size_t>(v)]) continue;
        checked[static_cast<std::size_t>(v)] = 1;
        const int dof = pm.free_dof[static_cast<std::size_t>(v)];
        if (dof < 0) continue;
        const auto [first, last] = pm.base.incident(v);
        const bool all_inside = std::all_of(first, last, [&](int t) {
          return !pm.is_active(t) || inside[static_cast<std::size_t>(t)];
        });
        if (all_inside) ps.interior_fine_dofs.push_back(dof);
      }
    std::sort(ps.interior_fine_dofs.begin(), ps.interior_fine_dofs.end());
    return ps;
  }

  /// Smallest k for which the patch around x covers the whole coarse mesh.
  int saturation_layer(int x) const {
    const auto total = static_cast<std::size_t>(coarse_.triangle_count());
    for (int k = 0;; ++k)
      if (coarse_layers(x, k).size() == total) return k;
  }

  /// Smallest k saturating every interior node's patch.
  int saturation_layer() const {
    int k = 0;
    for (int x = 0; x < coarse_.vertex_count(); ++x)
      if (is_interior_node(x)) k = std::max(k, saturation_layer(x));
    return k;
  }

private:
  const PerforatedMesh* fine_;
  StructuredMesh coarse_;
  int ratio_ = 1;
  std::vector<int> parent_;
  std::vector<std::vector<int>> children_;
};

inline PatchSet patch(const PerforatedMesh& pm, const StructuredMesh& coarse, int x, int k) {
  return MeshHierarchy(pm, coarse.cells_per_side()).patch(x, k);
}

} // namespace perflod
