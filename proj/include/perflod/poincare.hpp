#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <deque>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "perflod/errors.hpp"
#include "perflod/fem.hpp"
#include "perflod/geometry.hpp"
#include "perflod/mesh.hpp"

namespace perflod {

/// Triangulated patch with compact vertex numbering.
struct PatchMesh {
  std::vector<Point2> vertices;
  std::vector<Triangle> triangles;
};

/// Keeps the listed triangles of a vertex/triangle set and renumbers vertices.
inline PatchMesh compact_patch(const std::vector<Point2>& vertices, const std::vector<Triangle>& triangles,
                               const std::vector<int>& keep) {
  PatchMesh out;
  std::vector<int> map(vertices.size(), -1);
  for (int t : keep) {
    Triangle tri = triangles[static_cast<std::size_t>(t)];
    for (int& v : tri) {
      int& m = map[static_cast<std::size_t>(v)];
      if (m < 0) {
        m = static_cast<int>(out.vertices.size());
        out.vertices.push_back(vertices[static_cast<std::size_t>(v)]);
      }
      v = m;
    }
    out.triangles.push_back(tri);
  }
  return out;
}

/// Square window [origin, origin + size]^2 of a perforation pattern meshed
/// with `cells` cells per side; triangles with solid barycenter are dropped.
inline PatchMesh window_patch(const GeometrySpec& spec, Point2 origin, double size, int cells) {
  validate(spec);
  if (cells <= 0 || !(size > 0.0)) throw ConfigError("window patch needs positive size and cell count");
  const double h = size / cells;
  const double per_unit = alignment_unit(spec) / h;
  const double ox = origin.x / h, oy = origin.y / h;
  if (per_unit < 1.0 || per_unit != std::floor(per_unit) || ox != std::floor(ox) || oy != std::floor(oy))
    throw ConfigError("window patch grid does not resolve the perforation");
  const StructuredMesh mesh(cells);
  std::vector<Point2> verts;
  verts.reserve(mesh.vertices().size());
  for (const auto& p : mesh.vertices()) verts.push_back({origin.x + size * p.x, origin.y + size * p.y});
  std::vector<int> keep;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Point2 b = mesh.barycenter(t);
    if (!is_solid(spec, {origin.x + size * b.x, origin.y + size * b.y})) keep.push_back(t);
  }
  if (keep.empty()) throw GeometryError("window patch lies entirely in the solid");
  return compact_patch(verts, mesh.triangles(), keep);
}

/// The unit square perforated by `spec`, meshed with n cells per side.
inline PatchMesh unit_patch(const GeometrySpec& spec, int n) { return window_patch(spec, {0.0, 0.0}, 1.0, n); }

/// The right triangle (0,0), (1,0), (1,1) split into m^2 congruent triangles.
inline PatchMesh right_triangle_patch(int m) {
  const StructuredMesh mesh(m);
  std::vector<int> keep;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const Point2 b = mesh.barycenter(t);
    if (b.y < b.x) keep.push_back(t);
  }
  return compact_patch(mesh.vertices(), mesh.triangles(), keep);
}

inline double distance(Point2 a, Point2 b) { return std::hypot(a.x - b.x, a.y - b.y); }

inline double triangle_area(const PatchMesh& pm, int t) {
  const auto& tri = pm.triangles[static_cast<std::size_t>(t)];
  return std::abs(signed_area(pm.vertices[static_cast<std::size_t>(tri[0])], pm.vertices[static_cast<std::size_t>(tri[1])],
                              pm.vertices[static_cast<std::size_t>(tri[2])]));
}

inline double triangle_diameter(const PatchMesh& pm, int t) {
  const auto& tri = pm.triangles[static_cast<std::size_t>(t)];
  double d = 0.0;
  for (int a = 0; a < 3; ++a)
    d = std::max(d, distance(pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])],
                             pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>((a + 1) % 3)])]));
  return d;
}

/// Diameter of the inscribed circle, 4|K| / perimeter.
inline double inscribed_diameter(const PatchMesh& pm, int t) {
  const auto& tri = pm.triangles[static_cast<std::size_t>(t)];
  double perimeter = 0.0;
  for (int a = 0; a < 3; ++a)
    perimeter += distance(pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])],
                          pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>((a + 1) % 3)])]);
  return 4.0 * triangle_area(pm, t) / perimeter;
}

/// Exact diameter of the vertex set (convex hull, then all hull pairs).
inline double patch_diameter(const std::vector<Point2>& pts) {
  if (pts.size() < 2) return 0.0;
  std::vector<Point2> p(pts);
  std::sort(p.begin(), p.end(), [](Point2 a, Point2 b) { return a.x != b.x ? a.x < b.x : a.y < b.y; });
  auto cross = [](Point2 o, Point2 a, Point2 b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); };
  std::vector<Point2> hull(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
    hull[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, lo = k + 1; i > 0; --i) {
    while (k >= lo && cross(hull[k - 2], hull[k - 1], p[i - 1]) <= 0) --k;
    hull[k++] = p[i - 1];
  }
  hull.resize(k > 1 ? k - 1 : k);
  double d = 0.0;
  for (std::size_t i = 0; i < hull.size(); ++i)
    for (std::size_t j = i + 1; j < hull.size(); ++j) d = std::max(d, distance(hull[i], hull[j]));
  return d;
}

inline double patch_diameter(const PatchMesh& pm) { return patch_diameter(pm.vertices); }

/// |K| >= diam(K) * (rho(K)/2)^(d-1) for every triangle, rho the inscribed diameter.
inline bool check_area_inradius(const PatchMesh& pm) {
  for (int t = 0; t < static_cast<int>(pm.triangles.size()); ++t)
    if (triangle_area(pm, t) < triangle_diameter(pm, t) * inscribed_diameter(pm, t) / 2.0 * (1.0 - 1e-12))
      return false;
  return true;
}

enum class FacetSide { Right, Left, Top, Bottom };

inline FacetSide parse_facet_side(const std::string& s) {
  if (s == "right") return FacetSide::Right;
  if (s == "left") return FacetSide::Left;
  if (s == "top") return FacetSide::Top;
  if (s == "bottom") return FacetSide::Bottom;
  throw ConfigError("unknown facet side '" + s + "'");
}

struct Facet {
  int simplex = -1;
  double length = 0.0;
};

/// Dual graph of the patch triangles with breadth-first path data towards
/// the facet set X* on one side of the bounding box.
struct PartitionGraph {
  std::vector<std::array<int, 3>> neighbors;
  std::vector<double> area;
  std::vector<double> diameter;
  std::vector<double> inscribed;
  std::vector<Facet> facets;
  double facet_length = 0.0;
  double patch_diameter = 0.0;

  // Paths to the nearest facet simplex (multi-source search).
  std::vector<int> s;           // simplices on the path, facet simplex included
  std::vector<int> predecessor; // next simplex towards X*, -1 on facet simplices
  std::vector<int> subtree;     // simplices whose nearest path passes through this one

  // All facets, one shortest-path tree each.
  int s_max_all = 0;
  int r_max_all = 0;

  int simplex_count() const noexcept { return static_cast<int>(area.size()); }
  int s_max() const { return s.empty() ? 0 : *std::max_element(s.begin(), s.end()); }
  int r_max() const { return subtree.empty() ? 0 : *std::max_element(subtree.begin(), subtree.end()); }
  double max_simplex_diameter() const { return diameter.empty() ? 0.0 : *std::max_element(diameter.begin(), diameter.end()); }
  double min_simplex_diameter() const { return diameter.empty() ? 0.0 : *std::min_element(diameter.begin(), diameter.end()); }

  double c_reg() const {
    double c = 0.0;
    for (std::size_t i = 0; i < area.size(); ++i) c = std::max(c, diameter[i] / inscribed[i]);
    return c;
  }

  /// Simplices along the path from k to X*, k first.
  std::vector<int> path(int k) const {
    std::vector<int> p;
    for (int i = k; i >= 0; i = predecessor[static_cast<std::size_t>(i)]) p.push_back(i);
    return p;
  }
};

namespace detail {

/// Breadth-first distances from `sources`; predecessor is the lowest-index
/// neighbor one step closer. Returns the visiting order.
inline std::vector<int> dual_bfs(const std::vector<std::array<int, 3>>& nb, const std::vector<int>& sources,
                                 std::vector<int>& dist, std::vector<int>& pred) {
  const std::size_t n = nb.size();
  dist.assign(n, -1);
  pred.assign(n, -1);
  std::vector<int> order;
  order.reserve(n);
  std::deque<int> queue;
  for (int s : sources)
    if (dist[static_cast<std::size_t>(s)] < 0) {
      dist[static_cast<std::size_t>(s)] = 0;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    const int t = queue.front();
    queue.pop_front();
    order.push_back(t);
    for (int u : nb[static_cast<std::size_t>(t)])
      if (u >= 0 && dist[static_cast<std::size_t>(u)] < 0) {
        dist[static_cast<std::size_t>(u)] = dist[static_cast<std::size_t>(t)] + 1;
        queue.push_back(u);
      }
  }
  for (std::size_t t = 0; t < n; ++t) {
    if (dist[t] <= 0) continue;
    int best = -1;
    for (int u : nb[t])
      if (u >= 0 && dist[static_cast<std::size_t>(u)] == dist[t] - 1 && (best < 0 || u < best)) best = u;
    pred[t] = best;
  }
  return order;
}

inline std::vector<int> subtree_sizes(const std::vector<int>& order, const std::vector<int>& pred) {
  std::vector<int> size(pred.size(), 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    size[static_cast<std::size_t>(*it)] += 1;
    const int p = pred[static_cast<std::size_t>(*it)];
    if (p >= 0) size[static_cast<std::size_t>(p)] += size[static_cast<std::size_t>(*it)];
  }
  return size;
}

} // namespace detail

inline PartitionGraph build_partition_graph(const PatchMesh& pm, FacetSide side = FacetSide::Right) {
  PartitionGraph g;
  const int n = static_cast<int>(pm.triangles.size());
  if (n == 0) throw GeometryError("partition graph of an empty patch");
  g.neighbors = triangle_neighbors(pm.triangles);
  g.area.resize(static_cast<std::size_t>(n));
  g.diameter.resize(static_cast<std::size_t>(n));
  g.inscribed.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) {
    g.area[static_cast<std::size_t>(t)] = triangle_area(pm, t);
    g.diameter[static_cast<std::size_t>(t)] = triangle_diameter(pm, t);
    g.inscribed[static_cast<std::size_t>(t)] = inscribed_diameter(pm, t);
  }
  g.patch_diameter = patch_diameter(pm);

  double xmin = pm.vertices[0].x, xmax = xmin, ymin = pm.vertices[0].y, ymax = ymin;
  for (const auto& p : pm.vertices) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double tol = 1e-12 * std::max(1.0, g.patch_diameter);
  auto on_side = [&](Point2 p) {
    switch (side) {
    case FacetSide::Right: return std::abs(p.x - xmax) <= tol;
    case FacetSide::Left: return std::abs(p.x - xmin) <= tol;
    case FacetSide::Top: return std::abs(p.y - ymax) <= tol;
    case FacetSide::Bottom: return std::abs(p.y - ymin) <= tol;
    }
    return false;
  };
  for (int t = 0; t < n; ++t)
    for (int l = 0; l < 3; ++l) {
      if (g.neighbors[static_cast<std::size_t>(t)][static_cast<std::size_t>(l)] >= 0) continue;
      const auto& tri = pm.triangles[static_cast<std::size_t>(t)];
      const Point2 a = pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>((l + 1) % 3)])];
      const Point2 b = pm.vertices[static_cast<std::size_t>(tri[static_cast<std::size_t>((l + 2) % 3)])];
      if (on_side(a) && on_side(b)) {
        g.facets.push_back({t, distance(a, b)});
        g.facet_length += distance(a, b);
      }
    }
  const double side_length = (side == FacetSide::Right || side == FacetSide::Left) ? ymax - ymin : xmax - xmin;
  if (g.facets.empty() || std::abs(g.facet_length - side_length) > 1e-9 * side_length)
    throw ConfigError("facet side of the patch is perforated");

  std::vector<int> sources;
  for (const auto& f : g.facets) sources.push_back(f.simplex);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  std::vector<int> dist;
  const auto order = detail::dual_bfs(g.neighbors, sources, dist, g.predecessor);
  if (static_cast<int>(order.size()) != n) throw GeometryError("dual graph of the patch is disconnected");
  g.s.resize(static_cast<std::size_t>(n));
  for (int t = 0; t < n; ++t) g.s[static_cast<std::size_t>(t)] = dist[static_cast<std::size_t>(t)] + 1;
  g.subtree = detail::subtree_sizes(order, g.predecessor);

  std::vector<int> total(static_cast<std::size_t>(n), 0);
  std::vector<int> pred;
  for (int src : sources) {
    const auto ord = detail::dual_bfs(g.neighbors, {src}, dist, pred);
    const auto sizes = detail::subtree_sizes(ord, pred);
    for (int t = 0; t < n; ++t) {
      total[static_cast<std::size_t>(t)] += sizes[static_cast<std::size_t>(t)];
      g.s_max_all = std::max(g.s_max_all, dist[static_cast<std::size_t>(t)] + 1);
    }
  }
  g.r_max_all = *std::max_element(total.begin(), total.end());
  return g;
}

enum class PoincareMethod { PathLemma64, PathLemma66, Telescoped, RayleighOracle };

inline std::string to_string(PoincareMethod m) {
  switch (m) {
  case PoincareMethod::PathLemma64: return "path_bound";
  case PoincareMethod::PathLemma66: return "counting_factor";
  case PoincareMethod::Telescoped: return "telescoped";
  case PoincareMethod::RayleighOracle: return "rayleigh";
  }
  return "unknown";
}

struct PoincareEstimate {
  PoincareMethod method = PoincareMethod::RayleighOracle;
  double value = 0.0;            // C_P, normalized by the patch diameter
  int s_max = 0;
  int r_max = 0;
  int simplices = 0;
  double eta_min = 0.0;
  double c_reg = 0.0;
  double structural_factor = 0.0; // counting bound only
  int r_max_nearest = 0;          // counting bound only
  double eigenvalue = 0.0;        // oracle only
  double residual = 0.0;          // oracle only
  int iterations = 0;             // oracle only
};

/// Simplex constant bound C_P^2(K; F) <= 7/5.
inline constexpr double simplex_constant_sq = 7.0 / 5.0;

/// C_P^2 <= (28/5) 2^(d+1) C_reg^(d-1) sum_k s_k |Y_k| / (H^2 eta_min^(d-2)), d = 2.
inline PoincareEstimate bound_lemma_6_4(const PartitionGraph& g) {
  constexpr int d = 2;
  const double H = g.patch_diameter;
  double sum = 0.0;
  for (int k = 0; k < g.simplex_count(); ++k) sum += g.s[static_cast<std::size_t>(k)] * g.area[static_cast<std::size_t>(k)];
  PoincareEstimate e;
  e.method = PoincareMethod::PathLemma64;
  e.c_reg = g.c_reg();
  e.eta_min = g.min_simplex_diameter();
  const double cp2 = 4.0 * simplex_constant_sq * std::pow(2.0, d + 1) * std::pow(e.c_reg, d - 1) * sum /
                     (H * H * std::pow(e.eta_min, d - 2));
  e.value = std::sqrt(cp2);
  e.s_max = g.s_max();
  e.r_max = g.r_max();
  e.simplices = g.simplex_count();
  return e;
}

/// (c_k)^2 <= 4 sum_i (|Y_k| / |Y_li|) (diam(Y_li)^2 / H^2) C_P^2(Y_li) along the path from k to X*.
inline double telescoped_constant(const PartitionGraph& g, int k) {
  const double H = g.patch_diameter;
  double sum = 0.0;
  for (int i : g.path(k))
    sum += g.diameter[static_cast<std::size_t>(i)] * g.diameter[static_cast<std::size_t>(i)] / g.area[static_cast<std::size_t>(i)];
  return 4.0 * simplex_constant_sq * g.area[static_cast<std::size_t>(k)] * sum / (H * H);
}

/// sqrt(sum_k (c_k)^2), with the path sums shared along the predecessor forest.
inline PoincareEstimate bound_telescoped(const PartitionGraph& g) {
  const int n = g.simplex_count();
  const double H = g.patch_diameter;
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    return g.s[static_cast<std::size_t>(a)] != g.s[static_cast<std::size_t>(b)] ? g.s[static_cast<std::size_t>(a)] < g.s[static_cast<std::size_t>(b)] : a < b;
  });
  std::vector<double> acc(static_cast<std::size_t>(n), 0.0);
  double total = 0.0;
  for (int k : order) {
    const auto ks = static_cast<std::size_t>(k);
    const int p = g.predecessor[ks];
    acc[ks] = (p >= 0 ? acc[static_cast<std::size_t>(p)] : 0.0) + g.diameter[ks] * g.diameter[ks] / g.area[ks];
    total += 4.0 * simplex_constant_sq * g.area[ks] * acc[ks] / (H * H);
  }
  PoincareEstimate e;
  e.method = PoincareMethod::Telescoped;
  e.value = std::sqrt(total);
  e.s_max = g.s_max();
  e.r_max = g.r_max();
  e.simplices = n;
  e.eta_min = g.min_simplex_diameter();
  e.c_reg = g.c_reg();
  return e;
}

/// Structural factor s_max r_max eta^(d+1) / (|X*| H^2) of the counting bound
/// over the shortest-path trees of all facets; the generic constant is left at 1.
inline PoincareEstimate bound_lemma_6_6(const PartitionGraph& g) {
  constexpr int d = 2;
  const double H = g.patch_diameter;
  const double eta = g.max_simplex_diameter();
  PoincareEstimate e;
  e.method = PoincareMethod::PathLemma66;
  e.s_max = g.s_max_all;
  e.r_max = g.r_max_all;
  e.r_max_nearest = g.r_max();
  e.structural_factor = e.s_max * static_cast<double>(e.r_max) * std::pow(eta, d + 1) / (g.facet_length * H * H);
  e.value = std::sqrt(e.structural_factor);
  e.simplices = g.simplex_count();
  e.eta_min = g.min_simplex_diameter();
  e.c_reg = g.c_reg();
  return e;
}

/// Neumann stiffness and mass over all patch vertices.
inline std::pair<SparseOperator, SparseOperator> assemble_neumann(const PatchMesh& pm) {
  std::vector<int> all(pm.triangles.size());
  for (std::size_t t = 0; t < all.size(); ++t) all[t] = static_cast<int>(t);
  std::vector<int> dofs(pm.vertices.size());
  for (std::size_t v = 0; v < dofs.size(); ++v) dofs[v] = static_cast<int>(v);
  const int n = static_cast<int>(pm.vertices.size());
  return {assemble_form(pm.vertices, pm.triangles, all, dofs, n, ElementForm::Stiffness),
          assemble_form(pm.vertices, pm.triangles, all, dofs, n, ElementForm::Mass)};
}

struct EigenResult {
  double value = 0.0;
  double residual = 0.0;
  int iterations = 0;
};

/// Smallest eigenvalue of A u = lambda M u on {c^T u = 0} by block inverse
/// subspace iteration with the bordered matrix [A c; c^T 0].
inline EigenResult constrained_min_eigenvalue(const SparseOperator& a, const SparseOperator& m, const Eigen::VectorXd& c,
                                              double tol = 1e-8, int max_iterations = 300, int block = 4,
                                              std::uint64_t seed = 7) {
  const Eigen::Index n = a.rows();
  if (n < 2 || c.size() != n) throw std::invalid_argument("constrained_min_eigenvalue: bad dimensions");
  block = static_cast<int>(std::min<Eigen::Index>(block, n - 1));

  std::vector<Eigen::Triplet<double>> trip;
  for (int j = 0; j < a.outerSize(); ++j)
    for (SparseOperator::InnerIterator it(a, j); it; ++it) trip.emplace_back(static_cast<int>(it.row()), j, it.value());
  for (Eigen::Index i = 0; i < n; ++i)
    if (c[i] != 0.0) {
      trip.emplace_back(static_cast<int>(i), static_cast<int>(n), c[i]);
      trip.emplace_back(static_cast<int>(n), static_cast<int>(i), c[i]);
    }
  SparseOperator kkt(n + 1, n + 1);
  kkt.setFromTriplets(trip.begin(), trip.end());
  Eigen::SparseLU<SparseOperator> lu;
  lu.compute(kkt);
  if (lu.info() != Eigen::Success) throw NumericalError("constrained eigensolve: bordered matrix is singular");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  Eigen::MatrixXd v(n, block);
  for (Eigen::Index j = 0; j < block; ++j)
    for (Eigen::Index i = 0; i < n; ++i) v(i, j) = gauss(rng);

  const double cc = c.squaredNorm();
  EigenResult res;
  res.residual = 1.0;
  Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n + 1, block);
  for (int it = 1; it <= max_iterations; ++it) {
    rhs.topRows(n) = m * v;
    const Eigen::MatrixXd sol = lu.solve(rhs);
    Eigen::MatrixXd w = sol.topRows(n);
    // Rayleigh-Ritz on span(w)
    const Eigen::MatrixXd mw = m * w;
    const Eigen::MatrixXd aw = a * w;
    Eigen::MatrixXd gm = w.transpose() * mw;
    Eigen::MatrixXd ga = w.transpose() * aw;
    gm = 0.5 * (gm + gm.transpose()).eval();
    ga = 0.5 * (ga + ga.transpose()).eval();
    Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXd> ritz(ga, gm);
    if (ritz.info() != Eigen::Success) throw NumericalError("constrained eigensolve: Ritz step failed");
    v = w * ritz.eigenvectors();
    const double lambda = ritz.eigenvalues()[0];
    const Eigen::VectorXd u = v.col(0);
    const Eigen::VectorXd mu = m * u;
    Eigen::VectorXd r = a * u - lambda * mu;
    r -= c * (c.dot(r) / cc);
    res.value = lambda;
    res.iterations = it;
    res.residual = r.norm() / (std::abs(lambda) * mu.norm());
    if (res.residual <= tol) return res;
  }
  throw SolverError("constrained eigensolve did not converge", res.residual);
}

/// Discrete best constant in ||u - mean(u)|| <= C_P diam ||grad u|| on the patch.
inline PoincareEstimate rayleigh_oracle(const PatchMesh& pm, double tol = 1e-8) {
  const auto [a, m] = assemble_neumann(pm);
  const Eigen::VectorXd c = m * Eigen::VectorXd::Ones(m.rows());
  const auto eig = constrained_min_eigenvalue(a, m, c, tol);
  if (!(eig.value > 0.0)) throw NumericalError("rayleigh oracle: nonpositive eigenvalue (disconnected patch?)");
  PoincareEstimate e;
  e.method = PoincareMethod::RayleighOracle;
  e.eigenvalue = eig.value;
  e.residual = eig.residual;
  e.iterations = eig.iterations;
  e.value = 1.0 / (patch_diameter(pm) * std::sqrt(eig.value));
  e.simplices = static_cast<int>(pm.triangles.size());
  return e;
}

/// Discrete C_P(K; F) for the face mean constraint on every face of the
/// right triangle (0,0), (1,0), (1,1); returns the largest.
inline double simplex_face_constant(int m, double tol = 1e-8) {
  const PatchMesh pm = right_triangle_patch(m);
  const auto [a, mass] = assemble_neumann(pm);
  const double diam = patch_diameter(pm);
  const std::array<std::pair<Point2, Point2>, 3> faces{{{{0, 0}, {1, 0}}, {{1, 0}, {1, 1}}, {{0, 0}, {1, 1}}}};
  double worst = 0.0;
  for (const auto& [p, q] : faces) {
    auto on_face = [&](Point2 z) { return std::abs(signed_area(p, q, z)) <= 1e-14; };
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pm.vertices.size()));
    const auto nb = triangle_neighbors(pm.triangles);
    for (std::size_t t = 0; t < pm.triangles.size(); ++t)
      for (int l = 0; l < 3; ++l) {
        if (nb[t][static_cast<std::size_t>(l)] >= 0) continue;
        const int i = pm.triangles[t][static_cast<std::size_t>((l + 1) % 3)];
        const int j = pm.triangles[t][static_cast<std::size_t>((l + 2) % 3)];
        const Point2 a0 = pm.vertices[static_cast<std::size_t>(i)], a1 = pm.vertices[static_cast<std::size_t>(j)];
        if (!on_face(a0) || !on_face(a1)) continue;
        const double len = distance(a0, a1);
        c[i] += 0.5 * len;
        c[j] += 0.5 * len;
      }
    const auto eig = constrained_min_eigenvalue(a, mass, c, tol);
    worst = std::max(worst, 1.0 / (diam * std::sqrt(eig.value)));
  }
  return worst;
}

} // namespace perflod
