#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "perflod/dyadic.hpp"
#include "perflod/errors.hpp"
#include "perflod/fem.hpp"
#include "perflod/mesh.hpp"

namespace perflod {

/// Value of the coarse hat function at coarse vertex `y` evaluated at fine
/// vertex `v`. The grids are nested, so the value is an exact multiple of 1/ratio.
inline double hat_value(const MeshHierarchy& mh, int y, int v) {
  const auto [ci, cj] = mh.coarse().vertex_grid(y);
  const auto [fi, fj] = mh.fine().base.vertex_grid(v);
  const int r = mh.ratio();
  const int dx = fi - ci * r, dy = fj - cj * r;
  int dist = 0;
  // Graph distance on the diagonal-split lattice: Chebyshev along the diagonal
  // direction, Manhattan across it.
  if ((dx >= 0) == (dy >= 0)) dist = std::max(std::abs(dx), std::abs(dy));
  else dist = std::abs(dx) + std::abs(dy);
  return dist >= r ? 0.0 : static_cast<double>(r - dist) / r;
}

/// Coarse vertices of the parent of fine triangle t and their hat values at
/// the three fine vertices: values(a, l) = lambda_{coarse[a]}(vertex l of t).
struct ParentHats {
  std::array<int, 3> coarse{};
  Eigen::Matrix3d values;
};

inline ParentHats parent_hats(const MeshHierarchy& mh, int fine_triangle) {
  ParentHats ph;
  ph.coarse = mh.coarse().triangle(mh.coarse_parent(fine_triangle));
  const auto& tri = mh.fine().base.triangle(fine_triangle);
  for (int a = 0; a < 3; ++a)
    for (int l = 0; l < 3; ++l)
      ph.values(a, l) = hat_value(mh, ph.coarse[static_cast<std::size_t>(a)], tri[static_cast<std::size_t>(l)]);
  return ph;
}

/// Restricted coarse P1 space. `prolongation` maps interior coarse
/// coefficients to fine free-dof values. Holds a pointer to the fine mesh,
/// which must outlive it.
struct CoarseSpace {
  MeshHierarchy hierarchy;
  std::vector<int> interior_nodes; // coarse vertex ids, ascending
  std::vector<int> node_index;     // coarse vertex -> interior index, -1 on the boundary
  SparseOperator prolongation;

  const StructuredMesh& coarse() const noexcept { return hierarchy.coarse(); }
  const PerforatedMesh& fine() const noexcept { return hierarchy.fine(); }
  double H() const noexcept { return hierarchy.coarse().h(); }
  int node_count() const noexcept { return static_cast<int>(interior_nodes.size()); }
};

inline CoarseSpace build_coarse_space(const PerforatedMesh& pm, double H) {
  const int p = dyadic_exponent(H);
  if (p < 0) throw ConfigError("coarse mesh size must be <= 1");
  const int coarse_n = 1 << p;
  if (coarse_n > pm.base.cells_per_side())
    throw ConfigError("coarse mesh size H = " + format_length(H) + " is finer than h");
  CoarseSpace cs{MeshHierarchy(pm, coarse_n), {}, {}, {}};
  const auto& coarse = cs.coarse();
  cs.node_index.assign(static_cast<std::size_t>(coarse.vertex_count()), -1);
  for (int y = 0; y < coarse.vertex_count(); ++y)
    if (!coarse.on_boundary(y)) {
      cs.node_index[static_cast<std::size_t>(y)] = static_cast<int>(cs.interior_nodes.size());
      cs.interior_nodes.push_back(y);
    }

  std::vector<Eigen::Triplet<double>> trip;
  for (int d = 0; d < pm.free_count(); ++d) {
    const int v = pm.dof_vertex[static_cast<std::size_t>(d)];
    const int t = *pm.base.incident(v).first;
    for (int y : coarse.triangle(cs.hierarchy.coarse_parent(t))) {
      const int idx = cs.node_index[static_cast<std::size_t>(y)];
      if (idx < 0) continue;
      const double val = hat_value(cs.hierarchy, y, v);
      if (val != 0.0) trip.emplace_back(d, idx, val);
    }
  }
  cs.prolongation.resize(pm.free_count(), cs.node_count());
  cs.prolongation.setFromTriplets(trip.begin(), trip.end());
  return cs;
}

/// Hat functions of every coarse vertex (boundary included) at every fine vertex.
inline SparseOperator unrestricted_prolongation(const MeshHierarchy& mh) {
  const auto& fine = mh.fine().base;
  std::vector<Eigen::Triplet<double>> trip;
  for (int v = 0; v < fine.vertex_count(); ++v) {
    const int t = *fine.incident(v).first;
    for (int y : mh.coarse().triangle(mh.coarse_parent(t))) {
      const double val = hat_value(mh, y, v);
      if (val != 0.0) trip.emplace_back(v, y, val);
    }
  }
  SparseOperator p(fine.vertex_count(), mh.coarse().vertex_count());
  p.setFromTriplets(trip.begin(), trip.end());
  return p;
}

enum class InterpKind { ProjectiveL2, Clement };

inline std::string to_string(InterpKind k) { return k == InterpKind::ProjectiveL2 ? "projective" : "clement"; }

inline InterpKind parse_interp_kind(const std::string& s) {
  if (s == "projective" || s == "projective_l2" || s == "ProjectiveL2" || s == "l2") return InterpKind::ProjectiveL2;
  if (s == "clement" || s == "Clement") return InterpKind::Clement;
  throw ConfigError("unknown interpolation operator '" + s + "'");
}

struct InterpOptions {
  double pivot_threshold = 1e-12; // relative Gram pivot floor
  double mass_threshold = 1e-12;  // relative restricted mass below which a local basis function is dropped
};

/// Quasi-interpolation as a sparse map from fine free dofs to interior coarse
/// coefficients; the fine interpolant is prolongation * (C * u).
struct InterpOperator {
  InterpKind kind = InterpKind::ProjectiveL2;
  RowSparseOperator C;
  SparseOperator C_cols; // same matrix, column-major for column lookups
  std::vector<double> pivot_ratio; // min/max Gram pivot per node (projective only)

  Eigen::VectorXd coefficients(const FineFunction& u) const { return C * u; }
};

namespace detail {

/// Local moments of the patch around interior node x: Gram matrix of the
/// hats of the patch vertices and their pairings with fine basis functions.
struct LocalMoments {
  std::vector<int> coarse_vertices; // sorted, includes x
  Eigen::MatrixXd gram;
  std::vector<int> dofs;            // fine dofs touched
  Eigen::MatrixXd pairing;          // coarse_vertices x dofs
  double hat_integral = 0.0;        // integral of lambda_x over the perforated patch
};

inline LocalMoments local_moments(const CoarseSpace& cs, int x, std::vector<int>& scratch) {
  const auto& mh = cs.hierarchy;
  const auto& pm = cs.fine();
  LocalMoments lm;
  const auto [first, last] = cs.coarse().incident(x);
  for (const int* it = first; it != last; ++it)
    for (int v : cs.coarse().triangle(*it)) lm.coarse_vertices.push_back(v);
  std::sort(lm.coarse_vertices.begin(), lm.coarse_vertices.end());
  lm.coarse_vertices.erase(std::unique(lm.coarse_vertices.begin(), lm.coarse_vertices.end()),
                           lm.coarse_vertices.end());
  const auto nloc = static_cast<Eigen::Index>(lm.coarse_vertices.size());
  auto local_of = [&](int y) {
    return static_cast<int>(std::lower_bound(lm.coarse_vertices.begin(), lm.coarse_vertices.end(), y) -
                            lm.coarse_vertices.begin());
  };

  lm.gram = Eigen::MatrixXd::Zero(nloc, nloc);
  std::vector<std::array<double, 8>> cols; // pairing columns, nloc <= 7
  const int xi = local_of(x);
  for (const int* it = first; it != last; ++it)
    for (int t : mh.children(*it)) {
      if (!pm.is_active(t)) continue;
      const auto& tri = pm.base.triangle(t);
      const LocalMatrix m = local_mass(pm.base.vertex(tri[0]), pm.base.vertex(tri[1]), pm.base.vertex(tri[2]));
      const ParentHats ph = parent_hats(mh, t);
      std::array<int, 3> loc{};
      for (int a = 0; a < 3; ++a) loc[static_cast<std::size_t>(a)] = local_of(ph.coarse[static_cast<std::size_t>(a)]);
      const Eigen::Matrix3d lm_t = ph.values * m; // (a, l) = int lambda_a phi_l
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          lm.gram(loc[static_cast<std::size_t>(a)], loc[static_cast<std::size_t>(b)]) +=
              lm_t.row(a).dot(ph.values.row(b));
      for (int a = 0; a < 3; ++a)
        if (loc[static_cast<std::size_t>(a)] == xi) lm.hat_integral += lm_t.row(a).sum();
      for (int l = 0; l < 3; ++l) {
        const int dof = pm.free_dof[static_cast<std::size_t>(tri[static_cast<std::size_t>(l)])];
        if (dof < 0) continue;
        int& col = scratch[static_cast<std::size_t>(dof)];
        if (col < 0) {
          col = static_cast<int>(lm.dofs.size());
          lm.dofs.push_back(dof);
          cols.push_back({});
        }
        for (int a = 0; a < 3; ++a) cols[static_cast<std::size_t>(col)][static_cast<std::size_t>(loc[static_cast<std::size_t>(a)])] += lm_t(a, l);
      }
    }
  lm.pairing.resize(nloc, static_cast<Eigen::Index>(lm.dofs.size()));
  for (std::size_t c = 0; c < lm.dofs.size(); ++c) {
    for (Eigen::Index a = 0; a < nloc; ++a) lm.pairing(a, static_cast<Eigen::Index>(c)) = cols[c][static_cast<std::size_t>(a)];
    scratch[static_cast<std::size_t>(lm.dofs[c])] = -1;
  }
  return lm;
}

inline InterpOperator finish(InterpKind kind, int rows, int cols, std::vector<Eigen::Triplet<double>>& trip) {
  InterpOperator op;
  op.kind = kind;
  op.C.resize(rows, cols);
  op.C.setFromTriplets(trip.begin(), trip.end());
  op.C_cols = SparseOperator(op.C);
  return op;
}

} // namespace detail

/// Projective quasi-interpolation: coefficient x is the value at x of the
/// local L2 projection onto the restricted hats living on the patch of x.
inline InterpOperator build_projective_interp(const PerforatedMesh& pm, const CoarseSpace& cs,
                                              const InterpOptions& opt = {}) {
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<int> scratch(static_cast<std::size_t>(pm.free_count()), -1);
  std::vector<double> pivots;
  for (int idx = 0; idx < cs.node_count(); ++idx) {
    const int x = cs.interior_nodes[static_cast<std::size_t>(idx)];
    const auto lm = detail::local_moments(cs, x, scratch);
    const auto xi = static_cast<Eigen::Index>(
        std::lower_bound(lm.coarse_vertices.begin(), lm.coarse_vertices.end(), x) - lm.coarse_vertices.begin());

    // Keep local hats whose restricted mass is not negligible; x itself must stay.
    const double max_mass = lm.gram.diagonal().maxCoeff();
    if (!(max_mass > 0.0) || lm.gram(xi, xi) <= opt.mass_threshold * max_mass)
      throw DegeneratePatchError("perforation removes the patch of the hat function", x);
    std::vector<Eigen::Index> keep;
    for (Eigen::Index a = 0; a < lm.gram.rows(); ++a)
      if (lm.gram(a, a) > opt.mass_threshold * max_mass) keep.push_back(a);
    const auto nk = static_cast<Eigen::Index>(keep.size());
    Eigen::MatrixXd g(nk, nk);
    Eigen::MatrixXd b(nk, lm.pairing.cols());
    Eigen::Index xk = 0;
    for (Eigen::Index a = 0; a < nk; ++a) {
      if (keep[static_cast<std::size_t>(a)] == xi) xk = a;
      b.row(a) = lm.pairing.row(keep[static_cast<std::size_t>(a)]);
      for (Eigen::Index c = 0; c < nk; ++c) g(a, c) = lm.gram(keep[static_cast<std::size_t>(a)], keep[static_cast<std::size_t>(c)]);
    }

    Eigen::LDLT<Eigen::MatrixXd> ldlt(g);
    const Eigen::VectorXd d = ldlt.vectorD();
    const double ratio = d.minCoeff() / d.cwiseAbs().maxCoeff();
    if (ldlt.info() != Eigen::Success || !(ratio >= opt.pivot_threshold))
      throw DegeneratePatchError("local Gram matrix is numerically singular", x);
    pivots.push_back(ratio);

    const Eigen::VectorXd gx = ldlt.solve(Eigen::VectorXd::Unit(nk, xk));
    const Eigen::VectorXd row = b.transpose() * gx;
    for (Eigen::Index c = 0; c < row.size(); ++c)
      if (row[c] != 0.0) trip.emplace_back(idx, lm.dofs[static_cast<std::size_t>(c)], row[c]);
  }
  auto op = detail::finish(InterpKind::ProjectiveL2, cs.node_count(), pm.free_count(), trip);
  op.pivot_ratio = std::move(pivots);
  return op;
}

/// Clement-type averaging: coefficient x is the lambda_x-weighted mean of u.
inline InterpOperator build_clement_interp(const PerforatedMesh& pm, const CoarseSpace& cs) {
  std::vector<Eigen::Triplet<double>> trip;
  std::vector<int> scratch(static_cast<std::size_t>(pm.free_count()), -1);
  for (int idx = 0; idx < cs.node_count(); ++idx) {
    const int x = cs.interior_nodes[static_cast<std::size_t>(idx)];
    const auto lm = detail::local_moments(cs, x, scratch);
    if (!(lm.hat_integral > 0.0)) throw DegeneratePatchError("hat function has zero mass on the perforated patch", x);
    const auto xi = static_cast<Eigen::Index>(
        std::lower_bound(lm.coarse_vertices.begin(), lm.coarse_vertices.end(), x) - lm.coarse_vertices.begin());
    for (Eigen::Index c = 0; c < lm.pairing.cols(); ++c) {
      const double w = lm.pairing(xi, c);
      if (w != 0.0) trip.emplace_back(idx, lm.dofs[static_cast<std::size_t>(c)], w / lm.hat_integral);
    }
  }
  return detail::finish(InterpKind::Clement, cs.node_count(), pm.free_count(), trip);
}

inline InterpOperator build_interp(InterpKind kind, const PerforatedMesh& pm, const CoarseSpace& cs,
                                   const InterpOptions& opt = {}) {
  return kind == InterpKind::ProjectiveL2 ? build_projective_interp(pm, cs, opt) : build_clement_interp(pm, cs);
}

/// Fine representation of the quasi-interpolant of u.
inline FineFunction apply_interp(const CoarseSpace& cs, const InterpOperator& op, const FineFunction& u) {
  return cs.prolongation * (op.C * u);
}

namespace detail {

/// Quadratic forms of e over the active fine triangles of a patch (L2 and H1 seminorm, squared).
inline std::pair<double, double> patch_norms_sq(const PerforatedMesh& pm, const std::vector<int>& fine_triangles,
                                                const FineFunction& e) {
  double l2 = 0.0, h1 = 0.0;
  for (int t : fine_triangles) {
    const auto& tri = pm.base.triangle(t);
    Eigen::Vector3d ev;
    for (int l = 0; l < 3; ++l) {
      const int dof = pm.free_dof[static_cast<std::size_t>(tri[static_cast<std::size_t>(l)])];
      ev[l] = dof >= 0 ? e[dof] : 0.0;
    }
    const auto& p0 = pm.base.vertex(tri[0]);
    const auto& p1 = pm.base.vertex(tri[1]);
    const auto& p2 = pm.base.vertex(tri[2]);
    l2 += ev.dot(local_mass(p0, p1, p2) * ev);
    h1 += ev.dot(local_stiffness(p0, p1, p2) * ev);
  }
  return {l2, h1};
}

} // namespace detail

/// Empirical lower estimate of the local stability constant of the
/// quasi-interpolation:
///   max (H^-1 ||u - I u||_{w_x,0} + ||grad(u - I u)||_{w_x,0}) / ||grad u||_{w_x,1}
/// over random u supported in the one-layer patch of a random node. Trials
/// alternate between white noise and smooth random trigonometric fields.
inline double stability_ratio(const InterpOperator& op, const PerforatedMesh& pm, const CoarseSpace& cs, int trials,
                              std::uint64_t seed = 1) {
  const auto& mh = cs.hierarchy;
  const SparseOperator a = assemble_stiffness(pm);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pick(0, std::max(0, cs.node_count() - 1));
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  constexpr double pi = 3.14159265358979323846;
  double best = 0.0;
  for (int trial = 0; trial < trials && cs.node_count() > 0; ++trial) {
    const int x = cs.interior_nodes[static_cast<std::size_t>(pick(rng))];
    const PatchSet outer = mh.patch(x, 1);
    const PatchSet inner = mh.patch(x, 0);
    FineFunction u = FineFunction::Zero(pm.free_count());
    if (trial % 2 == 0) {
      for (int d : outer.interior_fine_dofs) u[d] = unif(rng);
    } else {
      const double H = cs.H();
      std::array<double, 6> c{};
      for (auto& v : c) v = unif(rng);
      for (int d : outer.interior_fine_dofs) {
        const auto& p = pm.base.vertex(pm.dof_vertex[static_cast<std::size_t>(d)]);
        u[d] = c[0] + c[1] * std::cos(pi * p.x / H) + c[2] * std::sin(pi * p.y / H) +
               c[3] * std::cos(pi * (p.x + p.y) / H) + c[4] * std::sin(2 * pi * p.x / H) * c[5];
      }
    }
    const double denom = h1_seminorm(a, u);
    if (!(denom > 0.0)) continue;
    const FineFunction e = u - apply_interp(cs, op, u);
    const auto [l2sq, h1sq] = detail::patch_norms_sq(pm, inner.fine_triangles, e);
    const double num = std::sqrt(std::max(0.0, l2sq)) / cs.H() + std::sqrt(std::max(0.0, h1sq));
    best = std::max(best, num / denom);
  }
  return best;
}

} // namespace perflod
