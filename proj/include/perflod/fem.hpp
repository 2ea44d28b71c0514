#pragma once

#include <array>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include "perflod/errors.hpp"
#include "perflod/mesh.hpp"

namespace perflod {

using SparseOperator = Eigen::SparseMatrix<double>;
using RowSparseOperator = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using FineFunction = Eigen::VectorXd;
using ScalarField = std::function<double(Point2)>;
using LocalMatrix = Eigen::Matrix3d;

/// Signed area of the triangle (p0, p1, p2).
inline double signed_area(const Point2& p0, const Point2& p1, const Point2& p2) {
  return 0.5 * ((p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y));
}

/// Exact P1 stiffness matrix from the constant basis gradients.
inline LocalMatrix local_stiffness(const Point2& p0, const Point2& p1, const Point2& p2) {
  const double area = std::abs(signed_area(p0, p1, p2));
  const std::array<Point2, 3> p{p0, p1, p2};
  // grad phi_l is the rotated opposite edge over 2|T|
  Eigen::Matrix<double, 3, 2> g;
  for (int l = 0; l < 3; ++l) {
    const Point2& a = p[static_cast<std::size_t>((l + 1) % 3)];
    const Point2& b = p[static_cast<std::size_t>((l + 2) % 3)];
    g(l, 0) = a.y - b.y;
    g(l, 1) = b.x - a.x;
  }
  const double orient = signed_area(p0, p1, p2) > 0 ? 1.0 : -1.0;
  g *= orient / (2.0 * area);
  return area * g * g.transpose();
}

inline LocalMatrix local_mass(const Point2& p0, const Point2& p1, const Point2& p2) {
  const double area = std::abs(signed_area(p0, p1, p2));
  LocalMatrix m;
  m << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  return (area / 12.0) * m;
}

enum class ElementForm { Stiffness, Mass };

/// Assembles a P1 bilinear form over the listed triangles. `dof_of_vertex`
/// maps vertices to rows; entries with negative index are dropped, which
/// imposes homogeneous Dirichlet values there.
inline SparseOperator assemble_form(const std::vector<Point2>& vertices, const std::vector<Triangle>& triangles,
                                    const std::vector<int>& triangle_list, const std::vector<int>& dof_of_vertex,
                                    int dof_count, ElementForm form) {
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(triangle_list.size() * 9);
  for (int t : triangle_list) {
    const auto& tri = triangles[static_cast<std::size_t>(t)];
    const auto& p0 = vertices[static_cast<std::size_t>(tri[0])];
    const auto& p1 = vertices[static_cast<std::size_t>(tri[1])];
    const auto& p2 = vertices[static_cast<std::size_t>(tri[2])];
    const LocalMatrix k = form == ElementForm::Stiffness ? local_stiffness(p0, p1, p2) : local_mass(p0, p1, p2);
    for (int a = 0; a < 3; ++a) {
      const int ra = dof_of_vertex[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
      if (ra < 0) continue;
      for (int b = 0; b < 3; ++b) {
        const int rb = dof_of_vertex[static_cast<std::size_t>(tri[static_cast<std::size_t>(b)])];
        if (rb >= 0) trip.emplace_back(ra, rb, k(a, b));
      }
    }
  }
  SparseOperator op(dof_count, dof_count);
  op.setFromTriplets(trip.begin(), trip.end());
  return op;
}

/// Stiffness on the active triangles, restricted to free dofs.
inline SparseOperator assemble_stiffness(const PerforatedMesh& pm) {
  return assemble_form(pm.base.vertices(), pm.base.triangles(), pm.active_triangles(), pm.free_dof,
                       pm.free_count(), ElementForm::Stiffness);
}

inline SparseOperator assemble_mass(const PerforatedMesh& pm) {
  return assemble_form(pm.base.vertices(), pm.base.triangles(), pm.active_triangles(), pm.free_dof,
                       pm.free_count(), ElementForm::Mass);
}

/// Load vector with one-point (barycenter) quadrature of g per element.
inline FineFunction assemble_load(const PerforatedMesh& pm, const ScalarField& g) {
  FineFunction b = FineFunction::Zero(pm.free_count());
  const double third = pm.base.triangle_area() / 3.0;
  for (int t = 0; t < pm.base.triangle_count(); ++t) {
    if (!pm.is_active(t)) continue;
    const double gv = g(pm.base.barycenter(t));
    if (gv == 0.0) continue;
    for (int v : pm.base.triangle(t)) {
      const int dof = pm.free_dof[static_cast<std::size_t>(v)];
      if (dof >= 0) b[dof] += gv * third;
    }
  }
  return b;
}

/// Unit forcing on the upper half of the square, zero below.
inline double step_forcing(Point2 p) { return p.y >= 0.5 ? 1.0 : 0.0; }
inline double unit_forcing(Point2) { return 1.0; }

inline double relative_residual(const SparseOperator& a, const FineFunction& u, const FineFunction& b) {
  const double nb = b.norm();
  const double nr = (a * u - b).norm();
  return nb > 0.0 ? nr / nb : nr;
}

/// Preconditioned conjugate gradients (incomplete Cholesky) with an explicit
/// check of the true relative residual ||Au - b|| / ||b|| <= tol.
inline FineFunction solve_spd(const SparseOperator& a, const FineFunction& b, double tol = 1e-10,
                              int max_iterations = 0) {
  if (a.rows() != a.cols() || a.rows() != b.size())
    throw std::invalid_argument("solve_spd: dimension mismatch");
  if (b.size() == 0) return b;
  if (b.norm() == 0.0) return FineFunction::Zero(b.size());
  if (max_iterations <= 0) max_iterations = static_cast<int>(std::max<Eigen::Index>(1000, 4 * a.rows()));

  Eigen::ConjugateGradient<SparseOperator, Eigen::Lower | Eigen::Upper, Eigen::IncompleteCholesky<double>> cg;
  cg.setTolerance(tol * 0.5);
  cg.setMaxIterations(max_iterations);
  cg.compute(a);
  if (cg.info() != Eigen::Success) throw SolverError("solve_spd: preconditioner setup failed", 1.0);

  FineFunction u = cg.solve(b);
  double res = relative_residual(a, u, b);
  // The recursive CG residual can drift from the true one; restart from the iterate.
  for (int restart = 0; restart < 4 && res > tol; ++restart) {
    u = cg.solveWithGuess(b, u);
    res = relative_residual(a, u, b);
  }
  if (!(res <= tol)) throw SolverError("solve_spd: conjugate gradients did not converge", res);
  return u;
}

namespace detail {
inline double checked_sqrt(double q, const char* what) {
  if (q < -1e-12) throw NumericalError(std::string(what) + ": negative quadratic form " + std::to_string(q));
  return q > 0.0 ? std::sqrt(q) : 0.0;
}
} // namespace detail

inline double h1_seminorm(const SparseOperator& stiffness, const FineFunction& u) {
  return detail::checked_sqrt(u.dot(stiffness * u), "h1_seminorm");
}

inline double l2_norm(const SparseOperator& mass, const FineFunction& u) {
  return detail::checked_sqrt(u.dot(mass * u), "l2_norm");
}

/// Overloads carrying the mesh for a length check.
inline double h1_seminorm(const PerforatedMesh& pm, const SparseOperator& stiffness, const FineFunction& u) {
  if (u.size() != pm.free_count()) throw std::invalid_argument("h1_seminorm: vector length mismatch");
  return h1_seminorm(stiffness, u);
}

inline double l2_norm(const PerforatedMesh& pm, const SparseOperator& mass, const FineFunction& u) {
  if (u.size() != pm.free_count()) throw std::invalid_argument("l2_norm: vector length mismatch");
  return l2_norm(mass, u);
}

/// Nodal interpolant of f on the free dofs (zero extension on the boundary).
inline FineFunction interpolate(const PerforatedMesh& pm, const ScalarField& f) {
  FineFunction u(pm.free_count());
  for (int d = 0; d < pm.free_count(); ++d) u[d] = f(pm.base.vertex(pm.dof_vertex[static_cast<std::size_t>(d)]));
  return u;
}

} // namespace perflod
