#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "perflod/fem.hpp"

using namespace perflod;

namespace {

PerforatedMesh unit_square(int n) { return perforate(build_structured_mesh(n), {GeometryKind::Unperforated}); }

struct ManufacturedErrors {
  double l2 = 0.0;
  double energy = 0.0;
};

ManufacturedErrors manufactured(int n) {
  const double pi = std::numbers::pi;
  const auto pm = unit_square(n);
  const auto a = assemble_stiffness(pm);
  const auto m = assemble_mass(pm);
  const auto b = assemble_load(pm, [&](Point2 p) { return 2 * pi * pi * std::sin(pi * p.x) * std::sin(pi * p.y); });
  const FineFunction uh = solve_spd(a, b, 1e-12);
  const FineFunction ui = interpolate(pm, [&](Point2 p) { return std::sin(pi * p.x) * std::sin(pi * p.y); });
  return {l2_norm(m, ui - uh), h1_seminorm(a, ui - uh)};
}

} // namespace

TEST(Element, ReferenceStiffnessAndMass) {
  const LocalMatrix k = local_stiffness({0, 0}, {1, 0}, {0, 1});
  LocalMatrix expected;
  expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
  EXPECT_LT((k - expected).norm(), 1e-15);
  // orientation does not matter
  const LocalMatrix kr = local_stiffness({0, 0}, {0, 1}, {1, 0});
  EXPECT_NEAR(kr(0, 0), 1.0, 1e-15);
  EXPECT_NEAR(kr(1, 1), 0.5, 1e-15);
  const LocalMatrix m = local_mass({0, 0}, {2, 0}, {0, 3});
  EXPECT_NEAR(m.sum(), 3.0, 1e-14);
  EXPECT_NEAR(m(0, 0), 0.5, 1e-15);
  EXPECT_NEAR(signed_area({0, 0}, {0, 1}, {1, 0}), -0.5, 1e-15);
}

TEST(Element, StiffnessRowsSumToZero) {
  const LocalMatrix k = local_stiffness({0.1, 0.2}, {0.7, 0.3}, {0.4, 0.9});
  EXPECT_LT((k * Eigen::Vector3d::Ones()).norm(), 1e-14);
  const Eigen::Vector3d lin(0.1 + 2 * 0.2, 0.7 + 2 * 0.3, 0.4 + 2 * 0.9);
  // energy of x + 2y is |grad|^2 |T| = 5 |T|
  EXPECT_NEAR(lin.dot(k * lin), 5 * std::abs(signed_area({0.1, 0.2}, {0.7, 0.3}, {0.4, 0.9})), 1e-13);
}

TEST(Assembly, SingleInteriorNode) {
  const auto pm = unit_square(2);
  ASSERT_EQ(pm.free_count(), 1);
  const auto a = assemble_stiffness(pm);
  EXPECT_NEAR(a.coeff(0, 0), 4.0, 1e-14);
  const auto b = assemble_load(pm, unit_forcing);
  EXPECT_NEAR(b[0], 0.25, 1e-15);
}

TEST(Assembly, MatchesFivePointStencil) {
  const auto pm = unit_square(4);
  const auto a = assemble_stiffness(pm);
  const int n = 3;
  Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(n * n, n * n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) {
      const int r = j * n + i;
      expected(r, r) = 4;
      if (i > 0) expected(r, r - 1) = -1;
      if (i < n - 1) expected(r, r + 1) = -1;
      if (j > 0) expected(r, r - n) = -1;
      if (j < n - 1) expected(r, r + n) = -1;
    }
  EXPECT_LT((Eigen::MatrixXd(a) - expected).norm(), 1e-13);
}

TEST(Assembly, MassIntegratesConstantsOverActiveArea) {
  const auto pm = perforate(build_structured_mesh(16), {GeometryKind::PeriodicSquares, 0.25});
  std::vector<int> ids(static_cast<std::size_t>(pm.base.vertex_count()));
  for (std::size_t v = 0; v < ids.size(); ++v) ids[v] = static_cast<int>(v);
  const auto m = assemble_form(pm.base.vertices(), pm.base.triangles(), pm.active_triangles(), ids,
                               pm.base.vertex_count(), ElementForm::Mass);
  const Eigen::VectorXd one = Eigen::VectorXd::Ones(pm.base.vertex_count());
  EXPECT_NEAR(one.dot(m * one), 0.75, 1e-14);
  const auto k = assemble_form(pm.base.vertices(), pm.base.triangles(), pm.active_triangles(), ids,
                               pm.base.vertex_count(), ElementForm::Stiffness);
  EXPECT_LT((k * one).norm(), 1e-12);
}

TEST(Solver, ConjugateGradientsMatchDirectSolve) {
  const auto pm = perforate(build_structured_mesh(16), {GeometryKind::PeriodicSquares, 0.25});
  const auto a = assemble_stiffness(pm);
  const auto b = assemble_load(pm, step_forcing);
  const FineFunction u = solve_spd(a, b, 1e-12);
  const Eigen::VectorXd ref = Eigen::MatrixXd(a).ldlt().solve(b);
  EXPECT_LT((u - ref).norm() / ref.norm(), 1e-10);
  EXPECT_LE(relative_residual(a, u, b), 1e-12);
  EXPECT_EQ(solve_spd(a, FineFunction::Zero(b.size())).norm(), 0.0);
}

TEST(Solver, IterationCapRaisesSolverError) {
  const auto pm = unit_square(64);
  const auto a = assemble_stiffness(pm);
  const auto b = assemble_load(pm, step_forcing);
  try {
    solve_spd(a, b, 1e-14, 1);
    FAIL() << "expected SolverError";
  } catch (const SolverError& e) {
    EXPECT_GT(e.residual(), 1e-14);
  }
}

TEST(Solver, ManufacturedSolutionRates) {
  const auto e16 = manufactured(16), e32 = manufactured(32), e64 = manufactured(64);
  EXPECT_GT(e16.l2 / e32.l2, 3.5);
  EXPECT_GT(e32.l2 / e64.l2, 3.5);
  EXPECT_GT(e16.energy / e32.energy, 1.8);
  EXPECT_GT(e32.energy / e64.energy, 1.8);
  EXPECT_LT(e64.l2, 1e-3);
}

TEST(Norms, RejectBadInput) {
  const auto pm = unit_square(4);
  const auto a = assemble_stiffness(pm);
  EXPECT_THROW(h1_seminorm(pm, a, FineFunction::Ones(3)), std::invalid_argument);
  EXPECT_THROW(l2_norm(pm, assemble_mass(pm), FineFunction::Ones(3)), std::invalid_argument);
  EXPECT_THROW(solve_spd(a, FineFunction::Ones(3)), std::invalid_argument);
  const SparseOperator neg = -a;
  EXPECT_THROW(h1_seminorm(neg, FineFunction::Ones(9)), NumericalError);
  EXPECT_NEAR(h1_seminorm(a, FineFunction::Zero(9)), 0.0, 0.0);
}
