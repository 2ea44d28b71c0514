#include <gtest/gtest.h>

#include <memory>
#include <random>
#include <sstream>

#include "perflod/experiment.hpp"
#include "perflod/lod.hpp"

using namespace perflod;

namespace {

struct Setup {
  PerforatedMesh pm;
  SparseOperator a;
  CoarseSpace cs;
  InterpOperator op;

  Setup(GeometrySpec g, int n, double H, InterpKind kind)
      : pm(perforate(build_structured_mesh(n), g)), a(assemble_stiffness(pm)), cs(build_coarse_space(pm, H)),
        op(build_interp(kind, pm, cs)) {}
};

std::unique_ptr<Setup> make_setup(GeometrySpec g, int n, double H, InterpKind kind = InterpKind::ProjectiveL2) {
  return std::make_unique<Setup>(g, n, H, kind);
}

// Minimizer of q'Aq/2 - r'q over ker C through an explicit null-space basis.
Eigen::MatrixXd nullspace_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c, const Eigen::MatrixXd& r) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(c);
  lu.setThreshold(1e-10);
  const Eigen::MatrixXd n = lu.kernel();
  const Eigen::MatrixXd reduced = n.transpose() * a * n;
  return n * reduced.ldlt().solve(n.transpose() * r);
}

double rel_diff(const SparseOperator& x, const SparseOperator& y) {
  return Eigen::MatrixXd(x - y).norm() / std::max(1e-300, Eigen::MatrixXd(y).norm());
}

} // namespace

TEST(PartitionOfUnity, InteriorWeightsSumToOne) {
  const auto s = make_setup({GeometryKind::PeriodicSquares, 0.125}, 32, 0.25);
  const auto w = build_pou_weights(s->cs);
  for (int t = 0; t < s->pm.base.triangle_count(); ++t) {
    if (!(w.denominator[static_cast<std::size_t>(t)] > 0.0)) continue;
    double sum = 0.0;
    for (int x : s->cs.interior_nodes) sum += pou_weight(s->cs, w, x, t);
    EXPECT_NEAR(sum, 1.0, 1e-14);
  }
}

TEST(ConstrainedSolver, MatchesNullSpaceOracle) {
  const auto pm = perforate(build_structured_mesh(8), {GeometryKind::Unperforated});
  const SparseOperator a = assemble_stiffness(pm);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::MatrixXd c(5, a.rows());
  for (Eigen::Index i = 0; i < c.rows(); ++i)
    for (Eigen::Index j = 0; j < c.cols(); ++j) c(i, j) = g(rng);
  Eigen::MatrixXd r(a.rows(), 3);
  for (Eigen::Index i = 0; i < r.rows(); ++i)
    for (Eigen::Index j = 0; j < r.cols(); ++j) r(i, j) = g(rng);

  const ConstrainedSolver full(a, c.sparseView());
  EXPECT_EQ(full.constraint_rank(), 5);
  const Eigen::MatrixXd q = full.solve(r);
  EXPECT_LT((q - nullspace_solve(Eigen::MatrixXd(a), c, r)).norm() / q.norm(), 1e-10);
  EXPECT_LT((c * q).norm(), 1e-10);

  // repeated and combined rows leave the constrained set unchanged
  Eigen::MatrixXd cd(7, a.rows());
  cd << c, c.row(1), c.row(0) - 2 * c.row(3);
  const ConstrainedSolver deficient(a, cd.sparseView());
  EXPECT_EQ(deficient.constraint_rank(), 5);
  EXPECT_LT((deficient.solve(r) - q).norm() / q.norm(), 1e-9);

  const ConstrainedSolver none(a, SparseOperator(0, a.cols()));
  EXPECT_LT((Eigen::MatrixXd(a) * none.solve(r) - r).norm(), 1e-10);
}

TEST(ConstrainedSolver, SingularStiffnessThrows) {
  SparseOperator a(3, 3);
  a.insert(0, 0) = 1.0;
  a.insert(1, 1) = 1.0;
  EXPECT_THROW(ConstrainedSolver(a, SparseOperator(0, 3)), NumericalError);
}

TEST(Corrector, EmptyPatchRaisesCorrectorError) {
  const auto s = make_setup({GeometryKind::Unperforated}, 16, 0.25);
  const auto w = build_pou_weights(s->cs);
  CorrectorProblem prob = make_corrector_problem(s->cs, s->op, s->cs.interior_nodes[4], 1);
  prob.trial_dofs.clear();
  try {
    solve_corrector(prob, s->a, s->op, s->cs, w);
    FAIL() << "expected CorrectorError";
  } catch (const CorrectorError& e) {
    EXPECT_EQ(e.node(), s->cs.interior_nodes[4]);
    EXPECT_EQ(e.layers(), 1);
  }
}

TEST(Corrector, BasisLiesInInterpolationKernel) {
  for (auto kind : {InterpKind::ProjectiveL2, InterpKind::Clement}) {
    const auto s = make_setup({GeometryKind::PeriodicSquares, 0.125}, 64, 0.125, kind);
    for (int k : {1, 2}) {
      const auto basis = build_corrector_basis(s->cs, s->op, s->a, k);
      EXPECT_LT(Eigen::MatrixXd(s->op.C * basis.Q).cwiseAbs().maxCoeff(), 1e-8) << to_string(kind) << " k " << k;
    }
    const auto ideal = ideal_corrector_basis(s->cs, s->op, s->a);
    EXPECT_EQ(ideal.layers, -1);
    EXPECT_LT(Eigen::MatrixXd(s->op.C * ideal.Q).cwiseAbs().maxCoeff(), 1e-8);
  }
}

TEST(Corrector, SaturatedPatchesReproduceTheIdealBasis) {
  const auto s = make_setup({GeometryKind::PeriodicSquares, 0.125}, 32, 0.25);
  const int ks = s->cs.hierarchy.saturation_layer();
  const auto local = build_corrector_basis(s->cs, s->op, s->a, ks);
  const auto ideal = ideal_corrector_basis(s->cs, s->op, s->a);
  EXPECT_LT(rel_diff(local.Q, ideal.Q), 1e-8);
}

TEST(Corrector, TruncationErrorDecaysWithLayers) {
  const auto s = make_setup({GeometryKind::PeriodicSquares, 0.125}, 64, 0.125);
  const auto ideal = ideal_corrector_basis(s->cs, s->op, s->a);
  std::vector<double> e;
  std::vector<std::size_t> support;
  for (int k = 1; k <= 4; ++k) {
    const auto q = build_corrector_basis(s->cs, s->op, s->a, k).Q;
    e.push_back(max_column_energy(s->a, ideal.Q, q));
    support.push_back(static_cast<std::size_t>(q.nonZeros()));
  }
  for (std::size_t i = 1; i < e.size(); ++i) {
    EXPECT_LT(e[i], e[i - 1]);
    EXPECT_GT(support[i], support[i - 1]);
  }
  EXPECT_LT(e.back(), 1e-2 * e.front());
}

TEST(Corrector, ThreadCountDoesNotChangeTheBasis) {
  const auto s = make_setup({GeometryKind::Filament, 0.125}, 64, 0.125);
  const auto one = build_corrector_basis(s->cs, s->op, s->a, 2, {1, 32});
  const auto three = build_corrector_basis(s->cs, s->op, s->a, 2, {3, 5});
  ASSERT_EQ(one.Q.nonZeros(), three.Q.nonZeros());
  const Eigen::MatrixXd d1(one.Q), d3(three.Q);
  EXPECT_TRUE((d1.array() == d3.array()).all());
}

TEST(Corrector, SerializationRoundTrip) {
  const auto s = make_setup({GeometryKind::PeriodicSquares, 0.25}, 32, 0.25);
  const auto basis = build_corrector_basis(s->cs, s->op, s->a, 1);
  std::stringstream io;
  write_corrector_basis(io, basis);
  const auto back = read_corrector_basis(io);
  EXPECT_EQ(back.layers, 1);
  EXPECT_EQ(back.Q.rows(), basis.Q.rows());
  EXPECT_TRUE((Eigen::MatrixXd(back.Q).array() == Eigen::MatrixXd(basis.Q).array()).all());
  std::stringstream bad("corrector_matrix 1 1 1\n");
  EXPECT_THROW(read_corrector_basis(bad), ConfigError);
  std::stringstream range("corrector_basis 2 2 1\n0 5 1.0\n");
  EXPECT_THROW(read_corrector_basis(range), ConfigError);
}

TEST(Multiscale, EqualMeshSizesRecoverTheFineSolution) {
  const auto s = make_setup({GeometryKind::Unperforated}, 16, 1.0 / 16.0);
  const auto basis = build_corrector_basis(s->cs, s->op, s->a, 1);
  EXPECT_LT(Eigen::MatrixXd(basis.Q).cwiseAbs().maxCoeff(), 1e-12);
  const FineFunction load = assemble_load(s->pm, step_forcing);
  const auto ms = multiscale_solve(s->pm, s->cs, basis, s->a, load);
  const FineFunction uh = solve_spd(s->a, load, 1e-13);
  EXPECT_LT(h1_seminorm(s->a, ms.fine - uh) / h1_seminorm(s->a, uh), 1e-10);
}

TEST(Multiscale, GalerkinOrthogonalityAndZeroForcing) {
  const auto s = make_setup({GeometryKind::PeriodicSquares, 0.125}, 64, 0.125);
  const auto basis = build_corrector_basis(s->cs, s->op, s->a, 2);
  const FineFunction load = assemble_load(s->pm, step_forcing);
  const auto ms = multiscale_solve(s->pm, s->cs, basis, s->a, load);
  const SparseOperator b = multiscale_basis(s->cs, basis);
  const Eigen::VectorXd residual = b.transpose() * (s->a * ms.fine - load);
  EXPECT_LT(residual.norm() / (SparseOperator(b.transpose()) * load).norm(), 1e-10);
  EXPECT_EQ(ms.layers, 2);

  const auto zero = multiscale_solve(s->pm, s->cs, basis, s->a, FineFunction::Zero(s->pm.free_count()));
  EXPECT_EQ(zero.fine.norm(), 0.0);
  EXPECT_THROW(multiscale_solve(s->pm, s->cs, basis, s->a, FineFunction::Zero(3)), std::invalid_argument);
}

TEST(Multiscale, IdealSpaceIsOrthogonalToTheKernel) {
  const auto s = make_setup({GeometryKind::Filament, 0.125}, 64, 0.125);
  const auto ideal = ideal_corrector_basis(s->cs, s->op, s->a);
  const SparseOperator b = multiscale_basis(s->cs, ideal);
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g(0.0, 1.0);
  const Eigen::MatrixXd ab = Eigen::MatrixXd(s->a * b);
  for (int trial = 0; trial < 20; ++trial) {
    FineFunction v(s->pm.free_count());
    for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = g(rng);
    const FineFunction w = v - apply_interp(s->cs, s->op, v);
    EXPECT_LT((s->op.C * w).norm(), 1e-10 * v.norm());
    EXPECT_LT((ab.transpose() * w).norm(), 1e-8 * ab.norm() * w.norm());
  }

  // the fine solution splits into the ideal multiscale solution plus a kernel function
  const FineFunction load = assemble_load(s->pm, step_forcing);
  const auto ms = multiscale_solve(s->pm, s->cs, ideal, s->a, load);
  const FineFunction uh = solve_spd(s->a, load, 1e-13);
  EXPECT_LT((s->op.C * (uh - ms.fine)).norm() / (s->op.C * uh).norm(), 1e-8);
}
