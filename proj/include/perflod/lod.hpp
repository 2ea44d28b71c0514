#pragma once

#include <algorithm>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include "perflod/errors.hpp"
#include "perflod/fem.hpp"
#include "perflod/interp.hpp"
#include "perflod/mesh.hpp"
#include "perflod/parallel.hpp"

namespace perflod {

/// Interior hat sums per fine triangle, evaluated at barycenters.
/// lambda_hat_x(b_T) = lambda_x(b_T) / denominator[T].
struct PartitionOfUnityWeights {
  std::vector<double> denominator;
};

/// Value of the coarse hat at y on the barycenter of fine triangle t.
inline double hat_at_barycenter(const MeshHierarchy& mh, int y, int t) {
  double s = 0.0;
  for (int v : mh.fine().base.triangle(t)) s += hat_value(mh, y, v);
  return s / 3.0;
}

inline PartitionOfUnityWeights build_pou_weights(const CoarseSpace& cs) {
  const auto& mh = cs.hierarchy;
  const auto& fine = cs.fine().base;
  PartitionOfUnityWeights w;
  w.denominator.assign(static_cast<std::size_t>(fine.triangle_count()), 0.0);
  for (int t = 0; t < fine.triangle_count(); ++t) {
    double s = 0.0;
    for (int y : cs.coarse().triangle(mh.coarse_parent(t)))
      if (cs.node_index[static_cast<std::size_t>(y)] >= 0) s += hat_at_barycenter(mh, y, t);
    w.denominator[static_cast<std::size_t>(t)] = s;
  }
  return w;
}

inline double pou_weight(const CoarseSpace& cs, const PartitionOfUnityWeights& w, int x, int t) {
  const double d = w.denominator[static_cast<std::size_t>(t)];
  return d > 0.0 ? hat_at_barycenter(cs.hierarchy, x, t) / d : 0.0;
}

/// Solver for [A C^T; C 0][q; mu] = [r; 0] through a dense Schur complement
/// on the multiplier block. Dependent constraints are handled by a
/// spectrally thresholded pseudo-inverse of the Schur complement.
class ConstrainedSolver {
public:
  ConstrainedSolver(const SparseOperator& a, const SparseOperator& c, double rank_tolerance = 1e-10) {
    ldlt_.compute(a);
    if (ldlt_.info() != Eigen::Success) throw NumericalError("constrained solve: factorization failed");
    const Eigen::VectorXd d = ldlt_.vectorD();
    if (d.size() > 0 && !(d.minCoeff() > 1e-12 * d.cwiseAbs().maxCoeff()))
      throw NumericalError("constrained solve: stiffness block is singular");
    c_ = c;
    if (c.rows() == 0) return;
    const Eigen::MatrixXd ct = Eigen::MatrixXd(c.transpose());
    w_ = ldlt_.solve(ct);
    Eigen::MatrixXd s = c * w_;
    s = 0.5 * (s + s.transpose()).eval();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(s);
    if (eig.info() != Eigen::Success) throw NumericalError("constrained solve: Schur eigendecomposition failed");
    const Eigen::VectorXd lam = eig.eigenvalues();
    const double cutoff = rank_tolerance * std::max(0.0, lam.maxCoeff());
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lam.size());
    rank_ = 0;
    for (Eigen::Index i = 0; i < lam.size(); ++i)
      if (lam[i] > cutoff) {
        inv[i] = 1.0 / lam[i];
        ++rank_;
      }
    s_pinv_ = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& r) const {
    Eigen::MatrixXd z = ldlt_.solve(r);
    if (c_.rows() == 0) return z;
    const Eigen::MatrixXd mu = s_pinv_ * (c_ * z);
    z.noalias() -= w_ * mu;
    return z;
  }

  int constraint_rank() const noexcept { return rank_; }

private:
  Eigen::SimplicialLDLT<SparseOperator> ldlt_;
  SparseOperator c_;
  Eigen::MatrixXd w_;
  Eigen::MatrixXd s_pinv_;
  int rank_ = 0;
};

/// Localized corrector problem for interior coarse node x with k layers.
struct CorrectorProblem {
  int node = -1;   // coarse vertex id
  int layers = 0;
  PatchSet patch;
  std::vector<int> trial_dofs;      // fine free dofs, sorted
  std::vector<int> constraint_rows; // interior node indices with C support on trial dofs
  std::vector<int> rhs_nodes;       // interior node indices y with lambda_y nonzero on the patch of x
};

inline CorrectorProblem make_corrector_problem(const CoarseSpace& cs, const InterpOperator& op, int x, int k) {
  CorrectorProblem prob;
  prob.node = x;
  prob.layers = k;
  prob.patch = cs.hierarchy.patch(x, k);
  prob.trial_dofs = prob.patch.interior_fine_dofs;
  std::vector<char> mark(static_cast<std::size_t>(cs.node_count()), 0);
  for (int d : prob.trial_dofs)
    for (SparseOperator::InnerIterator it(op.C_cols, d); it; ++it) mark[static_cast<std::size_t>(it.row())] = 1;
  for (int i = 0; i < cs.node_count(); ++i)
    if (mark[static_cast<std::size_t>(i)]) prob.constraint_rows.push_back(i);
  const auto [first, last] = cs.coarse().incident(x);
  for (const int* it = first; it != last; ++it)
    for (int y : cs.coarse().triangle(*it)) {
      const int idx = cs.node_index[static_cast<std::size_t>(y)];
      if (idx >= 0) prob.rhs_nodes.push_back(idx);
    }
  std::sort(prob.rhs_nodes.begin(), prob.rhs_nodes.end());
  prob.rhs_nodes.erase(std::unique(prob.rhs_nodes.begin(), prob.rhs_nodes.end()), prob.rhs_nodes.end());
  return prob;
}

/// Corrector values on the trial dofs, one column per rhs node.
struct CorrectorSolution {
  std::vector<int> dofs;
  std::vector<int> rhs_nodes;
  Eigen::MatrixXd values;
};

namespace detail {

inline SparseOperator restrict_square(const SparseOperator& a, const std::vector<int>& idx, std::vector<int>& scratch) {
  for (std::size_t i = 0; i < idx.size(); ++i) scratch[static_cast<std::size_t>(idx[i])] = static_cast<int>(i);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t j = 0; j < idx.size(); ++j)
    for (SparseOperator::InnerIterator it(a, idx[j]); it; ++it) {
      const int i = scratch[static_cast<std::size_t>(it.row())];
      if (i >= 0) trip.emplace_back(i, static_cast<int>(j), it.value());
    }
  for (int i : idx) scratch[static_cast<std::size_t>(i)] = -1;
  SparseOperator out(static_cast<Eigen::Index>(idx.size()), static_cast<Eigen::Index>(idx.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

inline SparseOperator restrict_rows_cols(const RowSparseOperator& c, const std::vector<int>& rows,
                                         const std::vector<int>& cols, std::vector<int>& scratch) {
  for (std::size_t j = 0; j < cols.size(); ++j) scratch[static_cast<std::size_t>(cols[j])] = static_cast<int>(j);
  std::vector<Eigen::Triplet<double>> trip;
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (RowSparseOperator::InnerIterator it(c, rows[i]); it; ++it) {
      const int j = scratch[static_cast<std::size_t>(it.col())];
      if (j >= 0) trip.emplace_back(static_cast<int>(i), j, it.value());
    }
  for (int j : cols) scratch[static_cast<std::size_t>(j)] = -1;
  SparseOperator out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

} // namespace detail

/// Solves the corrector problem of `prob` for every rhs node at once:
///   int grad q . grad w = int_{w_x} lambda_hat_x grad(lambda_y) . grad w  for w in the patch kernel.
inline CorrectorSolution solve_corrector(const CorrectorProblem& prob, const SparseOperator& a,
                                         const InterpOperator& op, const CoarseSpace& cs,
                                         const PartitionOfUnityWeights& weights) {
  const auto& pm = cs.fine();
  const auto& mh = cs.hierarchy;
  if (prob.trial_dofs.empty())
    throw CorrectorError("corrector patch has no interior fine dofs", prob.node, prob.layers);

  std::vector<int> scratch(static_cast<std::size_t>(std::max(pm.free_count(), cs.node_count())), -1);
  const SparseOperator a_p = detail::restrict_square(a, prob.trial_dofs, scratch);
  const SparseOperator c_p = detail::restrict_rows_cols(op.C, prob.constraint_rows, prob.trial_dofs, scratch);

  // Right-hand sides over the fine triangles of the hat support of x.
  for (std::size_t i = 0; i < prob.trial_dofs.size(); ++i)
    scratch[static_cast<std::size_t>(prob.trial_dofs[i])] = static_cast<int>(i);
  const auto ny = static_cast<Eigen::Index>(prob.rhs_nodes.size());
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(prob.trial_dofs.size()), ny);
  const auto [first, last] = cs.coarse().incident(prob.node);
  for (const int* it = first; it != last; ++it)
    for (int t : mh.children(*it)) {
      if (!pm.is_active(t)) continue;
      const double wx = pou_weight(cs, weights, prob.node, t);
      if (wx == 0.0) continue;
      const auto& tri = pm.base.triangle(t);
      const LocalMatrix k = local_stiffness(pm.base.vertex(tri[0]), pm.base.vertex(tri[1]), pm.base.vertex(tri[2]));
      std::array<int, 3> rows{};
      for (int l = 0; l < 3; ++l) {
        const int dof = pm.free_dof[static_cast<std::size_t>(tri[static_cast<std::size_t>(l)])];
        rows[static_cast<std::size_t>(l)] = dof >= 0 ? scratch[static_cast<std::size_t>(dof)] : -1;
      }
      for (Eigen::Index c = 0; c < ny; ++c) {
        const int y = cs.interior_nodes[static_cast<std::size_t>(prob.rhs_nodes[static_cast<std::size_t>(c)])];
        Eigen::Vector3d lam;
        for (int l = 0; l < 3; ++l) lam[l] = hat_value(mh, y, tri[static_cast<std::size_t>(l)]);
        if (lam.isZero(0.0)) continue;
        const Eigen::Vector3d kl = k * lam;
        for (int l = 0; l < 3; ++l)
          if (rows[static_cast<std::size_t>(l)] >= 0) r(rows[static_cast<std::size_t>(l)], c) += wx * kl[l];
      }
    }
  for (int d : prob.trial_dofs) scratch[static_cast<std::size_t>(d)] = -1;

  CorrectorSolution sol;
  sol.dofs = prob.trial_dofs;
  sol.rhs_nodes = prob.rhs_nodes;
  try {
    const ConstrainedSolver solver(a_p, c_p);
    sol.values = solver.solve(r);
  } catch (const NumericalError& e) {
    throw CorrectorError(e.what(), prob.node, prob.layers);
  }
  return sol;
}

/// Single-column convenience form: Q_{x,k}(lambda_y) extended by zero.
inline FineFunction solve_corrector(const CorrectorProblem& prob, const SparseOperator& a, const InterpOperator& op,
                                    const CoarseSpace& cs, const PartitionOfUnityWeights& weights, int y_index) {
  const auto pos = std::find(prob.rhs_nodes.begin(), prob.rhs_nodes.end(), y_index);
  FineFunction q = FineFunction::Zero(cs.fine().free_count());
  if (pos == prob.rhs_nodes.end()) return q;
  const auto sol = solve_corrector(prob, a, op, cs, weights);
  const auto c = static_cast<Eigen::Index>(pos - prob.rhs_nodes.begin());
  for (std::size_t i = 0; i < sol.dofs.size(); ++i) q[sol.dofs[i]] = sol.values(static_cast<Eigen::Index>(i), c);
  return q;
}

/// Columns: interior coarse nodes; rows: fine free dofs. layers < 0 marks
/// the ideal (global) basis.
struct CorrectorBasis {
  int layers = 0;
  SparseOperator Q;
};

struct CorrectorOptions {
  int threads = 1;
  int batch = 32;
};

inline SparseOperator dense_to_sparse(const Eigen::MatrixXd& d) {
  std::vector<Eigen::Triplet<double>> trip;
  for (Eigen::Index j = 0; j < d.cols(); ++j)
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      if (d(i, j) != 0.0) trip.emplace_back(static_cast<int>(i), static_cast<int>(j), d(i, j));
  SparseOperator s(d.rows(), d.cols());
  s.setFromTriplets(trip.begin(), trip.end());
  return s;
}

/// Q_k(lambda_y) = sum_x Q_{x,k}(lambda_y) for every interior node y. Solves
/// run in batches and are accumulated in ascending x, so the result does
/// not depend on the thread count.
inline CorrectorBasis build_corrector_basis(const CoarseSpace& cs, const InterpOperator& op, const SparseOperator& a,
                                           int k, const CorrectorOptions& opt = {}) {
  const auto weights = build_pou_weights(cs);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(cs.fine().free_count(), cs.node_count());
  const int batch = std::max(1, opt.batch);
  std::vector<CorrectorSolution> slots;
  for (int start = 0; start < cs.node_count(); start += batch) {
    const int count = std::min(batch, cs.node_count() - start);
    slots.assign(static_cast<std::size_t>(count), {});
    parallel_for(count, opt.threads, [&](int i) {
      const int x = cs.interior_nodes[static_cast<std::size_t>(start + i)];
      const auto prob = make_corrector_problem(cs, op, x, k);
      slots[static_cast<std::size_t>(i)] = solve_corrector(prob, a, op, cs, weights);
    });
    for (const auto& sol : slots)
      for (std::size_t c = 0; c < sol.rhs_nodes.size(); ++c) {
        auto col = acc.col(sol.rhs_nodes[c]);
        for (std::size_t i = 0; i < sol.dofs.size(); ++i)
          col[sol.dofs[i]] += sol.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c));
      }
  }
  return {k, dense_to_sparse(acc)};
}

/// Global correctors: Q(lambda_y) is the A-orthogonal projection of lambda_y
/// onto the kernel of the quasi-interpolation.
inline CorrectorBasis ideal_corrector_basis(const CoarseSpace& cs, const InterpOperator& op, const SparseOperator& a) {
  const SparseOperator c(op.C);
  Eigen::MatrixXd r = Eigen::MatrixXd(a * cs.prolongation);
  try {
    const ConstrainedSolver solver(a, c);
    return {-1, dense_to_sparse(solver.solve(r))};
  } catch (const NumericalError& e) {
    throw CorrectorError(e.what(), -1, -1);
  }
}

struct MultiscaleSolution {
  Eigen::VectorXd coefficients;
  FineFunction fine;
  double H = 0.0;
  double h = 0.0;
  int layers = 0;
  GeometrySpec geometry;
  InterpKind interp = InterpKind::ProjectiveL2;
};

/// Multiscale basis P - Q as a sparse matrix.
inline SparseOperator multiscale_basis(const CoarseSpace& cs, const CorrectorBasis& basis) {
  if (basis.Q.rows() != cs.prolongation.rows() || basis.Q.cols() != cs.prolongation.cols())
    throw std::invalid_argument("multiscale_basis: corrector basis has wrong dimensions");
  SparseOperator b = cs.prolongation - basis.Q;
  b.prune(0.0);
  return b;
}

inline MultiscaleSolution multiscale_solve(const PerforatedMesh& pm, const CoarseSpace& cs, const CorrectorBasis& basis,
                                           const SparseOperator& a, const FineFunction& load,
                                           InterpKind interp = InterpKind::ProjectiveL2) {
  if (load.size() != pm.free_count() || a.rows() != pm.free_count())
    throw std::invalid_argument("multiscale_solve: dimension mismatch");
  const SparseOperator b = multiscale_basis(cs, basis);
  const SparseOperator ab = a * b;
  const SparseOperator k_sparse = SparseOperator(b.transpose()) * ab;
  Eigen::MatrixXd k = Eigen::MatrixXd(k_sparse);
  k = 0.5 * (k + k.transpose()).eval();
  const Eigen::VectorXd rhs = b.transpose() * load;

  MultiscaleSolution sol;
  sol.H = cs.H();
  sol.h = pm.h();
  sol.layers = basis.layers;
  sol.geometry = pm.spec;
  sol.interp = interp;
  if (k.rows() == 0) {
    sol.coefficients = Eigen::VectorXd();
    sol.fine = FineFunction::Zero(pm.free_count());
    return sol;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(k);
  if (llt.info() != Eigen::Success) throw NumericalError("multiscale system is not positive definite (degenerate basis)");
  sol.coefficients = llt.solve(rhs);
  sol.fine = b * sol.coefficients;
  return sol;
}

/// Text format: header "corrector_basis rows cols layers", then one
/// "node dof value" line per nonzero.
inline void write_corrector_basis(std::ostream& out, const CorrectorBasis& basis) {
  out << "corrector_basis " << basis.Q.rows() << ' ' << basis.Q.cols() << ' ' << basis.layers << '\n';
  char buf[96];
  for (int j = 0; j < basis.Q.outerSize(); ++j)
    for (SparseOperator::InnerIterator it(basis.Q, j); it; ++it) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g\n", j, static_cast<int>(it.row()), it.value());
      out << buf;
    }
}

inline CorrectorBasis read_corrector_basis(std::istream& in) {
  std::string tag;
  long rows = 0, cols = 0;
  CorrectorBasis basis;
  if (!(in >> tag >> rows >> cols >> basis.layers) || tag != "corrector_basis" || rows < 0 || cols < 0)
    throw ConfigError("malformed corrector basis header");
  std::vector<Eigen::Triplet<double>> trip;
  int node = 0, dof = 0;
  double value = 0.0;
  while (in >> node >> dof >> value) {
    if (node < 0 || node >= cols || dof < 0 || dof >= rows) throw ConfigError("corrector basis entry out of range");
    trip.emplace_back(dof, node, value);
  }
  basis.Q.resize(rows, cols);
  basis.Q.setFromTriplets(trip.begin(), trip.end());
  return basis;
}

} // namespace perflod
