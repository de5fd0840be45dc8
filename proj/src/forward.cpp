#include "helmrom/forward.hpp"

#include <cmath>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

double frobenius_norm(const SpMat& A) {
  double s = 0.0;
  for (Eigen::Index c = 0; c < A.outerSize(); ++c)
    for (SpMat::InnerIterator it(A, c); it; ++it) s += std::norm(it.value());
  return std::sqrt(s);
}

}  // namespace

AssembledOperator::AssembledOperator(std::shared_ptr<const SparseComplexSystem> system, double k,
                                     CoefficientField q, bool check_admissible)
    : system_(std::move(system)), k_(k), q_(std::move(q)) {
  if (!system_) throw InvalidArgumentError("AssembledOperator: null system");
  if (!(k_ > 0.0)) throw InvalidArgumentError("AssembledOperator: wavenumber must be positive");
  if (check_admissible && !is_admissible(q_, system_->space().mesh()))
    throw InvalidArgumentError("AssembledOperator: contrast violates q >= -1");
  Mq_ = system_->contrast_mass(q_);
  A_ = system_->system_matrix(k_, q_);
  a_frob_ = frobenius_norm(A_);
  try {
    fact_ = system_->factorize(k_, q_);
  } catch (const SingularMatrixError& e) {
    throw SingularMatrixError(std::string(e.what()) + " (k=" + format_g17(k_) +
                              ", q key=" + q_.cache_key() + ")");
  }
}

CVec AssembledOperator::solve(const CVec& b) const {
  CVec x = fact_->solve(b);
  double resid = (A_ * x - b).norm();
  double bound = 1e-10 * (a_frob_ * x.norm() + b.norm());
  if (resid > bound && resid > 1e-14)
    throw SingularMatrixError("AssembledOperator::solve: residual " + format_g17(resid) +
                              " exceeds bound " + format_g17(bound) + " (k=" + format_g17(k_) +
                              ")");
  return x;
}

CVec AssembledOperator::apply_full_mass(const CVec& x) const {
  CVec y = system_->unit_mass() * x;
  if (Mq_.nonZeros() > 0) y += Mq_ * x;
  return y;
}

AssembledOperator make_background(std::shared_ptr<const SparseComplexSystem> system, double k) {
  return AssembledOperator(std::move(system), k, CoefficientField::constant(0.0));
}

Wavefield solve_direct(const AssembledOperator& op, const CVec& load) {
  if (load.size() != op.system().space().dof_count())
    throw InvalidArgumentError("solve_direct: load size mismatch");
  return {op.system().space_ptr(), op.solve(load)};
}

CVec apply_contrast_potential(const AssembledOperator& background, const CoefficientField& q,
                              const CVec& g) {
  if (!background.background())
    throw InvalidArgumentError("apply_contrast_potential: operator must be a background (q = 0)");
  if (g.size() != background.system().space().dof_count())
    throw InvalidArgumentError("apply_contrast_potential: field size mismatch");
  if (q.is_identically_zero()) return CVec::Zero(g.size());
  SpMat Mq = background.system().contrast_mass(q);
  return background.solve(Mq * g);
}

LsSolution solve_ls(const AssembledOperator& background, const CoefficientField& q,
                    const CVec& load, const KrylovConfig& config) {
  if (!background.background())
    throw InvalidArgumentError("solve_ls: operator must be a background (q = 0)");
  if (load.size() != background.system().space().dof_count())
    throw InvalidArgumentError("solve_ls: load size mismatch");
  if (!is_admissible(q, background.system().space().mesh()))
    throw InvalidArgumentError("solve_ls: contrast violates q >= -1");

  CVec ui = background.solve(load);
  const double k2 = background.k() * background.k();
  SpMat Mq = background.system().contrast_mass(q);
  auto apply = [&](const CVec& x) -> CVec { return x - k2 * background.solve(Mq * x); };
  GmresResult r = gmres(apply, ui, config);
  if (!r.converged)
    throw ConvergenceFailure("solve_ls: GMRES did not reach tol " + format_g17(config.tol) +
                                 " within " + std::to_string(config.max_iter) + " iterations",
                             r.residual_history);
  return {{background.system().space_ptr(), std::move(r.x)}, r.iterations,
          std::move(r.residual_history)};
}

Wavefield wavenumber_derivative(const AssembledOperator& op, const Wavefield& u) {
  if (u.space.get() != op.system().space_ptr().get())
    throw InvalidArgumentError("wavenumber_derivative: wavefield space mismatch");
  CVec rhs = 2.0 * op.k() * op.apply_full_mass(u.dofs) +
             cplx(0.0, 1.0) * (op.system().boundary_mass() * u.dofs);
  return {op.system().space_ptr(), op.solve(rhs)};
}

double h2_bound_ratio(const Wavefield& u, double f_l2, double k) {
  if (u.space->order() < 2) throw UnsupportedOperation("h2_bound_ratio: requires an order-2 space");
  if (!(k > 0.0)) throw InvalidArgumentError("h2_bound_ratio: wavenumber must be positive");
  if (f_l2 == 0.0) return 0.0;
  NormSet n = norms(u);
  double semi2 = broken_h2_seminorm(u);
  double h2 = std::sqrt(n.l2 * n.l2 + n.h1_semi * n.h1_semi + semi2 * semi2);
  return h2 / ((k + 1.0 + 1.0 / k + 1.0 / (k * k)) * f_l2);
}

}  // namespace helmrom
