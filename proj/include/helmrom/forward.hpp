#pragma once

#include <memory>
#include <vector>

#include "helmrom/fem.hpp"
#include "helmrom/solver.hpp"

namespace helmrom {

/// Discrete Helmholtz operator A(k, q) = S - k^2 M_{1+q} - i k B bound to
/// one (k, q) pair, with its assembled matrix and cached factorization.
/// With q = 0 this is the background operator whose inverse drives the
/// Lippmann-Schwinger solve.
class AssembledOperator {
 public:
  AssembledOperator(std::shared_ptr<const SparseComplexSystem> system, double k,
                    CoefficientField q, bool check_admissible = true);

  double k() const { return k_; }
  const CoefficientField& contrast() const { return q_; }
  bool background() const { return q_.is_identically_zero(); }
  const SparseComplexSystem& system() const { return *system_; }
  const std::shared_ptr<const SparseComplexSystem>& system_ptr() const { return system_; }
  const SpMat& matrix() const { return A_; }
  /// Assembled M_q of the contrast alone (empty pattern when q = 0).
  const SpMat& contrast_mass() const { return Mq_; }
  const Factorization& factorization() const { return *fact_; }

  CVec apply(const CVec& x) const { return A_ * x; }
  /// Direct solve with residual verification:
  /// ||A x - b|| <= 1e-10 (||A||_F ||x|| + ||b||), else SingularMatrixError.
  CVec solve(const CVec& b) const;
  /// M_{1+q} x, the full-mass product used by the wavenumber derivative.
  CVec apply_full_mass(const CVec& x) const;

 private:
  std::shared_ptr<const SparseComplexSystem> system_;
  double k_;
  CoefficientField q_;
  SpMat A_;
  SpMat Mq_;
  std::shared_ptr<const Factorization> fact_;
  double a_frob_ = 0.0;
};

/// Background operator A(k, 0) for the Lippmann-Schwinger path.
AssembledOperator make_background(std::shared_ptr<const SparseComplexSystem> system, double k);

/// Direct variational solve at the operator's (k, q) for one load vector.
Wavefield solve_direct(const AssembledOperator& op, const CVec& load);

/// Contrast potential w = A(k,0)^{-1} (M_q g): the field scattered once by
/// the contrast. Requires a background operator.
CVec apply_contrast_potential(const AssembledOperator& background, const CoefficientField& q,
                              const CVec& g);

struct LsSolution {
  Wavefield field;
  int iterations = 0;
  std::vector<double> residual_history;
};

/// Lippmann-Schwinger solve of u - k^2 A0^{-1} M_q u = A0^{-1} load via
/// matrix-free GMRES. Throws ConvergenceFailure (with history) when the
/// iteration exhausts its budget.
LsSolution solve_ls(const AssembledOperator& background, const CoefficientField& q,
                    const CVec& load, const KrylovConfig& config = {});

/// Wavenumber derivative: solves A(k,q) v = (2k M_{1+q} + i B) u for the
/// derivative of the wavefield with a k-independent load.
Wavefield wavenumber_derivative(const AssembledOperator& op, const Wavefield& u);

/// Ratio ||u||_{H2,broken} / ((k + 1 + 1/k + 1/k^2) ||f||_{L2}) measuring
/// the wavenumber-explicit regularity bound. Returns 0 when f_l2 = 0.
/// Requires an order-2 space.
double h2_bound_ratio(const Wavefield& u, double f_l2, double k);

}  // namespace helmrom
