#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "helmrom/util.hpp"

namespace helmrom {

/// Opaque handle to a sparse LU factorization. Factor once, solve many.
class Factorization {
 public:
  virtual ~Factorization() = default;
  virtual CVec solve(const CVec& rhs) const = 0;
  virtual Eigen::Index rows() const = 0;
  /// Hash of the factored matrix pattern and values.
  virtual const std::string& fingerprint() const = 0;
};

/// Sparse LU with column reordering. Throws SingularMatrixError if the
/// matrix is structurally or numerically singular.
std::shared_ptr<const Factorization> lu_factorize(const SpMat& A);

struct KrylovConfig {
  double tol = 1e-10;   // relative residual target
  int max_iter = 500;   // total matrix applications
  int restart = 50;     // Arnoldi cycle length
};

struct GmresResult {
  CVec x;
  int iterations = 0;
  bool converged = false;
  std::vector<double> residual_history;  // relative residuals, one per iteration
};

/// Restarted GMRES on a matrix-free operator. Zero right-hand side
/// returns x = 0 in zero iterations. Reaching max_iter returns
/// converged = false without throwing; non-finite values throw
/// NumericalBreakdown.
GmresResult gmres(const std::function<CVec(const CVec&)>& apply, const CVec& b,
                  const KrylovConfig& config = {});

}  // namespace helmrom
