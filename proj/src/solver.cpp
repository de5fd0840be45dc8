#include "helmrom/solver.hpp"

#include <cmath>

#include <Eigen/SparseLU>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

class SparseLuFactorization final : public Factorization {
 public:
  explicit SparseLuFactorization(const SpMat& A) {
    if (A.rows() != A.cols()) throw InvalidArgumentError("lu_factorize: matrix must be square");
    if (A.rows() == 0) throw InvalidArgumentError("lu_factorize: empty matrix");
    lu_.isSymmetric(false);
    lu_.compute(A);
    if (lu_.info() != Eigen::Success)
      throw SingularMatrixError("lu_factorize: " + std::string(lu_.lastErrorMessage()));
    rows_ = A.rows();
    Fnv1a h;
    h.add_u64(static_cast<std::uint64_t>(A.rows()));
    h.add_u64(static_cast<std::uint64_t>(A.nonZeros()));
    h.add_bytes(A.valuePtr(), sizeof(cplx) * static_cast<std::size_t>(A.nonZeros()));
    h.add_bytes(A.innerIndexPtr(), sizeof(int) * static_cast<std::size_t>(A.nonZeros()));
    h.add_bytes(A.outerIndexPtr(), sizeof(int) * static_cast<std::size_t>(A.outerSize() + 1));
    fingerprint_ = h.hex();
  }

  CVec solve(const CVec& rhs) const override {
    if (rhs.size() != rows_)
      throw InvalidArgumentError("Factorization::solve: right-hand side size mismatch");
    CVec x = lu_.solve(rhs);
    if (lu_.info() != Eigen::Success)
      throw SingularMatrixError("Factorization::solve: back substitution failed");
    return x;
  }

  Eigen::Index rows() const override { return rows_; }
  const std::string& fingerprint() const override { return fingerprint_; }

 private:
  Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu_;
  Eigen::Index rows_ = 0;
  std::string fingerprint_;
};

}  // namespace

std::shared_ptr<const Factorization> lu_factorize(const SpMat& A) {
  return std::make_shared<SparseLuFactorization>(A);
}

GmresResult gmres(const std::function<CVec(const CVec&)>& apply, const CVec& b,
                  const KrylovConfig& config) {
  if (config.max_iter < 1 || config.restart < 1)
    throw InvalidArgumentError("gmres: max_iter and restart must be positive");
  if (!(config.tol > 0.0)) throw InvalidArgumentError("gmres: tolerance must be positive");

  GmresResult result;
  const Eigen::Index n = b.size();
  const double bnorm = b.norm();
  result.x = CVec::Zero(n);
  if (bnorm == 0.0) {
    result.converged = true;
    return result;
  }
  if (!std::isfinite(bnorm)) throw NumericalBreakdown("gmres: non-finite right-hand side");

  const int m = config.restart;
  Eigen::MatrixXcd V(n, m + 1);
  Eigen::MatrixXcd H = Eigen::MatrixXcd::Zero(m + 1, m);
  CVec cs(m), sn(m), g(m + 1);

  while (result.iterations < config.max_iter) {
    CVec r = b - apply(result.x);
    double beta = r.norm();
    if (!std::isfinite(beta)) throw NumericalBreakdown("gmres: non-finite residual");
    if (beta / bnorm <= config.tol) {
      result.converged = true;
      return result;
    }
    V.col(0) = r / beta;
    g.setZero();
    g[0] = beta;

    int j = 0;
    for (; j < m && result.iterations < config.max_iter; ++j) {
      CVec w = apply(V.col(j));
      ++result.iterations;
      for (int i = 0; i <= j; ++i) {
        H(i, j) = V.col(i).dot(w);
        w -= H(i, j) * V.col(i);
      }
      double hnext = w.norm();
      if (!std::isfinite(hnext)) throw NumericalBreakdown("gmres: non-finite Arnoldi vector");
      H(j + 1, j) = hnext;
      bool breakdown = hnext <= 1e-14 * bnorm;
      if (!breakdown) V.col(j + 1) = w / hnext;

      for (int i = 0; i < j; ++i) {
        cplx tmp = std::conj(cs[i]) * H(i, j) + std::conj(sn[i]) * H(i + 1, j);
        H(i + 1, j) = -sn[i] * H(i, j) + cs[i] * H(i + 1, j);
        H(i, j) = tmp;
      }
      double denom = std::sqrt(std::norm(H(j, j)) + std::norm(H(j + 1, j)));
      if (denom == 0.0) {
        cs[j] = 1.0;
        sn[j] = 0.0;
      } else {
        cs[j] = H(j, j) / denom;
        sn[j] = H(j + 1, j) / denom;
      }
      H(j, j) = std::conj(cs[j]) * H(j, j) + std::conj(sn[j]) * H(j + 1, j);
      H(j + 1, j) = 0.0;
      g[j + 1] = -sn[j] * g[j];
      g[j] = std::conj(cs[j]) * g[j];

      double res = std::abs(g[j + 1]) / bnorm;
      if (!std::isfinite(res)) throw NumericalBreakdown("gmres: non-finite residual estimate");
      result.residual_history.push_back(res);
      if (res <= config.tol || breakdown) {
        ++j;
        break;
      }
    }

    // Minimize over the Krylov basis built so far.
    if (j > 0) {
      CVec y = H.topLeftCorner(j, j).triangularView<Eigen::Upper>().solve(g.head(j));
      result.x += V.leftCols(j) * y;
    }
    double true_res = (b - apply(result.x)).norm() / bnorm;
    if (!std::isfinite(true_res)) throw NumericalBreakdown("gmres: non-finite solution");
    if (true_res <= config.tol) {
      result.converged = true;
      return result;
    }
  }
  return result;
}

}  // namespace helmrom
