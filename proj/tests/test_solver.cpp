#include <cmath>
#include <complex>
#include <limits>

#include "doctest.h"
#include "helmrom/errors.hpp"
#include "helmrom/solver.hpp"
#include "oracles.hpp"

using namespace helmrom;

namespace {

SpMat sparse_identity(Eigen::Index n) {
  SpMat a(n, n);
  a.setIdentity();
  return a;
}

/// Random diagonally dominant complex matrix, reproducible by seed.
SpMat random_dominant(Eigen::Index n, std::uint64_t seed) {
  CVec entries = oracles::random_cvec(n * n, seed);
  Eigen::MatrixXcd dense = Eigen::Map<const Eigen::MatrixXcd>(entries.data(), n, n);
  dense.diagonal().array() += cplx(10.0, 1.0);
  return dense.sparseView();
}

}  // namespace

TEST_CASE("LU solves identity and diagonal systems") {
  auto id = lu_factorize(sparse_identity(7));
  CVec b = oracles::random_cvec(7, 11);
  CHECK((id->solve(b) - b).norm() == 0.0);
  CHECK(id->rows() == 7);

  SpMat d(4, 4);
  for (int i = 0; i < 4; ++i) d.insert(i, i) = cplx(i + 1.0, -0.5);
  d.makeCompressed();
  auto f = lu_factorize(d);
  CVec rhs = oracles::random_cvec(4, 12);
  CVec x = f->solve(rhs);
  for (int i = 0; i < 4; ++i)
    CHECK(std::abs(x[i] - rhs[i] / cplx(i + 1.0, -0.5)) < 1e-15);
}

TEST_CASE("LU agrees with a dense full-pivot oracle") {
  SpMat a = random_dominant(50, 21);
  CVec b = oracles::random_cvec(50, 22);
  CVec x = lu_factorize(a)->solve(b);
  CVec ref = oracles::dense_solve(a, b);
  CHECK(oracles::rel_err(x, ref) < 1e-12);
  CHECK((a * x - b).norm() / b.norm() < 1e-12);
}

TEST_CASE("LU solves are bitwise reproducible") {
  SpMat a = random_dominant(40, 31);
  CVec b = oracles::random_cvec(40, 32);
  auto f = lu_factorize(a);
  CVec x1 = f->solve(b);
  CVec x2 = f->solve(b);
  REQUIRE(x1.size() == x2.size());
  for (Eigen::Index i = 0; i < x1.size(); ++i) {
    CHECK(x1[i].real() == x2[i].real());
    CHECK(x1[i].imag() == x2[i].imag());
  }
  auto g = lu_factorize(a);
  CHECK(f->fingerprint() == g->fingerprint());
  CVec x3 = g->solve(b);
  for (Eigen::Index i = 0; i < x1.size(); ++i) CHECK(x1[i] == x3[i]);
}

TEST_CASE("singular matrices are rejected") {
  SpMat z(3, 3);
  z.insert(0, 0) = 1.0;
  z.insert(1, 1) = 1.0;  // row/column 2 empty
  z.makeCompressed();
  CHECK_THROWS_AS(lu_factorize(z), SingularMatrixError);

  SpMat r(2, 2);  // numerically rank deficient
  r.insert(0, 0) = 1.0;
  r.insert(0, 1) = 1.0;
  r.insert(1, 0) = 1.0;
  r.insert(1, 1) = 1.0;
  r.makeCompressed();
  CHECK_THROWS_AS(lu_factorize(r), SingularMatrixError);
}

TEST_CASE("gmres on the identity converges in one step") {
  CVec b = oracles::random_cvec(20, 41);
  GmresResult r = gmres([](const CVec& v) { return v; }, b);
  CHECK(r.converged);
  CHECK(r.iterations == 1);
  CHECK((r.x - b).norm() / b.norm() < 1e-12);
  CHECK(r.residual_history.size() == 1);
}

TEST_CASE("gmres with zero right-hand side returns zero") {
  GmresResult r = gmres([](const CVec& v) { return v; }, CVec::Zero(10));
  CHECK(r.converged);
  CHECK(r.iterations == 0);
  CHECK(r.x.norm() == 0.0);
}

TEST_CASE("gmres terminates at the minimal polynomial degree") {
  // two distinct eigenvalues: exact convergence after two iterations
  CVec diag(12);
  for (int i = 0; i < 12; ++i) diag[i] = (i < 6) ? cplx(2.0, 0.0) : cplx(5.0, 0.0);
  CVec b = oracles::random_cvec(12, 51);
  GmresResult r = gmres([&](const CVec& v) { return CVec(diag.array() * v.array()); }, b,
                        {1e-12, 100, 30});
  CHECK(r.converged);
  CHECK(r.iterations == 2);
}

TEST_CASE("gmres matches the dense oracle on a general system") {
  SpMat a = random_dominant(30, 61);
  CVec b = oracles::random_cvec(30, 62);
  CVec ref = oracles::dense_solve(a, b);
  GmresResult r = gmres([&](const CVec& v) { return CVec(a * v); }, b, {1e-12, 200, 30});
  CHECK(r.converged);
  CHECK(oracles::rel_err(r.x, ref) < 1e-10);
}

TEST_CASE("gmres restart cycles preserve convergence") {
  SpMat a = random_dominant(40, 71);
  CVec b = oracles::random_cvec(40, 72);
  CVec ref = oracles::dense_solve(a, b);
  for (int restart : {3, 7, 40}) {
    GmresResult r =
        gmres([&](const CVec& v) { return CVec(a * v); }, b, {1e-11, 400, restart});
    CHECK(r.converged);
    CHECK(oracles::rel_err(r.x, ref) < 1e-9);
    CHECK(r.residual_history.size() == static_cast<std::size_t>(r.iterations));
    CHECK(r.residual_history.back() <= 1e-11);
  }
}

TEST_CASE("gmres reports failure at the iteration cap without throwing") {
  SpMat a = random_dominant(40, 81);
  CVec b = oracles::random_cvec(40, 82);
  GmresResult r = gmres([&](const CVec& v) { return CVec(a * v); }, b, {1e-14, 3, 2});
  CHECK(!r.converged);
  CHECK(r.iterations == 3);
  CHECK(r.residual_history.back() > 1e-14);
  // partial iterate is still an improvement over x = 0
  CHECK((a * r.x - b).norm() < b.norm());
}

TEST_CASE("gmres rejects non-finite operator output") {
  CVec b = oracles::random_cvec(5, 91);
  auto bad = [](const CVec& v) {
    CVec w = v;
    w[0] = cplx(std::numeric_limits<double>::quiet_NaN(), 0.0);
    return w;
  };
  CHECK_THROWS_AS(gmres(bad, b), NumericalBreakdown);
}

TEST_CASE("gmres is deterministic across runs") {
  SpMat a = random_dominant(25, 101);
  CVec b = oracles::random_cvec(25, 102);
  auto apply = [&](const CVec& v) { return CVec(a * v); };
  GmresResult r1 = gmres(apply, b, {1e-10, 200, 10});
  GmresResult r2 = gmres(apply, b, {1e-10, 200, 10});
  CHECK(r1.iterations == r2.iterations);
  REQUIRE(r1.x.size() == r2.x.size());
  for (Eigen::Index i = 0; i < r1.x.size(); ++i) CHECK(r1.x[i] == r2.x[i]);
}
