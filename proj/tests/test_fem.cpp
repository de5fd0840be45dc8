#include <cmath>

#include <Eigen/Eigenvalues>

#include "doctest.h"
#include "helmrom/errors.hpp"
#include "helmrom/fem.hpp"
#include "oracles.hpp"

using namespace helmrom;

namespace {

/// Single unit right triangle (0,0)-(1,0)-(0,1) as a mesh.
Mesh reference_triangle() {
  Mesh m;
  m.vertices = {{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}};
  m.triangles = {{0, 1, 2}};
  m.boundary_edges = {{0, 1, 0}, {1, 2, 0}, {2, 0, 0}};
  m.is_boundary_vertex = {1, 1, 1};
  return m;
}

std::shared_ptr<const FunctionSpace> unit_square_space(int n, int order) {
  auto mesh = std::make_shared<Mesh>(generate_rect_mesh(n, n));
  return FunctionSpace::create(mesh, order);
}

/// Nodal interpolant of a real function.
CVec nodal(const FunctionSpace& space, const std::function<double(double, double)>& f) {
  CVec v(space.dof_count());
  for (Eigen::Index d = 0; d < space.dof_count(); ++d) {
    Vec2 p = space.dof_position(static_cast<std::uint32_t>(d));
    v[d] = f(p.x, p.y);
  }
  return v;
}

}  // namespace

TEST_CASE("reference-triangle stiffness matrix") {
  auto mesh = std::make_shared<Mesh>(reference_triangle());
  auto space = FunctionSpace::create(mesh, 1);
  SpMat s = assemble_stiffness(*space);
  // gradients: (-1,-1), (1,0), (0,1); area 1/2
  double expected[3][3] = {{1.0, -0.5, -0.5}, {-0.5, 0.5, 0.0}, {-0.5, 0.0, 0.5}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      CHECK(s.coeff(i, j).real() == doctest::Approx(expected[i][j]).epsilon(1e-14));
      CHECK(s.coeff(i, j).imag() == 0.0);
    }
}

TEST_CASE("stiffness annihilates constants") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    SpMat s = assemble_stiffness(*space);
    CVec ones = CVec::Constant(space->dof_count(), 1.0);
    CHECK((s * ones).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("stiffness energy of the coordinate interpolant") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    SpMat s = assemble_stiffness(*space);
    CVec x1 = nodal(*space, [](double x, double) { return x; });
    cplx energy = x1.dot(s * x1);  // int |grad x|^2 = 1 over the unit square
    CHECK(energy.real() == doctest::Approx(1.0).epsilon(1e-13));
    CHECK(std::abs(energy.imag()) < 1e-14);
  }
}

TEST_CASE("unit mass integrates to the domain area") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(3, order);
    SpMat m = assemble_mass(*space, CoefficientField::constant(1.0));
    CVec ones = CVec::Constant(space->dof_count(), 1.0);
    cplx total = ones.dot(m * ones);
    CHECK(total.real() == doctest::Approx(1.0).epsilon(1e-13));
  }
}

TEST_CASE("zero coefficient yields an empty mass matrix") {
  auto space = unit_square_space(3, 1);
  SpMat m = assemble_mass(*space, CoefficientField::constant(0.0));
  CHECK(m.norm() == 0.0);
  SpMat mp = assemble_mass(*space,
                           CoefficientField::piecewise(std::vector<double>(
                               space->mesh().triangle_count(), 0.0)));
  CHECK(mp.norm() == 0.0);
}

TEST_CASE("weighted mass with a half-domain indicator") {
  auto space = unit_square_space(4, 1);
  const Mesh& mesh = space->mesh();
  std::vector<double> cells(mesh.triangle_count(), 0.0);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t)
    if (mesh.centroid(t).x < 0.5) cells[t] = 2.0;
  SpMat m = assemble_mass(*space, CoefficientField::piecewise(cells));
  CVec ones = CVec::Constant(space->dof_count(), 1.0);
  CHECK((ones.dot(m * ones)).real() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("mass is linear in the coefficient") {
  auto space = unit_square_space(3, 2);
  SpMat m1 = assemble_mass(*space, CoefficientField::constant(1.0));
  SpMat m3 = assemble_mass(*space, CoefficientField::constant(3.0));
  CHECK((SpMat(m3 - 3.0 * m1)).norm() < 1e-13);
}

TEST_CASE("boundary mass integrates to the perimeter") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    SpMat b = assemble_boundary_mass(*space);
    CVec ones = CVec::Constant(space->dof_count(), 1.0);
    CHECK((ones.dot(b * ones)).real() == doctest::Approx(4.0).epsilon(1e-13));
  }
}

TEST_CASE("boundary mass ignores interior dofs") {
  auto space = unit_square_space(4, 1);
  SpMat b = assemble_boundary_mass(*space);
  for (Eigen::Index d = 0; d < space->dof_count(); ++d) {
    Vec2 p = space->dof_position(static_cast<std::uint32_t>(d));
    bool interior = p.x > 1e-12 && p.x < 1.0 - 1e-12 && p.y > 1e-12 && p.y < 1.0 - 1e-12;
    if (interior) {
      CVec e = CVec::Zero(space->dof_count());
      e[d] = 1.0;
      CHECK((b * e).norm() == 0.0);
    }
  }
}

TEST_CASE("boundary quadratic moment matches a 1-D Gauss oracle") {
  // int_{boundary} x^2 ds computed both through the assembled boundary
  // mass (x is in the space, the product is degree 2 per edge) and an
  // independent per-side Gauss rule.
  double reference =
      oracles::unit_square_boundary_integral([](double x, double) { return x * x; });
  CHECK(reference == doctest::Approx(5.0 / 3.0).epsilon(1e-14));
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    SpMat b = assemble_boundary_mass(*space);
    CVec x1 = nodal(*space, [](double x, double) { return x; });
    CHECK((x1.dot(b * x1)).real() == doctest::Approx(reference).epsilon(1e-13));
  }
}

TEST_CASE("volume load sums to the integral of the source") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    CVec one_load = assemble_load(*space, [](double, double) { return cplx(1.0, 0.0); });
    CHECK(one_load.sum().real() == doctest::Approx(1.0).epsilon(1e-13));
    CVec zero_load = assemble_load(*space, [](double, double) { return cplx(0.0, 0.0); });
    CHECK(zero_load.norm() == 0.0);
  }
}

TEST_CASE("volume quadrature integrates monomials to rule degree") {
  auto mesh = std::make_shared<Mesh>(reference_triangle());
  auto space = FunctionSpace::create(mesh, 1);
  // int_T x^a y^b = a! b! / (a+b+2)! on the reference triangle; the load
  // summed over dofs equals int f by partition of unity.
  auto moment = [&](int a, int b, QuadOrder quad) {
    CVec l = assemble_load(
        *space,
        [a, b](double x, double y) { return cplx(std::pow(x, a) * std::pow(y, b), 0.0); },
        quad);
    return l.sum().real();
  };
  auto exact = [](int a, int b) {
    auto fact = [](int n) { return std::tgamma(n + 1.0); };
    return fact(a) * fact(b) / fact(a + b + 2);
  };
  for (int a = 0; a <= 4; ++a)
    for (int b = 0; a + b <= 4; ++b)
      CHECK(moment(a, b, QuadOrder::Degree4) == doctest::Approx(exact(a, b)).epsilon(1e-14));
  for (int a = 0; a <= 2; ++a)
    for (int b = 0; a + b <= 2; ++b)
      CHECK(moment(a, b, QuadOrder::Degree2) == doctest::Approx(exact(a, b)).epsilon(1e-14));
}

TEST_CASE("boundary load with unit data sums to the perimeter") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(4, order);
    CVec g = assemble_boundary_load(
        *space, [](double, double, const Vec2&) { return cplx(1.0, 0.0); });
    CHECK(g.sum().real() == doctest::Approx(4.0).epsilon(1e-13));
  }
}

TEST_CASE("boundary load sees the outward normal") {
  auto space = unit_square_space(4, 1);
  // g = n.x integrates to zero over the square boundary by symmetry
  CVec g = assemble_boundary_load(
      *space, [](double, double, const Vec2& n) { return cplx(n.x, 0.0); });
  CHECK(std::abs(g.sum().real()) < 1e-13);
  // g = x * n.x integrates to int_{right side} x dx = 1
  CVec gx = assemble_boundary_load(
      *space, [](double x, double, const Vec2& n) { return cplx(x * n.x, 0.0); });
  CHECK(gx.sum().real() == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("mollified point source carries unit discrete mass") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(8, order);
    CVec b = assemble_point_source(*space, {0.5, 0.5}, 0.25);
    CHECK(b.real().sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(b.imag().cwiseAbs().maxCoeff() == 0.0);
    // support is local to the mollifier ball
    for (Eigen::Index d = 0; d < space->dof_count(); ++d) {
      Vec2 p = space->dof_position(static_cast<std::uint32_t>(d));
      double r = std::hypot(p.x - 0.5, p.y - 0.5);
      if (r > 0.25 + 2.0 * space->mesh().max_edge_length())
        CHECK(std::abs(b[d]) == 0.0);
    }
  }
}

TEST_CASE("point source with vanishing support is rejected") {
  auto space = unit_square_space(4, 1);
  CHECK_THROWS_AS(assemble_point_source(*space, {-5.0, -5.0}, 0.1), InvalidArgumentError);
}

TEST_CASE("norms of simple fields") {
  auto space = unit_square_space(8, 1);
  Wavefield one{space, CVec::Constant(space->dof_count(), 1.0)};
  NormSet n1 = norms(one);
  CHECK(n1.l2 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(n1.h1 == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(n1.h1_semi < 1e-12);

  Wavefield x{space, nodal(*space, [](double px, double) { return px; })};
  NormSet nx = norms(x);
  CHECK(nx.l2 * nx.l2 == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(nx.h1 * nx.h1 == doctest::Approx(4.0 / 3.0).epsilon(1e-13));
  CHECK(nx.h1_semi == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("broken H2 seminorm needs second derivatives") {
  auto p1 = unit_square_space(4, 1);
  Wavefield w1{p1, CVec::Zero(p1->dof_count())};
  CHECK_THROWS_AS(broken_h2_seminorm(w1), UnsupportedOperation);

  auto p2 = unit_square_space(4, 2);
  // interpolant of x^2 is exact in P2; Hessian [[2,0],[0,0]], |H|^2 = 4
  Wavefield w2{p2, nodal(*p2, [](double x, double) { return x * x; })};
  CHECK(broken_h2_seminorm(w2) == doctest::Approx(2.0).epsilon(1e-13));
  // x*y has Hessian [[0,1],[1,0]], |H|^2 = 2
  Wavefield wxy{p2, nodal(*p2, [](double x, double y) { return x * y; })};
  CHECK(broken_h2_seminorm(wxy) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-13));
}

TEST_CASE("interpolation error vanishes for reproducible polynomials") {
  auto p1 = unit_square_space(5, 1);
  Wavefield w{p1, nodal(*p1, [](double x, double y) { return 2.0 * x - y + 0.5; })};
  ErrorNorms e = error_vs_exact(
      w, [](double x, double y) { return cplx(2.0 * x - y + 0.5, 0.0); },
      [](double, double) { return std::array<cplx, 2>{cplx(2.0, 0.0), cplx(-1.0, 0.0)}; });
  CHECK(e.l2 < 1e-13);
  CHECK(e.h1 < 1e-13);

  auto p2 = unit_square_space(5, 2);
  Wavefield w2{p2, nodal(*p2, [](double x, double y) { return x * x + x * y; })};
  ErrorNorms e2 = error_vs_exact(
      w2, [](double x, double y) { return cplx(x * x + x * y, 0.0); },
      [](double x, double y) {
        return std::array<cplx, 2>{cplx(2.0 * x + y, 0.0), cplx(x, 0.0)};
      });
  CHECK(e2.l2 < 1e-13);
  CHECK(e2.h1 < 1e-13);
}

TEST_CASE("l2_norm_of matches a separable analytic integral") {
  Mesh mesh = generate_rect_mesh(8, 8);
  // int_[0,1]^2 x^2 y^2 = 1/9
  double v = l2_norm_of(mesh, [](double x, double y) { return x * y; });
  CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("system matrix is complex symmetric") {
  auto space = unit_square_space(4, 1);
  SparseComplexSystem system(space);
  std::vector<double> cells(space->mesh().triangle_count(), 0.0);
  cells[3] = 0.4;
  SpMat a = system.system_matrix(2.0, CoefficientField::piecewise(cells));
  SpMat diff = SpMat(a - SpMat(a.transpose()));
  CHECK(diff.norm() < 1e-14);
  // building blocks are real symmetric
  CHECK(SpMat(system.stiffness() - SpMat(system.stiffness().transpose())).norm() < 1e-14);
  CHECK(SpMat(system.unit_mass() - SpMat(system.unit_mass().transpose())).norm() < 1e-14);
  CHECK(system.unit_mass().toDense().imag().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("unit mass is positive definite") {
  auto space = unit_square_space(3, 2);
  SparseComplexSystem system(space);
  Eigen::MatrixXd m = system.unit_mass().toDense().real();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  CHECK(es.eigenvalues().minCoeff() > 0.0);
}

TEST_CASE("factorization cache returns the same object per (k, q)") {
  auto space = unit_square_space(4, 1);
  SparseComplexSystem system(space);
  auto f1 = system.factorize_background(2.0);
  auto f2 = system.factorize_background(2.0);
  CHECK(f1.get() == f2.get());
  auto f3 = system.factorize_background(3.0);
  CHECK(f1.get() != f3.get());
  auto g1 = system.factorize(2.0, CoefficientField::constant(0.5));
  auto g2 = system.factorize(2.0, CoefficientField::constant(0.5));
  CHECK(g1.get() == g2.get());
}

TEST_CASE("second-order spaces add edge dofs") {
  auto mesh = std::make_shared<Mesh>(generate_rect_mesh(2, 2));
  auto p1 = FunctionSpace::create(mesh, 1);
  auto p2 = FunctionSpace::create(mesh, 2);
  CHECK(p1->dof_count() == 9);
  CHECK(p2->dof_count() == 25);  // 9 vertices + 16 edges
  CHECK(p1->boundary_dofs().size() == 8);
  CHECK(p2->boundary_dofs().size() == 16);  // 8 vertices + 8 edge midpoints
  CHECK_THROWS_AS(FunctionSpace::create(mesh, 3), InvalidArgumentError);
}

TEST_CASE("boundary gram matches the boundary mass restriction") {
  for (int order : {1, 2}) {
    auto space = unit_square_space(3, order);
    Eigen::MatrixXd g = boundary_gram(*space);
    SpMat b = assemble_boundary_mass(*space);
    const auto& bd = space->boundary_dofs();
    REQUIRE(g.rows() == static_cast<Eigen::Index>(bd.size()));
    for (std::size_t i = 0; i < bd.size(); ++i)
      for (std::size_t j = 0; j < bd.size(); ++j)
        CHECK(g(i, j) == doctest::Approx(b.coeff(bd[i], bd[j]).real()).epsilon(1e-13));
    CHECK((g - g.transpose()).norm() < 1e-14);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    CHECK(es.eigenvalues().minCoeff() > 0.0);
  }
}

TEST_CASE("boundary trace picks the boundary dof values") {
  auto space = unit_square_space(3, 2);
  Wavefield w{space, nodal(*space, [](double x, double y) { return x + 2.0 * y; })};
  CVec tr = boundary_trace(w);
  const auto& bd = space->boundary_dofs();
  REQUIRE(tr.size() == static_cast<Eigen::Index>(bd.size()));
  for (std::size_t i = 0; i < bd.size(); ++i) CHECK(tr[i] == w.dofs[bd[i]]);
}

TEST_CASE("admissibility checks the cellwise floor") {
  Mesh mesh = generate_rect_mesh(4, 4);
  CHECK(is_admissible(CoefficientField::constant(-1.0), mesh));
  CHECK(is_admissible(CoefficientField::constant(0.0), mesh));
  CHECK(!is_admissible(CoefficientField::constant(-1.0001), mesh));
  std::vector<double> cells(mesh.triangle_count(), 0.0);
  cells[5] = -1.5;
  CHECK(!is_admissible(CoefficientField::piecewise(cells), mesh));
  CHECK(!is_admissible(
      CoefficientField::callback([](double x, double) { return x < 0.5 ? -2.0 : 0.0; }),
      mesh));
  CHECK(is_admissible(CoefficientField::constant(0.3), mesh, 0.0));
  CHECK(!is_admissible(CoefficientField::constant(-0.1), mesh, 0.0));
}

TEST_CASE("coefficient cache keys reflect content") {
  CHECK(CoefficientField::constant(0.5).cache_key() ==
        CoefficientField::constant(0.5).cache_key());
  CHECK(CoefficientField::constant(0.5).cache_key() !=
        CoefficientField::constant(0.6).cache_key());
  std::vector<double> a{1.0, 2.0}, b{1.0, 2.0}, c{1.0, 3.0};
  CHECK(CoefficientField::piecewise(a).cache_key() == CoefficientField::piecewise(b).cache_key());
  CHECK(CoefficientField::piecewise(a).cache_key() != CoefficientField::piecewise(c).cache_key());
  auto f = [](double, double) { return 0.0; };
  CHECK(CoefficientField::callback(f).cache_key() != CoefficientField::callback(f).cache_key());
}
