#pragma once

#include <array>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "helmrom/mesh.hpp"
#include "helmrom/solver.hpp"
#include "helmrom/util.hpp"

namespace helmrom {

/// Scalar coefficient on the computational domain. Three shapes cover all
/// uses: a global constant, one value per triangle, or an analytic
/// callback evaluated at quadrature points.
class CoefficientField {
 public:
  enum class Kind { Constant, Piecewise, Callback };

  static CoefficientField constant(double value);
  static CoefficientField piecewise(std::vector<double> cell_values);
  static CoefficientField callback(std::function<double(double, double)> fn);

  Kind kind() const { return kind_; }
  /// Evaluates on triangle `tri` at point (x, y).
  double operator()(std::size_t tri, double x, double y) const;
  /// True if the field is identically zero (cheap structural check;
  /// callbacks always report false).
  bool is_identically_zero() const;
  /// Key for factorization caching: content hash for constant/piecewise
  /// fields, a unique id for callbacks.
  const std::string& cache_key() const { return cache_key_; }

 private:
  CoefficientField() = default;
  Kind kind_ = Kind::Constant;
  double value_ = 0.0;
  std::vector<double> cell_values_;
  std::function<double(double, double)> fn_;
  std::string cache_key_;
};

/// Checks q(x) >= floor on the mesh: exactly for constant/piecewise
/// fields, at interior quadrature points for callbacks.
bool is_admissible(const CoefficientField& q, const Mesh& mesh, double floor = -1.0);

/// Continuous Lagrange space of order 1 (vertex dofs) or 2 (vertex plus
/// edge-midpoint dofs) on a triangle mesh.
class FunctionSpace {
 public:
  static std::shared_ptr<const FunctionSpace> create(std::shared_ptr<const Mesh> mesh, int order);

  const Mesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const Mesh>& mesh_ptr() const { return mesh_; }
  int order() const { return order_; }
  Eigen::Index dof_count() const { return dof_count_; }
  int dofs_per_cell() const { return order_ == 1 ? 3 : 6; }

  /// Global dofs of triangle t: vertices (a,b,c), then for order 2 the
  /// midpoints of edges (a,b), (b,c), (c,a).
  std::array<std::uint32_t, 6> cell_dofs(std::size_t t) const;
  /// Dofs on the domain boundary, ascending.
  const std::vector<std::uint32_t>& boundary_dofs() const { return boundary_dofs_; }
  /// Dofs of boundary edge e: endpoints (a, b), plus midpoint for order 2.
  std::array<std::uint32_t, 3> boundary_edge_dofs(std::size_t e) const;
  /// Nodal position of a dof (vertex or edge midpoint).
  Vec2 dof_position(std::uint32_t dof) const;
  std::string fingerprint() const;

 private:
  FunctionSpace() = default;
  std::shared_ptr<const Mesh> mesh_;
  int order_ = 1;
  Eigen::Index dof_count_ = 0;
  std::vector<std::uint32_t> tri_edges_;   // 3 per triangle (order 2)
  std::vector<std::uint32_t> bedge_mid_;   // midpoint dof per boundary edge (order 2)
  std::vector<Vec2> edge_midpoints_;
  std::vector<std::uint32_t> boundary_dofs_;
};

/// Complex-valued finite element function.
struct Wavefield {
  std::shared_ptr<const FunctionSpace> space;
  CVec dofs;
};

/// Quadrature strength for volume terms: Degree4 (6 points, default) or
/// Degree2 (3 points, for robustness studies).
enum class QuadOrder { Degree2, Degree4 };

/// Stiffness matrix (grad u, grad v). Real symmetric, stored complex.
SpMat assemble_stiffness(const FunctionSpace& space);
/// Weighted mass matrix (m u, v). Exact for piecewise coefficients up to
/// the quadrature degree.
SpMat assemble_mass(const FunctionSpace& space, const CoefficientField& m,
                    QuadOrder quad = QuadOrder::Degree4);
/// Boundary mass matrix (u, v) over the domain boundary.
SpMat assemble_boundary_mass(const FunctionSpace& space);
/// Volume load (f, v).
CVec assemble_load(const FunctionSpace& space, const std::function<cplx(double, double)>& f,
                   QuadOrder quad = QuadOrder::Degree4);
/// Boundary load (g, v) over the domain boundary; g receives the point
/// and the outward unit normal.
CVec assemble_boundary_load(const FunctionSpace& space,
                            const std::function<cplx(double, double, const Vec2&)>& g);
/// Mollified point source: cone bump of the given radius centered at
/// `center`, assembled and then rescaled so the load entries sum to one
/// (discrete unit mass). Real-valued.
CVec assemble_point_source(const FunctionSpace& space, Vec2 center, double radius);

/// Dense Gram matrix of the L2 inner product on the boundary, indexed by
/// space.boundary_dofs() order. Real symmetric positive definite.
Eigen::MatrixXd boundary_gram(const FunctionSpace& space);

/// Values of a wavefield at the boundary dofs, in boundary_dofs() order.
CVec boundary_trace(const Wavefield& w);

struct NormSet {
  double l2 = 0.0;
  double h1 = 0.0;       // full norm: sqrt(l2^2 + |grad|^2)
  double h1_semi = 0.0;
};

/// L2 and H1 norms (assembles mass/stiffness; for repeated evaluation use
/// SparseComplexSystem's cached matrices).
NormSet norms(const Wavefield& w);
/// Elementwise H2 seminorm sqrt(sum_T int_T |Hess u|^2). Requires order 2;
/// throws UnsupportedOperation on order-1 spaces whose Hessian vanishes.
double broken_h2_seminorm(const Wavefield& w);

/// Nodal interpolation of an analytic function.
Wavefield interpolate(std::shared_ptr<const FunctionSpace> space,
                      const std::function<cplx(double, double)>& f);

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;
};

/// Quadrature-evaluated L2 and full H1 errors against an analytic
/// solution with known gradient.
ErrorNorms error_vs_exact(const Wavefield& w, const std::function<cplx(double, double)>& exact,
                          const std::function<std::array<cplx, 2>(double, double)>& exact_grad,
                          QuadOrder quad = QuadOrder::Degree4);

/// Quadrature approximation of the L2 norm of an analytic function over
/// the mesh.
double l2_norm_of(const Mesh& mesh, const std::function<double(double, double)>& f,
                  QuadOrder quad = QuadOrder::Degree4);

/// Assembled operator bundle for the impedance problem on one space:
/// stiffness S, unit mass M1, boundary mass B, weighted masses on demand,
/// and a cache of LU factorizations of A(k,q) = S - k^2 M_{1+q} - i k B.
class SparseComplexSystem {
 public:
  explicit SparseComplexSystem(std::shared_ptr<const FunctionSpace> space);

  const FunctionSpace& space() const { return *space_; }
  const std::shared_ptr<const FunctionSpace>& space_ptr() const { return space_; }
  const SpMat& stiffness() const { return S_; }
  const SpMat& unit_mass() const { return M1_; }
  const SpMat& boundary_mass() const { return B_; }

  /// Weighted mass M_q for a contrast field (zero cells are skipped).
  SpMat contrast_mass(const CoefficientField& q) const;
  /// A(k, q) = S - k^2 (M1 + M_q) - i k B.
  SpMat system_matrix(double k, const CoefficientField& q) const;
  /// LU factorization of A(k, q), cached by (k, q) content.
  std::shared_ptr<const Factorization> factorize(double k, const CoefficientField& q) const;
  /// LU factorization of the background operator A(k, 0).
  std::shared_ptr<const Factorization> factorize_background(double k) const;

  double l2_norm(const CVec& u) const;
  double h1_norm(const CVec& u) const;

 private:
  std::shared_ptr<const FunctionSpace> space_;
  SpMat S_, M1_, B_;
  mutable std::mutex cache_mutex_;
  mutable std::map<std::string, std::shared_ptr<const Factorization>> cache_;
};

}  // namespace helmrom
