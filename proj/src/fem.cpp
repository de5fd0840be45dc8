#include "helmrom/fem.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

// Volume quadrature in barycentric coordinates; weights sum to one and
// are scaled by the triangle area at assembly time.
struct QuadPoint {
  double l0, l1, l2, w;
};

constexpr QuadPoint kQuadDegree4[6] = {
    {0.108103018168070, 0.445948490915965, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.108103018168070, 0.445948490915965, 0.223381589678011},
    {0.445948490915965, 0.445948490915965, 0.108103018168070, 0.223381589678011},
    {0.816847572980459, 0.091576213509771, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.816847572980459, 0.091576213509771, 0.109951743655322},
    {0.091576213509771, 0.091576213509771, 0.816847572980459, 0.109951743655322},
};

constexpr QuadPoint kQuadDegree2[3] = {
    {0.5, 0.5, 0.0, 1.0 / 3.0},
    {0.0, 0.5, 0.5, 1.0 / 3.0},
    {0.5, 0.0, 0.5, 1.0 / 3.0},
};

struct QuadRule {
  const QuadPoint* pts;
  int n;
};

QuadRule quad_rule(QuadOrder q) {
  if (q == QuadOrder::Degree2) return {kQuadDegree2, 3};
  return {kQuadDegree4, 6};
}

// 3-point Gauss rule on [0,1], exact to degree 5.
struct EdgeQuadPoint {
  double t, w;
};
const EdgeQuadPoint kEdgeQuad[3] = {
    {0.5 * (1.0 - std::sqrt(0.6)), 5.0 / 18.0},
    {0.5, 8.0 / 18.0},
    {0.5 * (1.0 + std::sqrt(0.6)), 5.0 / 18.0},
};

// Geometry of one triangle: area and the constant gradients of the
// barycentric coordinates.
struct TriGeom {
  Vec2 p[3];
  double area;
  double g[3][2];
};

TriGeom tri_geom(const Mesh& mesh, std::size_t t) {
  TriGeom geo;
  const auto& tri = mesh.triangles[t];
  for (int i = 0; i < 3; ++i) geo.p[i] = mesh.vertices[tri[i]];
  geo.area = mesh.triangle_area(t);
  double inv2a = 1.0 / (2.0 * geo.area);
  for (int i = 0; i < 3; ++i) {
    const Vec2& b = geo.p[(i + 1) % 3];
    const Vec2& c = geo.p[(i + 2) % 3];
    geo.g[i][0] = (b.y - c.y) * inv2a;
    geo.g[i][1] = (c.x - b.x) * inv2a;
  }
  return geo;
}

// Shape values and physical gradients at one barycentric point.
// ndof = 3 (order 1) or 6 (order 2, edge dofs (01), (12), (20)).
void shape_eval(int order, const TriGeom& geo, double l0, double l1, double l2, double* N,
                double grad[][2]) {
  const double l[3] = {l0, l1, l2};
  for (int i = 0; i < 3; ++i) {
    if (order == 1) {
      N[i] = l[i];
      grad[i][0] = geo.g[i][0];
      grad[i][1] = geo.g[i][1];
    } else {
      N[i] = l[i] * (2.0 * l[i] - 1.0);
      grad[i][0] = (4.0 * l[i] - 1.0) * geo.g[i][0];
      grad[i][1] = (4.0 * l[i] - 1.0) * geo.g[i][1];
    }
  }
  if (order == 2) {
    const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
    for (int e = 0; e < 3; ++e) {
      int a = ea[e], b = eb[e];
      N[3 + e] = 4.0 * l[a] * l[b];
      grad[3 + e][0] = 4.0 * (l[a] * geo.g[b][0] + l[b] * geo.g[a][0]);
      grad[3 + e][1] = 4.0 * (l[a] * geo.g[b][1] + l[b] * geo.g[a][1]);
    }
  }
}

// 1D trace shapes on a boundary edge, parameter t in [0,1] from a to b.
// Order 1: (a, b); order 2: (a, b, midpoint).
void edge_shape_eval(int order, double t, double* N) {
  if (order == 1) {
    N[0] = 1.0 - t;
    N[1] = t;
  } else {
    N[0] = (1.0 - t) * (1.0 - 2.0 * t);
    N[1] = t * (2.0 * t - 1.0);
    N[2] = 4.0 * t * (1.0 - t);
  }
}

std::atomic<std::uint64_t> g_callback_counter{0};

}  // namespace

CoefficientField CoefficientField::constant(double value) {
  CoefficientField f;
  f.kind_ = Kind::Constant;
  f.value_ = value;
  Fnv1a h;
  h.add_f64(value);
  f.cache_key_ = "c:" + h.hex();
  return f;
}

CoefficientField CoefficientField::piecewise(std::vector<double> cell_values) {
  CoefficientField f;
  f.kind_ = Kind::Piecewise;
  f.cell_values_ = std::move(cell_values);
  Fnv1a h;
  for (double v : f.cell_values_) h.add_f64(v);
  f.cache_key_ = "p:" + h.hex();
  return f;
}

CoefficientField CoefficientField::callback(std::function<double(double, double)> fn) {
  CoefficientField f;
  f.kind_ = Kind::Callback;
  f.fn_ = std::move(fn);
  f.cache_key_ = "f:" + std::to_string(g_callback_counter.fetch_add(1));
  return f;
}

double CoefficientField::operator()(std::size_t tri, double x, double y) const {
  switch (kind_) {
    case Kind::Constant:
      return value_;
    case Kind::Piecewise:
      if (tri >= cell_values_.size())
        throw InvalidArgumentError("CoefficientField: cell index exceeds stored values");
      return cell_values_[tri];
    case Kind::Callback:
      return fn_(x, y);
  }
  return 0.0;
}

bool CoefficientField::is_identically_zero() const {
  if (kind_ == Kind::Constant) return value_ == 0.0;
  if (kind_ == Kind::Piecewise)
    return std::all_of(cell_values_.begin(), cell_values_.end(), [](double v) { return v == 0.0; });
  return false;
}

bool is_admissible(const CoefficientField& q, const Mesh& mesh, double floor) {
  auto rule = quad_rule(QuadOrder::Degree4);
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (q.kind() != CoefficientField::Kind::Callback) {
      if (q(t, 0.0, 0.0) < floor) return false;
      continue;
    }
    const auto& tri = mesh.triangles[t];
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      double x = qp.l0 * mesh.vertices[tri[0]].x + qp.l1 * mesh.vertices[tri[1]].x +
                 qp.l2 * mesh.vertices[tri[2]].x;
      double y = qp.l0 * mesh.vertices[tri[0]].y + qp.l1 * mesh.vertices[tri[1]].y +
                 qp.l2 * mesh.vertices[tri[2]].y;
      if (q(t, x, y) < floor) return false;
    }
  }
  return true;
}

std::shared_ptr<const FunctionSpace> FunctionSpace::create(std::shared_ptr<const Mesh> mesh,
                                                           int order) {
  if (!mesh) throw InvalidArgumentError("FunctionSpace: null mesh");
  if (order != 1 && order != 2) throw InvalidArgumentError("FunctionSpace: order must be 1 or 2");
  validate_mesh(*mesh);

  auto space = std::shared_ptr<FunctionSpace>(new FunctionSpace());
  space->mesh_ = std::move(mesh);
  space->order_ = order;
  const Mesh& m = *space->mesh_;
  const auto nv = static_cast<std::uint32_t>(m.vertex_count());

  if (order == 1) {
    space->dof_count_ = nv;
  } else {
    std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> edge_ids;
    space->tri_edges_.resize(3 * m.triangle_count());
    for (std::size_t t = 0; t < m.triangle_count(); ++t) {
      const auto& tri = m.triangles[t];
      const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
      for (int e = 0; e < 3; ++e) {
        auto key = std::minmax(tri[ea[e]], tri[eb[e]]);
        auto it = edge_ids.find({key.first, key.second});
        std::uint32_t id;
        if (it == edge_ids.end()) {
          id = static_cast<std::uint32_t>(edge_ids.size());
          edge_ids[{key.first, key.second}] = id;
          space->edge_midpoints_.push_back(
              {0.5 * (m.vertices[key.first].x + m.vertices[key.second].x),
               0.5 * (m.vertices[key.first].y + m.vertices[key.second].y)});
        } else {
          id = it->second;
        }
        space->tri_edges_[3 * t + e] = id;
      }
    }
    space->dof_count_ = nv + static_cast<Eigen::Index>(edge_ids.size());
    space->bedge_mid_.resize(m.boundary_edges.size());
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
      auto key = std::minmax(m.boundary_edges[e].a, m.boundary_edges[e].b);
      space->bedge_mid_[e] = nv + edge_ids.at({key.first, key.second});
    }
  }

  for (std::uint32_t v = 0; v < nv; ++v)
    if (m.is_boundary_vertex[v]) space->boundary_dofs_.push_back(v);
  if (order == 2)
    for (auto d : space->bedge_mid_) space->boundary_dofs_.push_back(d);
  std::sort(space->boundary_dofs_.begin(), space->boundary_dofs_.end());
  return space;
}

std::array<std::uint32_t, 6> FunctionSpace::cell_dofs(std::size_t t) const {
  const auto& tri = mesh_->triangles[t];
  std::array<std::uint32_t, 6> dofs{tri[0], tri[1], tri[2], 0, 0, 0};
  if (order_ == 2) {
    const auto nv = static_cast<std::uint32_t>(mesh_->vertex_count());
    for (int e = 0; e < 3; ++e) dofs[3 + e] = nv + tri_edges_[3 * t + e];
  }
  return dofs;
}

std::array<std::uint32_t, 3> FunctionSpace::boundary_edge_dofs(std::size_t e) const {
  const auto& be = mesh_->boundary_edges[e];
  std::array<std::uint32_t, 3> dofs{be.a, be.b, 0};
  if (order_ == 2) dofs[2] = bedge_mid_[e];
  return dofs;
}

Vec2 FunctionSpace::dof_position(std::uint32_t dof) const {
  const auto nv = static_cast<std::uint32_t>(mesh_->vertex_count());
  if (dof < nv) return mesh_->vertices[dof];
  return edge_midpoints_[dof - nv];
}

std::string FunctionSpace::fingerprint() const {
  Fnv1a h;
  h.add_u64(static_cast<std::uint64_t>(order_));
  std::string mf = mesh_->fingerprint();
  h.add_bytes(mf.data(), mf.size());
  return h.hex();
}

namespace {

using Triplet = Eigen::Triplet<cplx>;

SpMat from_triplets(Eigen::Index n, std::vector<Triplet>& trips) {
  SpMat A(n, n);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  return A;
}

}  // namespace

SpMat assemble_stiffness(const FunctionSpace& space) {
  const Mesh& mesh = space.mesh();
  const int nd = space.dofs_per_cell();
  auto rule = quad_rule(QuadOrder::Degree4);
  std::vector<Triplet> trips;
  trips.reserve(mesh.triangle_count() * nd * nd);
  double N[6], grad[6][2];
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    TriGeom geo = tri_geom(mesh, t);
    auto dofs = space.cell_dofs(t);
    double ke[6][6] = {};
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      shape_eval(space.order(), geo, qp.l0, qp.l1, qp.l2, N, grad);
      double w = qp.w * geo.area;
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j)
          ke[i][j] += w * (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]);
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) trips.emplace_back(dofs[i], dofs[j], cplx(ke[i][j], 0.0));
  }
  return from_triplets(space.dof_count(), trips);
}

SpMat assemble_mass(const FunctionSpace& space, const CoefficientField& m, QuadOrder quad) {
  const Mesh& mesh = space.mesh();
  const int nd = space.dofs_per_cell();
  auto rule = quad_rule(quad);
  const bool cellwise = m.kind() != CoefficientField::Kind::Callback;
  std::vector<Triplet> trips;
  trips.reserve(mesh.triangle_count() * nd * nd);
  double N[6], grad[6][2];
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    if (cellwise && m(t, 0.0, 0.0) == 0.0) continue;
    TriGeom geo = tri_geom(mesh, t);
    auto dofs = space.cell_dofs(t);
    double ke[6][6] = {};
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      shape_eval(space.order(), geo, qp.l0, qp.l1, qp.l2, N, grad);
      double x = qp.l0 * geo.p[0].x + qp.l1 * geo.p[1].x + qp.l2 * geo.p[2].x;
      double y = qp.l0 * geo.p[0].y + qp.l1 * geo.p[1].y + qp.l2 * geo.p[2].y;
      double w = qp.w * geo.area * m(t, x, y);
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) ke[i][j] += w * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) trips.emplace_back(dofs[i], dofs[j], cplx(ke[i][j], 0.0));
  }
  return from_triplets(space.dof_count(), trips);
}

SpMat assemble_boundary_mass(const FunctionSpace& space) {
  const Mesh& mesh = space.mesh();
  const int nd = space.order() == 1 ? 2 : 3;
  std::vector<Triplet> trips;
  trips.reserve(mesh.boundary_edges.size() * nd * nd);
  double N[3];
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    double len = mesh.boundary_edge_length(e);
    auto dofs = space.boundary_edge_dofs(e);
    double ke[3][3] = {};
    for (const auto& qp : kEdgeQuad) {
      edge_shape_eval(space.order(), qp.t, N);
      double w = qp.w * len;
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) ke[i][j] += w * N[i] * N[j];
    }
    for (int i = 0; i < nd; ++i)
      for (int j = 0; j < nd; ++j) trips.emplace_back(dofs[i], dofs[j], cplx(ke[i][j], 0.0));
  }
  return from_triplets(space.dof_count(), trips);
}

CVec assemble_load(const FunctionSpace& space, const std::function<cplx(double, double)>& f,
                   QuadOrder quad) {
  const Mesh& mesh = space.mesh();
  const int nd = space.dofs_per_cell();
  auto rule = quad_rule(quad);
  CVec b = CVec::Zero(space.dof_count());
  double N[6], grad[6][2];
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    TriGeom geo = tri_geom(mesh, t);
    auto dofs = space.cell_dofs(t);
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      shape_eval(space.order(), geo, qp.l0, qp.l1, qp.l2, N, grad);
      double x = qp.l0 * geo.p[0].x + qp.l1 * geo.p[1].x + qp.l2 * geo.p[2].x;
      double y = qp.l0 * geo.p[0].y + qp.l1 * geo.p[1].y + qp.l2 * geo.p[2].y;
      cplx w = qp.w * geo.area * f(x, y);
      for (int i = 0; i < nd; ++i) b[dofs[i]] += w * N[i];
    }
  }
  return b;
}

CVec assemble_boundary_load(const FunctionSpace& space,
                            const std::function<cplx(double, double, const Vec2&)>& g) {
  const Mesh& mesh = space.mesh();
  const int nd = space.order() == 1 ? 2 : 3;
  CVec b = CVec::Zero(space.dof_count());
  double N[3];
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    const auto& be = mesh.boundary_edges[e];
    double len = mesh.boundary_edge_length(e);
    Vec2 normal = mesh.boundary_normal(e);
    const Vec2& pa = mesh.vertices[be.a];
    const Vec2& pb = mesh.vertices[be.b];
    auto dofs = space.boundary_edge_dofs(e);
    for (const auto& qp : kEdgeQuad) {
      edge_shape_eval(space.order(), qp.t, N);
      double x = pa.x + qp.t * (pb.x - pa.x);
      double y = pa.y + qp.t * (pb.y - pa.y);
      cplx w = qp.w * len * g(x, y, normal);
      for (int i = 0; i < nd; ++i) b[dofs[i]] += w * N[i];
    }
  }
  return b;
}

CVec assemble_point_source(const FunctionSpace& space, Vec2 center, double radius) {
  if (!(radius > 0.0)) throw InvalidArgumentError("assemble_point_source: radius must be positive");
  double scale = 3.0 / (M_PI * radius * radius);
  auto bump = [&](double x, double y) -> cplx {
    double r = std::hypot(x - center.x, y - center.y);
    return r >= radius ? cplx(0.0) : cplx(scale * (1.0 - r / radius));
  };
  CVec b = assemble_load(space, bump, QuadOrder::Degree4);
  double total = b.real().sum();
  if (std::abs(total) < 1e-12)
    throw InvalidArgumentError(
        "assemble_point_source: source unresolved by quadrature (radius too small for mesh)");
  return b / total;
}

Eigen::MatrixXd boundary_gram(const FunctionSpace& space) {
  const auto& bdofs = space.boundary_dofs();
  std::vector<Eigen::Index> pos(space.dof_count(), -1);
  for (std::size_t i = 0; i < bdofs.size(); ++i) pos[bdofs[i]] = static_cast<Eigen::Index>(i);
  Eigen::MatrixXd G = Eigen::MatrixXd::Zero(bdofs.size(), bdofs.size());
  const Mesh& mesh = space.mesh();
  const int nd = space.order() == 1 ? 2 : 3;
  double N[3];
  for (std::size_t e = 0; e < mesh.boundary_edges.size(); ++e) {
    double len = mesh.boundary_edge_length(e);
    auto dofs = space.boundary_edge_dofs(e);
    for (const auto& qp : kEdgeQuad) {
      edge_shape_eval(space.order(), qp.t, N);
      double w = qp.w * len;
      for (int i = 0; i < nd; ++i)
        for (int j = 0; j < nd; ++j) G(pos[dofs[i]], pos[dofs[j]]) += w * N[i] * N[j];
    }
  }
  return G;
}

CVec boundary_trace(const Wavefield& w) {
  const auto& bdofs = w.space->boundary_dofs();
  CVec tr(bdofs.size());
  for (std::size_t i = 0; i < bdofs.size(); ++i) tr[static_cast<Eigen::Index>(i)] = w.dofs[bdofs[i]];
  return tr;
}

NormSet norms(const Wavefield& w) {
  SpMat M = assemble_mass(*w.space, CoefficientField::constant(1.0));
  SpMat S = assemble_stiffness(*w.space);
  NormSet n;
  double l2sq = std::max(0.0, w.dofs.dot(M * w.dofs).real());
  double h1sq = std::max(0.0, w.dofs.dot(S * w.dofs).real());
  n.l2 = std::sqrt(l2sq);
  n.h1_semi = std::sqrt(h1sq);
  n.h1 = std::sqrt(l2sq + h1sq);
  return n;
}

double broken_h2_seminorm(const Wavefield& w) {
  const FunctionSpace& space = *w.space;
  if (space.order() < 2)
    throw UnsupportedOperation("broken_h2_seminorm: requires order-2 elements");
  const Mesh& mesh = space.mesh();
  double total = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    TriGeom geo = tri_geom(mesh, t);
    auto dofs = space.cell_dofs(t);
    // Order-2 shape Hessians are constant per element:
    // vertex i: 4 g_i g_i^T; edge (a,b): 4 (g_a g_b^T + g_b g_a^T).
    cplx hxx = 0.0, hxy = 0.0, hyy = 0.0;
    const int ea[3] = {0, 1, 2}, eb[3] = {1, 2, 0};
    for (int i = 0; i < 3; ++i) {
      cplx c = 4.0 * w.dofs[dofs[i]];
      hxx += c * geo.g[i][0] * geo.g[i][0];
      hxy += c * geo.g[i][0] * geo.g[i][1];
      hyy += c * geo.g[i][1] * geo.g[i][1];
    }
    for (int e = 0; e < 3; ++e) {
      int a = ea[e], b = eb[e];
      cplx c = 4.0 * w.dofs[dofs[3 + e]];
      hxx += c * 2.0 * geo.g[a][0] * geo.g[b][0];
      hxy += c * (geo.g[a][0] * geo.g[b][1] + geo.g[a][1] * geo.g[b][0]);
      hyy += c * 2.0 * geo.g[a][1] * geo.g[b][1];
    }
    total += geo.area * (std::norm(hxx) + 2.0 * std::norm(hxy) + std::norm(hyy));
  }
  return std::sqrt(total);
}

Wavefield interpolate(std::shared_ptr<const FunctionSpace> space,
                      const std::function<cplx(double, double)>& f) {
  CVec dofs(space->dof_count());
  for (Eigen::Index d = 0; d < space->dof_count(); ++d) {
    Vec2 p = space->dof_position(static_cast<std::uint32_t>(d));
    dofs[d] = f(p.x, p.y);
  }
  return {std::move(space), std::move(dofs)};
}

ErrorNorms error_vs_exact(const Wavefield& w, const std::function<cplx(double, double)>& exact,
                          const std::function<std::array<cplx, 2>(double, double)>& exact_grad,
                          QuadOrder quad) {
  const FunctionSpace& space = *w.space;
  const Mesh& mesh = space.mesh();
  const int nd = space.dofs_per_cell();
  auto rule = quad_rule(quad);
  double l2sq = 0.0, h1sq = 0.0;
  double N[6], grad[6][2];
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    TriGeom geo = tri_geom(mesh, t);
    auto dofs = space.cell_dofs(t);
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      shape_eval(space.order(), geo, qp.l0, qp.l1, qp.l2, N, grad);
      double x = qp.l0 * geo.p[0].x + qp.l1 * geo.p[1].x + qp.l2 * geo.p[2].x;
      double y = qp.l0 * geo.p[0].y + qp.l1 * geo.p[1].y + qp.l2 * geo.p[2].y;
      cplx uh = 0.0, ux = 0.0, uy = 0.0;
      for (int i = 0; i < nd; ++i) {
        uh += w.dofs[dofs[i]] * N[i];
        ux += w.dofs[dofs[i]] * grad[i][0];
        uy += w.dofs[dofs[i]] * grad[i][1];
      }
      auto eg = exact_grad(x, y);
      double wq = qp.w * geo.area;
      l2sq += wq * std::norm(uh - exact(x, y));
      h1sq += wq * (std::norm(ux - eg[0]) + std::norm(uy - eg[1]));
    }
  }
  return {std::sqrt(l2sq), std::sqrt(l2sq + h1sq)};
}

double l2_norm_of(const Mesh& mesh, const std::function<double(double, double)>& f,
                  QuadOrder quad) {
  auto rule = quad_rule(quad);
  double acc = 0.0;
  for (std::size_t t = 0; t < mesh.triangle_count(); ++t) {
    TriGeom geo = tri_geom(mesh, t);
    for (int p = 0; p < rule.n; ++p) {
      const auto& qp = rule.pts[p];
      double x = qp.l0 * geo.p[0].x + qp.l1 * geo.p[1].x + qp.l2 * geo.p[2].x;
      double y = qp.l0 * geo.p[0].y + qp.l1 * geo.p[1].y + qp.l2 * geo.p[2].y;
      double v = f(x, y);
      acc += qp.w * geo.area * v * v;
    }
  }
  return std::sqrt(acc);
}

SparseComplexSystem::SparseComplexSystem(std::shared_ptr<const FunctionSpace> space)
    : space_(std::move(space)),
      S_(assemble_stiffness(*space_)),
      M1_(assemble_mass(*space_, CoefficientField::constant(1.0))),
      B_(assemble_boundary_mass(*space_)) {}

SpMat SparseComplexSystem::contrast_mass(const CoefficientField& q) const {
  if (q.is_identically_zero()) return SpMat(space_->dof_count(), space_->dof_count());
  return assemble_mass(*space_, q);
}

SpMat SparseComplexSystem::system_matrix(double k, const CoefficientField& q) const {
  if (!(k > 0.0)) throw InvalidArgumentError("system_matrix: wavenumber must be positive");
  SpMat A = S_ - cplx(k * k, 0.0) * M1_ - cplx(0.0, k) * B_;
  if (!q.is_identically_zero()) A -= cplx(k * k, 0.0) * contrast_mass(q);
  A.makeCompressed();
  return A;
}

std::shared_ptr<const Factorization> SparseComplexSystem::factorize(
    double k, const CoefficientField& q) const {
  Fnv1a h;
  h.add_f64(k);
  std::string key = h.hex() + "|" + q.cache_key();
  {
    std::lock_guard<std::mutex> lock(cache_mutex_);
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
  }
  auto fact = lu_factorize(system_matrix(k, q));
  std::lock_guard<std::mutex> lock(cache_mutex_);
  cache_[key] = fact;
  return fact;
}

std::shared_ptr<const Factorization> SparseComplexSystem::factorize_background(double k) const {
  return factorize(k, CoefficientField::constant(0.0));
}

double SparseComplexSystem::l2_norm(const CVec& u) const {
  return std::sqrt(std::max(0.0, u.dot(M1_ * u).real()));
}

double SparseComplexSystem::h1_norm(const CVec& u) const {
  double l2sq = std::max(0.0, u.dot(M1_ * u).real());
  double semisq = std::max(0.0, u.dot(S_ * u).real());
  return std::sqrt(l2sq + semisq);
}

}  // namespace helmrom
