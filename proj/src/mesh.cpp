#include "helmrom/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <utility>

#include "helmrom/errors.hpp"

namespace helmrom {

namespace {

double signed_area(const Vec2& a, const Vec2& b, const Vec2& c) {
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x));
}

double dist(const Vec2& a, const Vec2& b) { return std::hypot(b.x - a.x, b.y - a.y); }

/// Rebuilds boundary_edges and is_boundary_vertex from the triangle list.
/// A boundary edge appears in exactly one triangle; it is stored in that
/// triangle's vertex order so outward normals follow from CCW orientation.
void rebuild_boundary(Mesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<std::uint32_t, int>> count;
  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
      auto key = std::minmax(a, b);
      auto it = count.find({key.first, key.second});
      if (it == count.end()) {
        count[{key.first, key.second}] = {t, 1};
      } else {
        it->second.second += 1;
      }
    }
  }
  mesh.boundary_edges.clear();
  mesh.is_boundary_vertex.assign(mesh.vertices.size(), 0);
  for (std::uint32_t t = 0; t < mesh.triangles.size(); ++t) {
    const auto& tri = mesh.triangles[t];
    for (int e = 0; e < 3; ++e) {
      std::uint32_t a = tri[e], b = tri[(e + 1) % 3];
      auto key = std::minmax(a, b);
      if (count[{key.first, key.second}].second == 1) {
        mesh.boundary_edges.push_back({a, b, t});
        mesh.is_boundary_vertex[a] = 1;
        mesh.is_boundary_vertex[b] = 1;
      }
    }
  }
}

}  // namespace

double Mesh::triangle_area(std::size_t t) const {
  const auto& tri = triangles[t];
  return signed_area(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
}

Vec2 Mesh::centroid(std::size_t t) const {
  const auto& tri = triangles[t];
  return {(vertices[tri[0]].x + vertices[tri[1]].x + vertices[tri[2]].x) / 3.0,
          (vertices[tri[0]].y + vertices[tri[1]].y + vertices[tri[2]].y) / 3.0};
}

double Mesh::area() const {
  double s = 0.0;
  for (std::size_t t = 0; t < triangles.size(); ++t) s += triangle_area(t);
  return s;
}

double Mesh::max_edge_length() const {
  double h = 0.0;
  for (const auto& tri : triangles)
    for (int e = 0; e < 3; ++e)
      h = std::max(h, dist(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
  return h;
}

double Mesh::min_edge_length() const {
  double h = std::numeric_limits<double>::infinity();
  for (const auto& tri : triangles)
    for (int e = 0; e < 3; ++e)
      h = std::min(h, dist(vertices[tri[e]], vertices[tri[(e + 1) % 3]]));
  return h;
}

double Mesh::boundary_length() const {
  double s = 0.0;
  for (std::size_t e = 0; e < boundary_edges.size(); ++e) s += boundary_edge_length(e);
  return s;
}

Vec2 Mesh::boundary_normal(std::size_t e) const {
  const auto& be = boundary_edges[e];
  double tx = vertices[be.b].x - vertices[be.a].x;
  double ty = vertices[be.b].y - vertices[be.a].y;
  double len = std::hypot(tx, ty);
  return {ty / len, -tx / len};
}

double Mesh::boundary_edge_length(std::size_t e) const {
  const auto& be = boundary_edges[e];
  return dist(vertices[be.a], vertices[be.b]);
}

std::string Mesh::fingerprint() const {
  Fnv1a h;
  h.add_u64(vertices.size());
  for (const auto& v : vertices) {
    h.add_f64(v.x);
    h.add_f64(v.y);
  }
  h.add_u64(triangles.size());
  for (const auto& t : triangles)
    for (auto v : t) h.add_u64(v);
  h.add_u64(boundary_edges.size());
  for (const auto& e : boundary_edges) {
    h.add_u64(e.a);
    h.add_u64(e.b);
    h.add_u64(e.tri);
  }
  return h.hex();
}

Mesh generate_rect_mesh(int nx, int ny, double width, double height) {
  if (nx < 1 || ny < 1) throw InvalidArgumentError("generate_rect_mesh: nx and ny must be >= 1");
  if (!(width > 0.0) || !(height > 0.0))
    throw InvalidArgumentError("generate_rect_mesh: width and height must be positive");

  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nx + 1) * (ny + 1));
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      mesh.vertices.push_back({width * i / nx, height * j / ny});

  auto vid = [nx](int i, int j) { return static_cast<std::uint32_t>(j * (nx + 1) + i); };
  mesh.triangles.reserve(2u * nx * ny);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      std::uint32_t v00 = vid(i, j), v10 = vid(i + 1, j);
      std::uint32_t v01 = vid(i, j + 1), v11 = vid(i + 1, j + 1);
      if ((i + j) % 2 == 0) {
        mesh.triangles.push_back({v00, v10, v11});
        mesh.triangles.push_back({v00, v11, v01});
      } else {
        mesh.triangles.push_back({v00, v10, v01});
        mesh.triangles.push_back({v10, v11, v01});
      }
    }
  }
  rebuild_boundary(mesh);
  validate_mesh(mesh);
  return mesh;
}

Mesh generate_polygon_disk_mesh(int n, double radius) {
  if (n < 8) throw InvalidArgumentError("generate_polygon_disk_mesh: need n >= 8");
  if (!(radius > 0.0)) throw InvalidArgumentError("generate_polygon_disk_mesh: radius must be positive");

  Mesh mesh;
  mesh.vertices.push_back({0.0, 0.0});
  for (int j = 0; j < n; ++j) {
    double theta = 2.0 * M_PI * j / n;
    mesh.vertices.push_back({radius * std::cos(theta), radius * std::sin(theta)});
  }
  for (int j = 0; j < n; ++j) {
    std::uint32_t a = static_cast<std::uint32_t>(1 + j);
    std::uint32_t b = static_cast<std::uint32_t>(1 + (j + 1) % n);
    mesh.triangles.push_back({0, a, b});
  }
  rebuild_boundary(mesh);
  validate_mesh(mesh);
  return mesh;
}

Mesh refine_uniform(const Mesh& mesh) {
  Mesh fine;
  fine.vertices = mesh.vertices;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::uint32_t> midpoint;
  auto mid = [&](std::uint32_t a, std::uint32_t b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find({key.first, key.second});
    if (it != midpoint.end()) return it->second;
    std::uint32_t id = static_cast<std::uint32_t>(fine.vertices.size());
    fine.vertices.push_back({0.5 * (mesh.vertices[a].x + mesh.vertices[b].x),
                             0.5 * (mesh.vertices[a].y + mesh.vertices[b].y)});
    midpoint[{key.first, key.second}] = id;
    return id;
  };
  fine.triangles.reserve(4 * mesh.triangles.size());
  for (const auto& tri : mesh.triangles) {
    std::uint32_t a = tri[0], b = tri[1], c = tri[2];
    std::uint32_t ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    fine.triangles.push_back({a, ab, ca});
    fine.triangles.push_back({b, bc, ab});
    fine.triangles.push_back({c, ca, bc});
    fine.triangles.push_back({ab, bc, ca});
  }
  rebuild_boundary(fine);
  validate_mesh(fine);
  return fine;
}

void validate_mesh(const Mesh& mesh) {
  if (mesh.vertices.empty() || mesh.triangles.empty())
    throw InvalidArgumentError("mesh: empty vertex or triangle list");
  const std::uint32_t nv = static_cast<std::uint32_t>(mesh.vertices.size());
  for (const auto& tri : mesh.triangles) {
    for (auto v : tri)
      if (v >= nv) throw InvalidArgumentError("mesh: triangle vertex index out of range");
    if (tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2])
      throw InvalidArgumentError("mesh: degenerate triangle (repeated vertex)");
  }
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
    if (!(mesh.triangle_area(t) > 0.0))
      throw InvalidArgumentError("mesh: triangle " + std::to_string(t) +
                                 " is not counter-clockwise or has zero area");
  if (mesh.is_boundary_vertex.size() != mesh.vertices.size())
    throw InvalidArgumentError("mesh: boundary vertex mask size mismatch");

  // Each boundary vertex must have exactly one outgoing and one incoming
  // boundary edge (the boundary is a union of closed loops).
  std::map<std::uint32_t, int> out_deg, in_deg;
  for (const auto& e : mesh.boundary_edges) {
    if (e.a >= nv || e.b >= nv || e.tri >= mesh.triangles.size())
      throw InvalidArgumentError("mesh: boundary edge index out of range");
    out_deg[e.a] += 1;
    in_deg[e.b] += 1;
    const auto& tri = mesh.triangles[e.tri];
    bool found = false;
    for (int i = 0; i < 3; ++i)
      if (tri[i] == e.a && tri[(i + 1) % 3] == e.b) found = true;
    if (!found)
      throw InvalidArgumentError("mesh: boundary edge not an edge of its owner triangle");
  }
  for (const auto& [v, d] : out_deg) {
    if (d != 1 || in_deg[v] != 1)
      throw InvalidArgumentError("mesh: boundary is not a union of simple closed loops");
  }
  for (std::uint32_t v = 0; v < nv; ++v) {
    bool on_bd = out_deg.count(v) > 0;
    if (static_cast<bool>(mesh.is_boundary_vertex[v]) != on_bd)
      throw InvalidArgumentError("mesh: boundary vertex mask inconsistent with boundary edges");
  }
}

}  // namespace helmrom
