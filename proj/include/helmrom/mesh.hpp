#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "helmrom/util.hpp"

namespace helmrom {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

/// One edge of the domain boundary. (a, b) follow the counter-clockwise
/// vertex order of the owning triangle, so the outward unit normal is
/// (t.y, -t.x)/|t| for t = b - a.
struct BoundaryEdge {
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint32_t tri = 0;
};

/// Conforming triangulation of a polygonal domain. Triangles are stored
/// counter-clockwise; the boundary is the set of edges owned by exactly
/// one triangle.
struct Mesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<BoundaryEdge> boundary_edges;
  std::vector<std::uint8_t> is_boundary_vertex;

  std::size_t vertex_count() const { return vertices.size(); }
  std::size_t triangle_count() const { return triangles.size(); }

  double triangle_area(std::size_t t) const;
  Vec2 centroid(std::size_t t) const;
  double area() const;
  double max_edge_length() const;
  double min_edge_length() const;
  double boundary_length() const;

  /// Outward unit normal of boundary edge e.
  Vec2 boundary_normal(std::size_t e) const;
  /// Length of boundary edge e.
  double boundary_edge_length(std::size_t e) const;

  /// FNV-1a over vertex coordinates, connectivity and boundary data.
  std::string fingerprint() const;
};

/// Structured crossed-diagonal triangulation of [0,width] x [0,height]
/// with nx x ny cells (2 triangles each, diagonal direction alternating
/// with cell parity). Throws InvalidArgumentError on non-positive input.
Mesh generate_rect_mesh(int nx, int ny, double width = 1.0, double height = 1.0);

/// Fan triangulation of the regular n-gon inscribed in the circle of the
/// given radius: one center vertex, n rim vertices, n triangles.
/// Requires n >= 8 (coarser rims distort the disk too much) and
/// radius > 0.
Mesh generate_polygon_disk_mesh(int n, double radius);

/// Red refinement: every triangle splits into four via edge midpoints.
/// Edge lengths halve exactly; boundary edge count doubles.
Mesh refine_uniform(const Mesh& mesh);

/// Checks structural invariants (index bounds, positive orientation,
/// closed boundary loop, consistent boundary mask). Throws
/// InvalidArgumentError with a description of the first violation.
void validate_mesh(const Mesh& mesh);

}  // namespace helmrom
