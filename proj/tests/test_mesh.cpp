#include <cmath>
#include <set>

#include "doctest.h"
#include "helmrom/errors.hpp"
#include "helmrom/mesh.hpp"

using namespace helmrom;

TEST_CASE("unit cell mesh has two triangles covering the square") {
  Mesh m = generate_rect_mesh(1, 1);
  CHECK(m.vertex_count() == 4);
  CHECK(m.triangle_count() == 2);
  CHECK(m.area() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.boundary_edges.size() == 4);
  CHECK(m.boundary_length() == doctest::Approx(4.0).epsilon(1e-14));
  validate_mesh(m);
}

TEST_CASE("4x4 rect mesh counts") {
  Mesh m = generate_rect_mesh(4, 4);
  CHECK(m.vertex_count() == 25);
  CHECK(m.triangle_count() == 32);
  CHECK(m.boundary_edges.size() == 16);
  CHECK(m.area() == doctest::Approx(1.0).epsilon(1e-14));
  validate_mesh(m);
}

TEST_CASE("anisotropic rect mesh covers width x height") {
  Mesh m = generate_rect_mesh(2, 3, 2.0, 1.5);
  CHECK(m.triangle_count() == 12);
  CHECK(m.area() == doctest::Approx(3.0).epsilon(1e-14));
  CHECK(m.boundary_length() == doctest::Approx(7.0).epsilon(1e-14));
  validate_mesh(m);
}

TEST_CASE("rect mesh rejects degenerate input") {
  CHECK_THROWS_AS(generate_rect_mesh(0, 4), InvalidArgumentError);
  CHECK_THROWS_AS(generate_rect_mesh(4, -1), InvalidArgumentError);
  CHECK_THROWS_AS(generate_rect_mesh(4, 4, 0.0, 1.0), InvalidArgumentError);
}

TEST_CASE("octagon disk area matches the inscribed-polygon formula") {
  // area of the regular n-gon of circumradius R: (n/2) R^2 sin(2 pi / n)
  Mesh m = generate_polygon_disk_mesh(8, 1.0);
  CHECK(m.area() == doctest::Approx(2.0 * std::sqrt(2.0)).epsilon(1e-13));
  CHECK(m.triangle_count() == 8);
  CHECK(m.vertex_count() == 9);
  CHECK(m.boundary_edges.size() == 8);
  validate_mesh(m);
}

TEST_CASE("fine polygon disk approaches the circle area") {
  Mesh m = generate_polygon_disk_mesh(256, 1.0);
  CHECK(std::abs(m.area() - M_PI) < 1e-3);
  validate_mesh(m);
}

TEST_CASE("disk mesh scales with radius squared") {
  Mesh m = generate_polygon_disk_mesh(64, 2.0);
  Mesh unit = generate_polygon_disk_mesh(64, 1.0);
  CHECK(m.area() == doctest::Approx(4.0 * unit.area()).epsilon(1e-13));
}

TEST_CASE("disk mesh rejects rims coarser than 8 segments") {
  CHECK_THROWS_AS(generate_polygon_disk_mesh(7, 1.0), InvalidArgumentError);
  CHECK_THROWS_AS(generate_polygon_disk_mesh(3, 1.0), InvalidArgumentError);
  CHECK_THROWS_AS(generate_polygon_disk_mesh(8, 0.0), InvalidArgumentError);
}

TEST_CASE("uniform refinement quarters triangles and halves edges") {
  Mesh m = generate_rect_mesh(3, 2);
  Mesh r = refine_uniform(m);
  CHECK(r.triangle_count() == 4 * m.triangle_count());
  CHECK(r.boundary_edges.size() == 2 * m.boundary_edges.size());
  CHECK(r.area() == doctest::Approx(m.area()).epsilon(1e-13));
  CHECK(r.max_edge_length() == doctest::Approx(0.5 * m.max_edge_length()).epsilon(1e-13));
  CHECK(r.min_edge_length() == doctest::Approx(0.5 * m.min_edge_length()).epsilon(1e-13));
  CHECK(r.boundary_length() == doctest::Approx(m.boundary_length()).epsilon(1e-13));
  validate_mesh(r);

  Mesh rr = refine_uniform(r);
  CHECK(rr.triangle_count() == 16 * m.triangle_count());
  validate_mesh(rr);
}

TEST_CASE("boundary normals are outward unit vectors") {
  for (const Mesh& m : {generate_rect_mesh(4, 4), generate_polygon_disk_mesh(16, 1.0)}) {
    // interior reference point: average of all vertices
    double cx = 0.0, cy = 0.0;
    for (const auto& v : m.vertices) {
      cx += v.x;
      cy += v.y;
    }
    cx /= static_cast<double>(m.vertex_count());
    cy /= static_cast<double>(m.vertex_count());
    for (std::size_t e = 0; e < m.boundary_edges.size(); ++e) {
      Vec2 n = m.boundary_normal(e);
      CHECK(std::hypot(n.x, n.y) == doctest::Approx(1.0).epsilon(1e-14));
      const Vec2& a = m.vertices[m.boundary_edges[e].a];
      const Vec2& b = m.vertices[m.boundary_edges[e].b];
      double mx = 0.5 * (a.x + b.x) - cx, my = 0.5 * (a.y + b.y) - cy;
      CHECK(n.x * mx + n.y * my > 0.0);  // points away from the interior
    }
  }
}

TEST_CASE("boundary mask flags exactly the boundary-edge endpoints") {
  Mesh m = generate_rect_mesh(5, 3);
  std::set<std::uint32_t> on_edges;
  for (const auto& e : m.boundary_edges) {
    on_edges.insert(e.a);
    on_edges.insert(e.b);
  }
  for (std::uint32_t v = 0; v < m.vertex_count(); ++v)
    CHECK(static_cast<bool>(m.is_boundary_vertex[v]) == (on_edges.count(v) > 0));
}

TEST_CASE("fingerprints distinguish meshes and are stable") {
  Mesh a = generate_rect_mesh(4, 4);
  Mesh b = generate_rect_mesh(4, 4);
  Mesh c = generate_rect_mesh(8, 8);
  Mesh d = generate_rect_mesh(4, 4, 2.0, 1.0);
  CHECK(a.fingerprint() == b.fingerprint());
  CHECK(a.fingerprint() != c.fingerprint());
  CHECK(a.fingerprint() != d.fingerprint());
}

TEST_CASE("validate_mesh rejects structural defects") {
  Mesh m = generate_rect_mesh(2, 2);

  SUBCASE("flipped triangle orientation") {
    std::swap(m.triangles[0][0], m.triangles[0][1]);
    CHECK_THROWS_AS(validate_mesh(m), InvalidArgumentError);
  }
  SUBCASE("out-of-range vertex index") {
    m.triangles[0][0] = 1000;
    CHECK_THROWS_AS(validate_mesh(m), InvalidArgumentError);
  }
  SUBCASE("repeated vertex in a triangle") {
    m.triangles[0][1] = m.triangles[0][0];
    CHECK_THROWS_AS(validate_mesh(m), InvalidArgumentError);
  }
  SUBCASE("boundary mask of the wrong size") {
    m.is_boundary_vertex.pop_back();
    CHECK_THROWS_AS(validate_mesh(m), InvalidArgumentError);
  }
  SUBCASE("boundary edge missing") {
    m.boundary_edges.pop_back();
    CHECK_THROWS_AS(validate_mesh(m), InvalidArgumentError);
  }
}

TEST_CASE("validation holds across a family of generated meshes") {
  for (int n = 1; n <= 6; ++n) {
    Mesh m = generate_rect_mesh(n, 7 - n, 0.5 + 0.25 * n, 1.0);
    validate_mesh(m);
    validate_mesh(refine_uniform(m));
  }
  for (int n : {8, 11, 16, 33}) {
    Mesh m = generate_polygon_disk_mesh(n, 0.7);
    validate_mesh(m);
    validate_mesh(refine_uniform(m));
  }
}
