#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "hrmesh/domain.hpp"
#include "hrmesh/error.hpp"
#include "hrmesh/mesh_io.hpp"

using namespace hrmesh;

TEST_CASE("mesh text round trip is exact") {
  Mesh m = generate_domain(DomainSpec::l_shape({0.37, 0.61}), 30, 3);
  m = rgb_refine(m, std::vector<std::uint8_t>(m.num_elements(), 0)).mesh;
  std::stringstream ss;
  write_mesh(ss, m);
  const Mesh r = read_mesh(ss);
  CHECK(r.coords == m.coords);
  CHECK(r.tris == m.tris);
  CHECK(r.boundary == m.boundary);
  CHECK(r.lineage == m.lineage);
  // Rebuilt component lines pass through every tagged vertex.
  for (std::size_t v = 0; v < r.num_vertices(); ++v) {
    if (r.boundary[v].kind != BoundaryClass::Edge) continue;
    const BoundaryLine& line = r.components[r.boundary[v].component];
    CHECK(line_distance(r.coords[v], line.origin, line.tangent) <= 1e-12);
  }
}

TEST_CASE("mesh text layout") {
  Mesh m;
  m.coords = {{0, 0}, {1, 0}, {0, 1}};
  m.tris = {{0, 1, 2}};
  m.boundary.assign(3, {BoundaryClass::Corner, kNone});
  m.lineage = {kNone};
  std::stringstream ss;
  write_mesh(ss, m);
  std::string first;
  std::getline(ss, first);
  CHECK(first == "3 1");
  std::string line;
  std::getline(ss, line);
  CHECK(line == "0 0 2 -1");
}

TEST_CASE("malformed mesh input is rejected") {
  std::stringstream bad("2 1\n0 0 0 -1\n");
  CHECK_THROWS_AS(read_mesh(bad), Error);
  std::stringstream bad_index("3 1\n0 0 2 -1\n1 0 2 -1\n0 1 2 -1\n0 1 7 -1\n");
  CHECK_THROWS_AS(read_mesh(bad_index), Error);
}

TEST_CASE("field round trip") {
  const std::vector<double> values{0.1, -2.5e-17, 1.0 / 3.0, 12345.678901234567};
  std::stringstream ss;
  write_field(ss, values);
  CHECK(ss.str().rfind("FIELD 4\n", 0) == 0);
  CHECK(read_field(ss) == values);
}
