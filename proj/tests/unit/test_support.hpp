#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include "hrmesh/mesh.hpp"

namespace hrmesh::test {

inline Mesh single_triangle(Vec2 a = {0, 0}, Vec2 b = {1, 0}, Vec2 c = {0, 1}) {
  Mesh m;
  m.coords = {a, b, c};
  m.tris = {{0, 1, 2}};
  m.boundary.assign(3, {BoundaryClass::Corner, kNone});
  m.lineage = {kNone};
  m.vertex_origin = {kNone, kNone, kNone};
  return m;
}

// Unit square split along the (0,0)-(1,1) diagonal, corners tagged.
inline Mesh two_triangle_square() {
  Mesh m;
  m.coords = {{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  m.tris = {{0, 1, 2}, {0, 2, 3}};
  m.boundary.assign(4, {BoundaryClass::Corner, kNone});
  m.components = {{{0, 0}, {1, 0}}, {{1, 0}, {0, 1}}, {{1, 1}, {-1, 0}}, {{0, 1}, {0, -1}}};
  m.lineage = {kNone, kNone};
  m.vertex_origin = {kNone, kNone, kNone, kNone};
  return m;
}

// Brute-force edge multiplicity, independent of MeshTopology.
inline std::map<std::pair<int, int>, int> edge_counts(const Mesh& m) {
  std::map<std::pair<int, int>, int> counts;
  for (const Triangle& t : m.tris) {
    for (int k = 0; k < 3; ++k) {
      int a = t[k], b = t[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      ++counts[{a, b}];
    }
  }
  return counts;
}

// True when some vertex lies strictly inside an edge it is not an endpoint of.
inline bool has_hanging_node(const Mesh& m) {
  for (const auto& [edge, count] : edge_counts(m)) {
    (void)count;
    const Vec2 a = m.coords[edge.first];
    const Vec2 b = m.coords[edge.second];
    const double len = distance(a, b);
    for (std::size_t v = 0; v < m.num_vertices(); ++v) {
      if (static_cast<int>(v) == edge.first || static_cast<int>(v) == edge.second) continue;
      const Vec2 p = m.coords[v];
      if (std::abs(orient(a, b, p)) > 1e-12 * len * len) continue;
      const double s = dot(p - a, b - a) / (len * len);
      if (s > 1e-12 && s < 1 - 1e-12) return true;
    }
  }
  return false;
}

inline std::vector<std::uint8_t> random_flags(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<std::uint8_t> flags(n);
  for (auto& f : flags) f = coin(rng) ? 1 : 0;
  return flags;
}

}  // namespace hrmesh::test
