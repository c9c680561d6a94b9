#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "hrmesh/geometry.hpp"

namespace hrmesh {

inline constexpr int kNone = -1;

using Triangle = std::array<int, 3>;

enum class BoundaryClass : std::uint8_t { Interior = 0, Edge = 1, Corner = 2 };

struct BoundaryTag {
  BoundaryClass kind = BoundaryClass::Interior;
  int component = kNone;  // only meaningful for Edge vertices

  friend bool operator==(const BoundaryTag&, const BoundaryTag&) = default;
};

// Supporting line of one straight boundary component.
struct BoundaryLine {
  Vec2 origin;
  Vec2 tangent;  // unit length
};

// Planar triangular mesh. Triangles are stored counter-clockwise.
struct Mesh {
  std::vector<Vec2> coords;
  std::vector<Triangle> tris;
  std::vector<BoundaryTag> boundary;
  std::vector<BoundaryLine> components;
  // Parent element in the pre-refinement mesh, or kNone.
  std::vector<int> lineage;
  // Persistent vertex id in the pre-refinement mesh, or kNone for new vertices.
  std::vector<int> vertex_origin;

  std::size_t num_vertices() const { return coords.size(); }
  std::size_t num_elements() const { return tris.size(); }

  Vec2 corner(int elem, int k) const { return coords[tris[elem][k]]; }

  bool is_boundary(int v) const { return boundary[v].kind != BoundaryClass::Interior; }
};

// Lineage of one refinement step.
struct RefinementMaps {
  // elem_children[old] lists the new element ids; singleton for untouched elements.
  std::vector<std::vector<int>> elem_children;
  // vertex_persist[old] is the id of the same vertex in the new mesh.
  std::vector<int> vertex_persist;
};

struct RefinementResult {
  Mesh mesh;
  RefinementMaps maps;
};

// Unique undirected edges and their element adjacency.
struct MeshTopology {
  std::vector<std::array<int, 2>> edges;       // (a, b) with a < b
  std::vector<std::array<int, 2>> edge_elems;  // second entry kNone on the boundary
  // elem_edges[e][k] is the edge joining local corners k and k+1.
  std::vector<std::array<int, 3>> elem_edges;

  bool is_boundary_edge(int edge) const { return edge_elems[edge][1] == kNone; }
  // Element across local edge k of elem, or kNone.
  int neighbor(int elem, int k) const;
};

MeshTopology build_topology(const Mesh& mesh);

// det[z1 - z0; z2 - z0], twice the signed area.
double jacobian_det(const Mesh& mesh, int elem);
double element_area(const Mesh& mesh, int elem);
Vec2 element_centroid(const Mesh& mesh, int elem);
double total_area(const Mesh& mesh);

// Elements with non-positive Jacobian determinant, in increasing order.
std::vector<int> detect_tangled(const Mesh& mesh);

// Longest over shortest edge length.
double aspect_ratio(const Mesh& mesh, int elem);

struct Orientation {
  double theta = 0.0;  // in (-pi/2, pi/2]
  double sin = 0.0;
  double cos = 1.0;
};

// Direction of the dominant left singular vector of the element Jacobian.
Orientation principal_orientation(const Mesh& mesh, int elem);

// Red-green-blue refinement. Flagged elements are split red; closure splits
// neighbours green (one marked edge), blue (two) or red (three).
RefinementResult rgb_refine(const Mesh& mesh, std::span<const std::uint8_t> flags);

// k rounds of all-red refinement.
Mesh uniform_refine(const Mesh& mesh, int rounds);

// Edge-share counts in {1, 2}, boundary edges on tagged vertices, indices valid.
bool is_conforming(const Mesh& mesh);

// Composition of per-step persistence maps: out[i] = later[earlier[i]].
std::vector<int> compose_persist(std::span<const int> earlier, std::span<const int> later);

// Copy of mesh with its vertex coordinates replaced (same connectivity).
Mesh with_coords(const Mesh& mesh, std::vector<Vec2> coords);

}  // namespace hrmesh
