#include "hrmesh/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>

#include "hrmesh/error.hpp"

namespace hrmesh {
namespace {

constexpr double kLineTol = 1e-10;

std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

void check_elem(const Mesh& mesh, int elem) {
  if (elem < 0 || static_cast<std::size_t>(elem) >= mesh.num_elements()) {
    throw Error(ErrorCode::InvalidArgument, "element id out of range: " + std::to_string(elem));
  }
}

// Boundary component for the midpoint of boundary edge (a, b).
int midpoint_component(Mesh& out, const Mesh& in, int a, int b) {
  for (int v : {a, b}) {
    if (in.boundary[v].kind == BoundaryClass::Edge) return in.boundary[v].component;
  }
  const Vec2 pa = in.coords[a];
  const Vec2 pb = in.coords[b];
  for (std::size_t c = 0; c < out.components.size(); ++c) {
    const BoundaryLine& line = out.components[c];
    if (line_distance(pa, line.origin, line.tangent) <= kLineTol &&
        line_distance(pb, line.origin, line.tangent) <= kLineTol) {
      return static_cast<int>(c);
    }
  }
  out.components.push_back({pa, normalized(pb - pa)});
  return static_cast<int>(out.components.size()) - 1;
}

}  // namespace

int MeshTopology::neighbor(int elem, int k) const {
  const auto& adj = edge_elems[elem_edges[elem][k]];
  return adj[0] == elem ? adj[1] : adj[0];
}

MeshTopology build_topology(const Mesh& mesh) {
  MeshTopology topo;
  const std::size_t ne = mesh.num_elements();
  topo.elem_edges.resize(ne);
  std::unordered_map<std::uint64_t, int> index;
  index.reserve(ne * 2);
  for (std::size_t e = 0; e < ne; ++e) {
    const Triangle& t = mesh.tris[e];
    for (int k = 0; k < 3; ++k) {
      const int a = t[k];
      const int b = t[(k + 1) % 3];
      auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(topo.edges.size()));
      if (inserted) {
        topo.edges.push_back({std::min(a, b), std::max(a, b)});
        topo.edge_elems.push_back({static_cast<int>(e), kNone});
      } else {
        auto& adj = topo.edge_elems[it->second];
        if (adj[1] != kNone) {
          throw Error(ErrorCode::InvalidArgument, "edge shared by more than two elements");
        }
        adj[1] = static_cast<int>(e);
      }
      topo.elem_edges[e][k] = it->second;
    }
  }
  return topo;
}

double jacobian_det(const Mesh& mesh, int elem) {
  const Triangle& t = mesh.tris[elem];
  return orient(mesh.coords[t[0]], mesh.coords[t[1]], mesh.coords[t[2]]);
}

double element_area(const Mesh& mesh, int elem) { return 0.5 * jacobian_det(mesh, elem); }

Vec2 element_centroid(const Mesh& mesh, int elem) {
  const Triangle& t = mesh.tris[elem];
  const Vec2 a = mesh.coords[t[0]];
  const Vec2 b = mesh.coords[t[1]];
  const Vec2 c = mesh.coords[t[2]];
  return {(a.x + b.x + c.x) / 3.0, (a.y + b.y + c.y) / 3.0};
}

double total_area(const Mesh& mesh) {
  double sum = 0.0;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) sum += element_area(mesh, static_cast<int>(e));
  return sum;
}

std::vector<int> detect_tangled(const Mesh& mesh) {
  std::vector<int> out;
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    if (jacobian_det(mesh, static_cast<int>(e)) <= 0.0) out.push_back(static_cast<int>(e));
  }
  return out;
}

double aspect_ratio(const Mesh& mesh, int elem) {
  check_elem(mesh, elem);
  double lmin = INFINITY;
  double lmax = 0.0;
  for (int k = 0; k < 3; ++k) {
    const double l = distance(mesh.corner(elem, k), mesh.corner(elem, (k + 1) % 3));
    lmin = std::min(lmin, l);
    lmax = std::max(lmax, l);
  }
  if (!(lmin > 0.0) || jacobian_det(mesh, elem) == 0.0) {
    throw Error(ErrorCode::DegenerateElement, "aspect ratio of degenerate element " + std::to_string(elem));
  }
  return lmax / lmin;
}

Orientation principal_orientation(const Mesh& mesh, int elem) {
  check_elem(mesh, elem);
  const Vec2 z0 = mesh.corner(elem, 0);
  const Vec2 e1 = mesh.corner(elem, 1) - z0;
  const Vec2 e2 = mesh.corner(elem, 2) - z0;
  if (cross(e1, e2) == 0.0) {
    throw Error(ErrorCode::DegenerateElement, "orientation of degenerate element " + std::to_string(elem));
  }
  // Left singular vectors of J = [e1 e2] are the eigenvectors of J J^T.
  const double a = e1.x * e1.x + e2.x * e2.x;
  const double b = e1.x * e1.y + e2.x * e2.y;
  const double c = e1.y * e1.y + e2.y * e2.y;
  Orientation o;
  o.theta = 0.5 * std::atan2(2.0 * b, a - c);
  o.sin = std::sin(o.theta);
  o.cos = std::cos(o.theta);
  return o;
}

RefinementResult rgb_refine(const Mesh& mesh, std::span<const std::uint8_t> flags) {
  const std::size_t ne = mesh.num_elements();
  const std::size_t nv = mesh.num_vertices();
  if (flags.size() != ne) {
    throw Error(ErrorCode::ShapeMismatch, "refinement flags length " + std::to_string(flags.size()) +
                                              " != element count " + std::to_string(ne));
  }
  if (!detect_tangled(mesh).empty()) {
    throw Error(ErrorCode::TangledMesh, "cannot refine a tangled mesh");
  }
  const MeshTopology topo = build_topology(mesh);

  std::vector<std::uint8_t> marked(topo.edges.size(), 0);
  for (std::size_t e = 0; e < ne; ++e) {
    if (flags[e]) {
      for (int k = 0; k < 3; ++k) marked[topo.elem_edges[e][k]] = 1;
    }
  }

  RefinementResult result;
  Mesh& out = result.mesh;
  out.coords = mesh.coords;
  out.boundary = mesh.boundary;
  out.components = mesh.components;
  out.vertex_origin.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) out.vertex_origin[v] = static_cast<int>(v);

  // Midpoints are created once per marked edge, in edge order.
  std::vector<int> mid(topo.edges.size(), kNone);
  for (std::size_t ed = 0; ed < topo.edges.size(); ++ed) {
    if (!marked[ed]) continue;
    const auto [a, b] = topo.edges[ed];
    mid[ed] = static_cast<int>(out.coords.size());
    out.coords.push_back(midpoint(mesh.coords[a], mesh.coords[b]));
    BoundaryTag tag;
    if (topo.is_boundary_edge(static_cast<int>(ed))) {
      tag.kind = BoundaryClass::Edge;
      tag.component = midpoint_component(out, mesh, a, b);
    }
    out.boundary.push_back(tag);
    out.vertex_origin.push_back(kNone);
  }

  result.maps.elem_children.resize(ne);
  result.maps.vertex_persist.resize(nv);
  for (std::size_t v = 0; v < nv; ++v) result.maps.vertex_persist[v] = static_cast<int>(v);

  out.tris.reserve(ne * 2);
  out.lineage.reserve(ne * 2);
  for (std::size_t e = 0; e < ne; ++e) {
    const Triangle& t = mesh.tris[e];
    std::array<int, 3> m{};
    int count = 0;
    for (int k = 0; k < 3; ++k) {
      m[k] = mid[topo.elem_edges[e][k]];
      count += m[k] != kNone;
    }
    auto& kids = result.maps.elem_children[e];
    auto emit = [&](int a, int b, int c) {
      kids.push_back(static_cast<int>(out.tris.size()));
      out.tris.push_back({a, b, c});
      out.lineage.push_back(static_cast<int>(e));
    };

    if (count == 0) {
      emit(t[0], t[1], t[2]);
    } else if (count == 3) {
      emit(t[0], m[0], m[2]);
      emit(m[0], t[1], m[1]);
      emit(m[2], m[1], t[2]);
      emit(m[0], m[1], m[2]);
    } else if (count == 1) {
      int k = 0;
      while (m[k] == kNone) ++k;
      const int a = t[k], b = t[(k + 1) % 3], c = t[(k + 2) % 3];
      emit(a, m[k], c);
      emit(m[k], b, c);
    } else {
      // Two marked edges: bisect the longer one first, then the child holding the other.
      int k1 = -1, k2 = -1;
      for (int k = 0; k < 3; ++k) {
        if (m[k] == kNone) continue;
        (k1 < 0 ? k1 : k2) = k;
      }
      auto len = [&](int k) { return distance(mesh.coords[t[k]], mesh.coords[t[(k + 1) % 3]]); };
      if (len(k2) > len(k1)) std::swap(k1, k2);
      const int a = t[k1], b = t[(k1 + 1) % 3], c = t[(k1 + 2) % 3];
      const int m1 = m[k1];
      const int m2 = m[k2];
      if (k2 == (k1 + 1) % 3) {
        emit(a, m1, c);
        emit(m1, b, m2);
        emit(m1, m2, c);
      } else {
        emit(m1, b, c);
        emit(a, m1, m2);
        emit(m1, c, m2);
      }
    }
  }
  return result;
}

Mesh uniform_refine(const Mesh& mesh, int rounds) {
  if (rounds < 0) throw Error(ErrorCode::InvalidArgument, "negative refinement count");
  Mesh current = mesh;
  for (int r = 0; r < rounds; ++r) {
    std::vector<std::uint8_t> all(current.num_elements(), 1);
    current = rgb_refine(current, all).mesh;
  }
  return current;
}

bool is_conforming(const Mesh& mesh) {
  const int nv = static_cast<int>(mesh.num_vertices());
  for (const Triangle& t : mesh.tris) {
    for (int v : t) {
      if (v < 0 || v >= nv) return false;
    }
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) return false;
  }
  MeshTopology topo;
  try {
    topo = build_topology(mesh);
  } catch (const Error&) {
    return false;
  }
  for (std::size_t ed = 0; ed < topo.edges.size(); ++ed) {
    if (!topo.is_boundary_edge(static_cast<int>(ed))) continue;
    for (int v : topo.edges[ed]) {
      if (!mesh.is_boundary(v)) return false;
    }
  }
  return true;
}

std::vector<int> compose_persist(std::span<const int> earlier, std::span<const int> later) {
  std::vector<int> out(earlier.size(), kNone);
  for (std::size_t i = 0; i < earlier.size(); ++i) {
    const int mid = earlier[i];
    if (mid != kNone && static_cast<std::size_t>(mid) < later.size()) out[i] = later[mid];
  }
  return out;
}

Mesh with_coords(const Mesh& mesh, std::vector<Vec2> coords) {
  if (coords.size() != mesh.num_vertices()) {
    throw Error(ErrorCode::ShapeMismatch, "coordinate count does not match mesh");
  }
  Mesh out = mesh;
  out.coords = std::move(coords);
  return out;
}

}  // namespace hrmesh
