#include "hrmesh/mesh_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>

#include "hrmesh/error.hpp"

namespace hrmesh {
namespace {

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T expect(std::istream& is, const char* what) {
  T value{};
  if (!(is >> value)) throw Error(ErrorCode::Parse, std::string("malformed input while reading ") + what);
  return value;
}

}  // namespace

void write_mesh(std::ostream& os, const Mesh& mesh) {
  os << mesh.num_vertices() << ' ' << mesh.num_elements() << '\n';
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const BoundaryTag& tag = mesh.boundary.empty() ? BoundaryTag{} : mesh.boundary[v];
    os << fmt17(mesh.coords[v].x) << ' ' << fmt17(mesh.coords[v].y) << ' ' << static_cast<int>(tag.kind) << ' '
       << tag.component << '\n';
  }
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const Triangle& t = mesh.tris[e];
    const int parent = mesh.lineage.empty() ? kNone : mesh.lineage[e];
    os << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << parent << '\n';
  }
}

Mesh read_mesh(std::istream& is) {
  Mesh mesh;
  const auto nv = expect<long long>(is, "vertex count");
  const auto ne = expect<long long>(is, "element count");
  if (nv < 0 || ne < 0) throw Error(ErrorCode::Parse, "negative counts in mesh header");
  mesh.coords.resize(nv);
  mesh.boundary.resize(nv);
  for (long long v = 0; v < nv; ++v) {
    mesh.coords[v].x = expect<double>(is, "x");
    mesh.coords[v].y = expect<double>(is, "y");
    const int cls = expect<int>(is, "class");
    if (cls < 0 || cls > 2) throw Error(ErrorCode::Parse, "invalid boundary class " + std::to_string(cls));
    mesh.boundary[v].kind = static_cast<BoundaryClass>(cls);
    mesh.boundary[v].component = expect<int>(is, "component");
  }
  mesh.tris.resize(ne);
  mesh.lineage.resize(ne);
  for (long long e = 0; e < ne; ++e) {
    for (int k = 0; k < 3; ++k) {
      const int idx = expect<int>(is, "vertex index");
      if (idx < 0 || idx >= nv) throw Error(ErrorCode::Parse, "vertex index out of range");
      mesh.tris[e][k] = idx;
    }
    mesh.lineage[e] = expect<int>(is, "parent");
  }
  mesh.vertex_origin.assign(nv, kNone);
  rebuild_components(mesh);
  return mesh;
}

void rebuild_components(Mesh& mesh) {
  int max_comp = -1;
  for (const BoundaryTag& tag : mesh.boundary) {
    if (tag.kind == BoundaryClass::Edge) max_comp = std::max(max_comp, tag.component);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  mesh.components.assign(max_comp + 1, BoundaryLine{{nan, nan}, {nan, nan}});
  if (max_comp < 0) return;
  std::vector<std::vector<Vec2>> support(max_comp + 1);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.boundary[v].kind == BoundaryClass::Edge) support[mesh.boundary[v].component].push_back(mesh.coords[v]);
  }
  const MeshTopology topo = build_topology(mesh);
  for (std::size_t ed = 0; ed < topo.edges.size(); ++ed) {
    if (!topo.is_boundary_edge(static_cast<int>(ed))) continue;
    const auto [a, b] = topo.edges[ed];
    for (auto [p, q] : {std::pair{a, b}, std::pair{b, a}}) {
      if (mesh.boundary[p].kind == BoundaryClass::Edge && mesh.boundary[q].kind == BoundaryClass::Corner) {
        support[mesh.boundary[p].component].push_back(mesh.coords[q]);
      }
    }
  }
  for (int c = 0; c <= max_comp; ++c) {
    const auto& pts = support[c];
    if (pts.size() < 2) continue;
    std::size_t bi = 0, bj = 1;
    double best = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      for (std::size_t j = i + 1; j < pts.size(); ++j) {
        const double d = distance(pts[i], pts[j]);
        if (d > best) {
          best = d;
          bi = i;
          bj = j;
        }
      }
    }
    if (best > 0.0) mesh.components[c] = {pts[bi], normalized(pts[bj] - pts[bi])};
  }
}

void save_mesh(const std::string& path, const Mesh& mesh) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_mesh(os, mesh);
}

Mesh load_mesh(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_mesh(is);
}

void write_field(std::ostream& os, std::span<const double> values) {
  os << "FIELD " << values.size() << '\n';
  for (double v : values) os << fmt17(v) << '\n';
}

std::vector<double> read_field(std::istream& is) {
  std::string tag;
  if (!(is >> tag) || tag != "FIELD") throw Error(ErrorCode::Parse, "missing FIELD header");
  const auto n = expect<long long>(is, "field length");
  if (n < 0) throw Error(ErrorCode::Parse, "negative field length");
  std::vector<double> values(n);
  for (auto& v : values) v = expect<double>(is, "field value");
  return values;
}

void save_field(const std::string& path, std::span<const double> values) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  write_field(os, values);
}

std::vector<double> load_field(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  return read_field(is);
}

}  // namespace hrmesh
