#include "hrmesh/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "hrmesh/error.hpp"

namespace hrmesh::features {

int task_width(fem::ProblemKind kind) { return kind == fem::ProblemKind::Poisson ? 1 : 2; }

Structure build_structure(const Mesh& mesh) {
  Structure s;
  s.num_vertices = static_cast<int>(mesh.num_vertices());
  s.num_elements = static_cast<int>(mesh.num_elements());
  s.elem_vertices = mesh.tris;
  s.elem_deg.assign(s.num_elements, 3.0);

  s.vertex_elem_ptr.assign(s.num_vertices + 1, 0);
  for (const Triangle& t : mesh.tris) {
    for (int v : t) ++s.vertex_elem_ptr[v + 1];
  }
  for (int v = 0; v < s.num_vertices; ++v) s.vertex_elem_ptr[v + 1] += s.vertex_elem_ptr[v];
  s.vertex_elems.resize(s.vertex_elem_ptr.back());
  std::vector<int> fill(s.vertex_elem_ptr.begin(), s.vertex_elem_ptr.end() - 1);
  for (int e = 0; e < s.num_elements; ++e) {
    for (int v : mesh.tris[e]) s.vertex_elems[fill[v]++] = e;
  }

  s.vertex_deg.resize(s.num_vertices);
  s.adj_ptr.assign(1, 0);
  std::vector<int> nbrs;
  for (int v = 0; v < s.num_vertices; ++v) {
    s.vertex_deg[v] = s.vertex_elem_ptr[v + 1] - s.vertex_elem_ptr[v];
    nbrs.clear();
    for (int e : s.incident(v)) {
      for (int w : mesh.tris[e]) {
        if (w != v) nbrs.push_back(w);
      }
    }
    std::sort(nbrs.begin(), nbrs.end());
    nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
    s.adj.insert(s.adj.end(), nbrs.begin(), nbrs.end());
    s.adj_ptr.push_back(static_cast<int>(s.adj.size()));
  }
  return s;
}

Matrix vertex_features(const Mesh& mesh, const fem::Field& field) {
  fem::check_field(mesh, field);
  const int nv = static_cast<int>(mesh.num_vertices());
  Matrix m(nv, kVertexDim);
  for (int v = 0; v < nv; ++v) {
    m(v, 0) = mesh.coords[v].x;
    m(v, 1) = mesh.coords[v].y;
    m(v, 2) = field.values[v];
    m(v, 3 + static_cast<int>(mesh.boundary[v].kind)) = 1.0;
  }
  return m;
}

std::vector<Vec2> gradient_per_element(const Mesh& mesh, const fem::Field& field) {
  fem::check_field(mesh, field);
  std::vector<Vec2> out(mesh.num_elements());
  for (std::size_t e = 0; e < out.size(); ++e) {
    const Triangle& t = mesh.tris[e];
    const Vec2 e1 = mesh.coords[t[1]] - mesh.coords[t[0]];
    const Vec2 e2 = mesh.coords[t[2]] - mesh.coords[t[0]];
    const double det = cross(e1, e2);
    if (det == 0.0) throw Error(ErrorCode::DegenerateElement, "gradient on degenerate element " + std::to_string(e));
    const double d1 = field.values[t[1]] - field.values[t[0]];
    const double d2 = field.values[t[2]] - field.values[t[0]];
    // Solve J^T g = (d1, d2) with J = [e1 e2].
    out[e] = {(e2.y * d1 - e1.y * d2) / det, (e1.x * d2 - e2.x * d1) / det};
  }
  return out;
}

JumpStats edge_jump_stats(const Mesh& mesh, const fem::Field& field, int elem) {
  const Triangle& t = mesh.tris[elem];
  std::array<double, 3> g{};
  for (int k = 0; k < 3; ++k) {
    const int a = t[k], b = t[(k + 1) % 3];
    const double len = distance(mesh.coords[a], mesh.coords[b]);
    if (!(len > 0.0)) throw Error(ErrorCode::DegenerateElement, "zero-length edge in element " + std::to_string(elem));
    g[k] = std::abs(field.values[b] - field.values[a]) / len;
  }
  const double mean = (g[0] + g[1] + g[2]) / 3.0;
  double var = 0.0;
  for (double v : g) var += (v - mean) * (v - mean);
  return {std::max({g[0], g[1], g[2]}), std::sqrt(var / 3.0)};
}

namespace {

double align_from(Vec2 grad, const Orientation& o) {
  const double n = norm(grad);
  if (n == 0.0) return 0.0;
  return (grad.x * o.cos + grad.y * o.sin) / n;
}

}  // namespace

double alignment(const Mesh& mesh, const fem::Field& field, int elem) {
  const Triangle& t = mesh.tris[elem];
  const Vec2 e1 = mesh.coords[t[1]] - mesh.coords[t[0]];
  const Vec2 e2 = mesh.coords[t[2]] - mesh.coords[t[0]];
  const double det = cross(e1, e2);
  if (det == 0.0) return 0.0;
  const double d1 = field.values[t[1]] - field.values[t[0]];
  const double d2 = field.values[t[2]] - field.values[t[0]];
  const Vec2 grad{(e2.y * d1 - e1.y * d2) / det, (e1.x * d2 - e2.x * d1) / det};
  return align_from(grad, principal_orientation(mesh, elem));
}

Matrix task_features(const Mesh& mesh, const fem::ProblemInstance& instance) {
  const int ne = static_cast<int>(mesh.num_elements());
  Matrix m(ne, task_width(instance.kind));
  for (int e = 0; e < ne; ++e) {
    const Vec2 c = element_centroid(mesh, e);
    if (instance.kind == fem::ProblemKind::Poisson) {
      m(e, 0) = fem::gmm_load(instance, c);
    } else {
      m(e, 0) = distance(c, instance.heat.start);
      m(e, 1) = distance(c, instance.heat.end);
    }
  }
  return m;
}

Matrix element_features(const Mesh& mesh, const fem::Field& field, int step, double alpha, const Matrix& task_feats) {
  fem::check_field(mesh, field);
  const int ne = static_cast<int>(mesh.num_elements());
  if (task_feats.rows != ne) throw Error(ErrorCode::ShapeMismatch, "task feature rows != element count");
  const auto grads = gradient_per_element(mesh, field);
  Matrix m(ne, kElementBaseDim + task_feats.cols);
  for (int e = 0; e < ne; ++e) {
    const Triangle& t = mesh.tris[e];
    const double u0 = field.values[t[0]], u1 = field.values[t[1]], u2 = field.values[t[2]];
    const double mean = (u0 + u1 + u2) / 3.0;
    const double var = ((u0 - mean) * (u0 - mean) + (u1 - mean) * (u1 - mean) + (u2 - mean) * (u2 - mean)) / 3.0;
    const Orientation o = principal_orientation(mesh, e);
    const JumpStats jumps = edge_jump_stats(mesh, field, e);
    m(e, 0) = element_area(mesh, e);
    m(e, 1) = mean;
    m(e, 2) = std::sqrt(var);
    m(e, 3) = step;
    m(e, 4) = alpha;
    m(e, 5) = aspect_ratio(mesh, e);
    m(e, 6) = o.sin;
    m(e, 7) = o.cos;
    m(e, 8) = norm(grads[e]);
    m(e, 9) = jumps.max;
    m(e, 10) = jumps.std;
    m(e, 11) = align_from(grads[e], o);
    for (int k = 0; k < task_feats.cols; ++k) m(e, kElementBaseDim + k) = task_feats(e, k);
  }
  return m;
}

HypergraphState build_state(const Mesh& mesh, const fem::Field& field, int step, double alpha,
                            const fem::ProblemInstance& instance) {
  HypergraphState s;
  s.structure = build_structure(mesh);
  s.vertex_feats = vertex_features(mesh, field);
  s.elem_feats = element_features(mesh, field, step, alpha, task_features(mesh, instance));
  s.boundary = mesh.boundary;
  for (double v : s.vertex_feats.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite vertex feature");
  }
  for (double v : s.elem_feats.data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite element feature");
  }
  return s;
}

std::vector<std::string> vertex_feature_names() { return {"x", "y", "u", "interior", "edge", "corner"}; }

std::vector<std::string> element_feature_names(fem::ProblemKind kind) {
  std::vector<std::string> names{"area",   "u_mean", "u_std",     "step",     "alpha",   "aspect",
                                 "sin",    "cos",    "grad_norm", "jump_max", "jump_std", "align"};
  if (kind == fem::ProblemKind::Poisson) {
    names.push_back("load");
  } else {
    names.push_back("dist_start");
    names.push_back("dist_end");
  }
  return names;
}

void write_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& header) {
  for (std::size_t i = 0; i < header.size(); ++i) os << (i ? "," : "") << header[i];
  os << '\n';
  char buf[40];
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      std::snprintf(buf, sizeof buf, "%.17g", m(r, c));
      os << (c ? "," : "") << buf;
    }
    os << '\n';
  }
}

}  // namespace hrmesh::features
