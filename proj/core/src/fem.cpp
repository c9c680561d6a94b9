#include "hrmesh/fem.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <string>

#include "hrmesh/error.hpp"

namespace hrmesh::fem {
namespace {

void require_untangled(const Mesh& mesh) {
  const auto bad = detect_tangled(mesh);
  if (!bad.empty()) {
    throw Error(ErrorCode::SingularSystem,
                "cannot assemble on a mesh with " + std::to_string(bad.size()) + " inverted element(s)");
  }
}

// Interior vertices are the unknowns; boundary vertices carry u = 0.
std::vector<int> dof_map(const Mesh& mesh, int& ndof) {
  std::vector<int> dof(mesh.num_vertices(), kNone);
  ndof = 0;
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (!mesh.is_boundary(static_cast<int>(v))) dof[v] = ndof++;
  }
  return dof;
}

// Reduced stiffness (scaled by k_scale) plus consistent mass (scaled by m_scale).
std::vector<Triplet> assemble(const Mesh& mesh, const std::vector<int>& dof, double k_scale, double m_scale) {
  std::vector<Triplet> entries;
  entries.reserve(mesh.num_elements() * 9);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const int elem = static_cast<int>(e);
    const auto k = element_stiffness(mesh, elem);
    const double area = element_area(mesh, elem);
    const Triangle& t = mesh.tris[e];
    for (int i = 0; i < 3; ++i) {
      const int di = dof[t[i]];
      if (di == kNone) continue;
      for (int j = 0; j < 3; ++j) {
        const int dj = dof[t[j]];
        if (dj == kNone) continue;
        const double mass = area / 12.0 * (i == j ? 2.0 : 1.0);
        entries.push_back({di, dj, k_scale * k[i][j] + m_scale * mass});
      }
    }
  }
  return entries;
}

std::vector<double> centroid_load(const Mesh& mesh, const std::vector<int>& dof, int ndof,
                                  const std::function<double(Vec2)>& f) {
  std::vector<double> rhs(ndof, 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const int elem = static_cast<int>(e);
    const double share = f(element_centroid(mesh, elem)) * element_area(mesh, elem) / 3.0;
    for (int v : mesh.tris[e]) {
      if (dof[v] != kNone) rhs[dof[v]] += share;
    }
  }
  return rhs;
}

std::vector<double> scatter(const Mesh& mesh, const std::vector<int>& dof, const std::vector<double>& x) {
  std::vector<double> values(mesh.num_vertices(), 0.0);
  for (std::size_t v = 0; v < values.size(); ++v) {
    if (dof[v] != kNone) values[v] = x[dof[v]];
  }
  return values;
}

void check_finite(const std::vector<double>& values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, "non-finite value in FEM solution");
  }
}

}  // namespace

std::string_view to_string(ProblemKind kind) { return kind == ProblemKind::Poisson ? "poisson" : "heat"; }

ProblemKind problem_kind_from_string(std::string_view name) {
  if (name == "poisson") return ProblemKind::Poisson;
  if (name == "heat") return ProblemKind::Heat;
  throw Error(ErrorCode::InvalidArgument, "unknown problem kind: " + std::string(name));
}

std::uint64_t mesh_fingerprint(const Mesh& mesh) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 1099511628211ull;
    }
  };
  const std::uint64_t nv = mesh.num_vertices(), ne = mesh.num_elements();
  mix(&nv, sizeof nv);
  mix(&ne, sizeof ne);
  if (!mesh.coords.empty()) mix(mesh.coords.data(), mesh.coords.size() * sizeof(Vec2));
  if (!mesh.tris.empty()) mix(mesh.tris.data(), mesh.tris.size() * sizeof(Triangle));
  return h == 0 ? 1 : h;
}

Field make_field(const Mesh& mesh, std::vector<double> values) {
  if (values.size() != mesh.num_vertices()) {
    throw Error(ErrorCode::ShapeMismatch, "field length " + std::to_string(values.size()) + " != vertex count " +
                                              std::to_string(mesh.num_vertices()));
  }
  return {std::move(values), mesh_fingerprint(mesh)};
}

void check_field(const Mesh& mesh, const Field& field) {
  if (field.values.size() != mesh.num_vertices()) {
    throw Error(ErrorCode::ShapeMismatch, "field length does not match mesh");
  }
  if (field.mesh_id != 0 && field.mesh_id != mesh_fingerprint(mesh)) {
    throw Error(ErrorCode::ShapeMismatch, "field belongs to a different mesh");
  }
}

double gmm_load(const ProblemInstance& instance, Vec2 p) {
  if (instance.kind != ProblemKind::Poisson) {
    throw Error(ErrorCode::WrongProblemKind, "gmm_load requires a Poisson instance");
  }
  double sum = 0.0;
  for (const GaussianComponent& g : instance.gmm) {
    const double det = g.cxx * g.cyy - g.cxy * g.cxy;
    const double dx = p.x - g.mean.x;
    const double dy = p.y - g.mean.y;
    // d^T Sigma^{-1} d with the closed-form 2x2 inverse.
    const double q = (g.cyy * dx * dx - 2.0 * g.cxy * dx * dy + g.cxx * dy * dy) / det;
    sum += g.weight * std::exp(-0.5 * q) / (2.0 * std::numbers::pi * std::sqrt(det));
  }
  return sum;
}

Vec2 heat_position(const HeatParams& heat, int step) {
  const double s = static_cast<double>(step) / heat.steps;
  return heat.start + s * (heat.end - heat.start);
}

double heat_source(const HeatParams& heat, Vec2 p, int step) {
  const Vec2 c = heat_position(heat, step);
  return heat.amplitude * std::exp(-heat.decay * (std::abs(p.x - c.x) + std::abs(p.y - c.y)));
}

std::array<std::array<double, 3>, 3> element_stiffness(const Mesh& mesh, int elem) {
  const Vec2 z[3] = {mesh.corner(elem, 0), mesh.corner(elem, 1), mesh.corner(elem, 2)};
  const double det = orient(z[0], z[1], z[2]);
  if (det == 0.0) throw Error(ErrorCode::DegenerateElement, "zero-area element " + std::to_string(elem));
  Vec2 grad[3];
  for (int i = 0; i < 3; ++i) {
    const Vec2 a = z[(i + 1) % 3];
    const Vec2 b = z[(i + 2) % 3];
    grad[i] = {(a.y - b.y) / det, (b.x - a.x) / det};
  }
  const double area = 0.5 * det;
  std::array<std::array<double, 3>, 3> k{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) k[i][j] = area * dot(grad[i], grad[j]);
  }
  return k;
}

Field solve_poisson(const Mesh& mesh, const std::function<double(Vec2)>& load, SolveStats* stats) {
  require_untangled(mesh);
  int ndof = 0;
  const auto dof = dof_map(mesh, ndof);
  if (ndof == 0) return make_field(mesh, std::vector<double>(mesh.num_vertices(), 0.0));
  const auto entries = assemble(mesh, dof, 1.0, 0.0);
  const SpdSolver solver(CsrMatrix::from_triplets(ndof, entries));
  const auto rhs = centroid_load(mesh, dof, ndof, load);
  auto values = scatter(mesh, dof, solver.solve(rhs, stats));
  check_finite(values);
  return make_field(mesh, std::move(values));
}

Field solve_poisson(const Mesh& mesh, const ProblemInstance& instance, SolveStats* stats) {
  if (instance.kind != ProblemKind::Poisson) {
    throw Error(ErrorCode::WrongProblemKind, "solve_poisson requires a Poisson instance");
  }
  return solve_poisson(mesh, [&](Vec2 p) { return gmm_load(instance, p); }, stats);
}

Field solve_heat(const Mesh& mesh, const ProblemInstance& instance, std::vector<Field>* history) {
  if (instance.kind != ProblemKind::Heat) {
    throw Error(ErrorCode::WrongProblemKind, "solve_heat requires a heat instance");
  }
  const HeatParams& heat = instance.heat;
  if (heat.steps < 1 || !(heat.dt > 0.0)) throw Error(ErrorCode::InvalidArgument, "invalid heat time stepping");
  require_untangled(mesh);
  int ndof = 0;
  const auto dof = dof_map(mesh, ndof);
  if (history) history->clear();
  if (ndof == 0) {
    Field zero = make_field(mesh, std::vector<double>(mesh.num_vertices(), 0.0));
    if (history) history->assign(heat.steps, zero);
    return zero;
  }
  const SpdSolver system(CsrMatrix::from_triplets(ndof, assemble(mesh, dof, heat.dt * heat.diffusivity, 1.0)));
  const CsrMatrix mass = CsrMatrix::from_triplets(ndof, assemble(mesh, dof, 0.0, 1.0));
  std::vector<double> u(ndof, 0.0), mu(ndof);
  for (int k = 1; k <= heat.steps; ++k) {
    auto rhs = centroid_load(mesh, dof, ndof, [&](Vec2 p) { return heat_source(heat, p, k); });
    mass.multiply(u, mu);
    for (int i = 0; i < ndof; ++i) rhs[i] = mu[i] + heat.dt * rhs[i];
    u = system.solve(rhs);
    if (history) history->push_back(make_field(mesh, scatter(mesh, dof, u)));
  }
  auto values = scatter(mesh, dof, u);
  check_finite(values);
  return make_field(mesh, std::move(values));
}

Field solve(const Mesh& mesh, const ProblemInstance& instance) {
  return instance.kind == ProblemKind::Poisson ? solve_poisson(mesh, instance) : solve_heat(mesh, instance);
}

PointLocator::PointLocator(const Mesh& mesh) : coords_(mesh.coords), tris_(mesh.tris) {
  const MeshTopology topo = build_topology(mesh);
  neighbors_.resize(tris_.size());
  for (std::size_t e = 0; e < tris_.size(); ++e) {
    for (int k = 0; k < 3; ++k) neighbors_[e][k] = topo.neighbor(static_cast<int>(e), (k + 1) % 3);
  }
}

std::array<double, 3> PointLocator::barycentric(int elem, Vec2 p) const {
  const Triangle& t = tris_[elem];
  const Vec2 a = coords_[t[0]], b = coords_[t[1]], c = coords_[t[2]];
  const double det = orient(a, b, c);
  return {orient(p, b, c) / det, orient(a, p, c) / det, orient(a, b, p) / det};
}

bool PointLocator::inside(int elem, Vec2 p) const {
  const auto l = barycentric(elem, p);
  return l[0] >= -kTolerance && l[1] >= -kTolerance && l[2] >= -kTolerance;
}

int PointLocator::locate_scan(Vec2 p) const {
  for (std::size_t e = 0; e < tris_.size(); ++e) {
    if (inside(static_cast<int>(e), p)) return static_cast<int>(e);
  }
  return kNone;
}

int PointLocator::locate(Vec2 p, int hint) const {
  if (tris_.empty()) return kNone;
  int cur = (hint >= 0 && static_cast<std::size_t>(hint) < tris_.size()) ? hint : 0;
  const std::size_t max_steps = tris_.size() + 3;
  for (std::size_t step = 0; step < max_steps; ++step) {
    const auto l = barycentric(cur, p);
    if (!(std::isfinite(l[0]) && std::isfinite(l[1]) && std::isfinite(l[2]))) break;
    if (l[0] >= -kTolerance && l[1] >= -kTolerance && l[2] >= -kTolerance) return cur;
    const int k = static_cast<int>(std::min_element(l.begin(), l.end()) - l.begin());
    const int next = neighbors_[cur][k];
    if (next == kNone) break;
    cur = next;
  }
  return locate_scan(p);
}

double evaluate(const Mesh& mesh, const Field& field, const PointLocator& locator, int elem, Vec2 p) {
  const auto l = locator.barycentric(elem, p);
  const Triangle& t = mesh.tris[elem];
  return l[0] * field.values[t[0]] + l[1] * field.values[t[1]] + l[2] * field.values[t[2]];
}

std::vector<double> interpolate_at(const Mesh& mesh, const Field& field, std::span<const Vec2> points) {
  check_field(mesh, field);
  const PointLocator locator(mesh);
  std::vector<double> out(points.size());
  int hint = kNone;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const int elem = locator.locate(points[i], hint);
    if (elem == kNone) {
      throw Error(ErrorCode::PointOutside, "point (" + std::to_string(points[i].x) + ", " +
                                               std::to_string(points[i].y) + ") is outside the mesh");
    }
    out[i] = evaluate(mesh, field, locator, elem, points[i]);
    hint = elem;
  }
  return out;
}

Reference make_reference(Mesh mesh, Field field) {
  check_field(mesh, field);
  const std::size_t ne = mesh.num_elements();
  std::vector<Vec2> centroids(ne);
  std::vector<double> areas(ne), values(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const int elem = static_cast<int>(e);
    const Triangle& t = mesh.tris[e];
    centroids[e] = element_centroid(mesh, elem);
    areas[e] = element_area(mesh, elem);
    values[e] = (field.values[t[0]] + field.values[t[1]] + field.values[t[2]]) / 3.0;
  }
  PointLocator locator(mesh);
  return {std::move(mesh), std::move(field), std::move(centroids), std::move(areas), std::move(values),
          std::move(locator)};
}

Reference build_reference(const Mesh& coarse, const ProblemInstance& instance, int depth) {
  Mesh fine = uniform_refine(coarse, depth);
  Field field = solve(fine, instance);
  return make_reference(std::move(fine), std::move(field));
}

ErrorIndicators compute_indicators(const Mesh& mesh, const Field& field, const Reference& ref) {
  check_field(mesh, field);
  const std::size_t ne = mesh.num_elements();
  const PointLocator locator(mesh);
  ErrorIndicators out;
  out.eta_inf.assign(ne, 0.0);
  out.eta2_sq.assign(ne, 0.0);
  std::vector<std::uint8_t> covered(ne, 0);
  int hint = kNone;
  for (std::size_t r = 0; r < ref.centroids.size(); ++r) {
    const Vec2 p = ref.centroids[r];
    const int elem = locator.locate(p, hint);
    if (elem == kNone) {
      throw Error(ErrorCode::PointOutside, "reference centroid " + std::to_string(r) + " is not covered by the mesh");
    }
    hint = elem;
    const double d = evaluate(mesh, field, locator, elem, p) - ref.centroid_values[r];
    const double w = ref.areas[r] * d * d;
    out.eta_inf[elem] = std::max(out.eta_inf[elem], std::abs(d));
    out.eta2_sq[elem] += w;
    out.total_sq += w;
    covered[elem] = 1;
  }
  int ref_hint = kNone;
  for (std::size_t e = 0; e < ne; ++e) {
    if (covered[e]) continue;
    const Vec2 c = element_centroid(mesh, static_cast<int>(e));
    const int r = ref.locator.locate(c, ref_hint);
    if (r == kNone) throw Error(ErrorCode::PointOutside, "element centroid outside the reference mesh");
    ref_hint = r;
    const Triangle& t = mesh.tris[e];
    const double u = (field.values[t[0]] + field.values[t[1]] + field.values[t[2]]) / 3.0;
    out.eta_inf[e] = std::abs(u - evaluate(ref.mesh, ref.field, ref.locator, r, c));
  }
  return out;
}

std::vector<double> eta_inf(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field) {
  return compute_indicators(mesh, field, make_reference(ref_mesh, ref_field)).eta_inf;
}

std::vector<double> eta_2_sq(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field) {
  return compute_indicators(mesh, field, make_reference(ref_mesh, ref_field)).eta2_sq;
}

double global_error_sq(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field) {
  return compute_indicators(mesh, field, make_reference(ref_mesh, ref_field)).total_sq;
}

double relative_error_sq(double error_sq, double initial_error_sq) {
  if (!(initial_error_sq > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial error is zero; relative error undefined");
  }
  return error_sq / initial_error_sq;
}

}  // namespace hrmesh::fem
