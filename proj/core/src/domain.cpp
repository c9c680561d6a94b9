#include "hrmesh/domain.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <string>

#include "hrmesh/error.hpp"

namespace hrmesh {
namespace {

constexpr double kBoundaryTol = 1e-10;

std::vector<Vec2> convex_hull(std::vector<Vec2> pts) {
  std::sort(pts.begin(), pts.end(), [](Vec2 a, Vec2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<Vec2> hull(2 * pts.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    while (k >= 2 && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && orient(hull[k - 2], hull[k - 1], pts[i]) <= 0.0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

// Circumcircle test: > 0 when d lies strictly inside circle(a, b, c), abc CCW.
double in_circle(Vec2 a, Vec2 b, Vec2 c, Vec2 d) {
  const double adx = a.x - d.x, ady = a.y - d.y;
  const double bdx = b.x - d.x, bdy = b.y - d.y;
  const double cdx = c.x - d.x, cdy = c.y - d.y;
  const double ad = adx * adx + ady * ady;
  const double bd = bdx * bdx + bdy * bdy;
  const double cd = cdx * cdx + cdy * cdy;
  return adx * (bdy * cd - bd * cdy) - ady * (bdx * cd - bd * cdx) + ad * (bdx * cdy - bdy * cdx);
}

// Points within eps of an edge count as inside, so rounding on subdivided
// sides cannot admit an ear that touches another boundary point.
bool in_closed_triangle(Vec2 p, Vec2 a, Vec2 b, Vec2 c, double eps) {
  return orient(a, b, p) >= -eps && orient(b, c, p) >= -eps && orient(c, a, p) >= -eps;
}

std::vector<Triangle> ear_clip(const std::vector<Vec2>& pts) {
  std::vector<int> ring(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) ring[i] = static_cast<int>(i);
  std::vector<Triangle> tris;
  double scale = 0.0;
  for (const Vec2& p : pts) scale = std::max({scale, std::abs(p.x), std::abs(p.y)});
  const double eps = 1e-14 * scale * scale;
  while (ring.size() > 3) {
    bool clipped = false;
    const std::size_t n = ring.size();
    for (std::size_t i = 0; i < n && !clipped; ++i) {
      const int ip = ring[(i + n - 1) % n];
      const int ic = ring[i];
      const int in = ring[(i + 1) % n];
      const Vec2 a = pts[ip], b = pts[ic], c = pts[in];
      if (orient(a, b, c) <= eps) continue;
      bool empty = true;
      for (int v : ring) {
        if (v == ip || v == ic || v == in) continue;
        if (in_closed_triangle(pts[v], a, b, c, eps)) {
          empty = false;
          break;
        }
      }
      if (!empty) continue;
      tris.push_back({ip, ic, in});
      ring.erase(ring.begin() + static_cast<std::ptrdiff_t>(i));
      clipped = true;
    }
    if (!clipped) throw Error(ErrorCode::InfeasibleGeometry, "ear clipping failed; polygon not simple");
  }
  tris.push_back({ring[0], ring[1], ring[2]});
  return tris;
}

// Lawson flips over interior edges until the triangulation is constrained Delaunay.
void legalize(const std::vector<Vec2>& pts, std::vector<Triangle>& tris) {
  for (int sweep = 0; sweep < 10000; ++sweep) {
    std::map<std::pair<int, int>, std::pair<int, int>> owner;  // directed edge -> (tri, local k)
    for (std::size_t t = 0; t < tris.size(); ++t) {
      for (int k = 0; k < 3; ++k) owner[{tris[t][k], tris[t][(k + 1) % 3]}] = {static_cast<int>(t), k};
    }
    bool flipped = false;
    for (std::size_t t = 0; t < tris.size() && !flipped; ++t) {
      for (int k = 0; k < 3 && !flipped; ++k) {
        const int a = tris[t][k], b = tris[t][(k + 1) % 3], c = tris[t][(k + 2) % 3];
        auto it = owner.find({b, a});
        if (it == owner.end()) continue;
        const auto [u, ku] = it->second;
        const int d = tris[u][(ku + 2) % 3];
        const Vec2 pa = pts[a], pb = pts[b], pc = pts[c], pd = pts[d];
        if (in_circle(pa, pb, pc, pd) <= 1e-14) continue;
        if (orient(pa, pd, pc) <= 0.0 || orient(pd, pb, pc) <= 0.0) continue;
        tris[t] = {a, d, c};
        tris[u] = {d, b, c};
        flipped = true;
      }
    }
    if (!flipped) return;
  }
}

}  // namespace

Domain make_unit_square() { return {{{0, 0}, {1, 0}, {1, 1}, {0, 1}}}; }

Domain make_l_shape(Vec2 p0) {
  if (!(p0.x > 0.0 && p0.x < 1.0 && p0.y > 0.0 && p0.y < 1.0)) {
    throw Error(ErrorCode::InfeasibleGeometry, "L-shape corner must lie in (0,1)^2");
  }
  return {{{0, 0}, {1, 0}, {1, p0.y}, {p0.x, p0.y}, {p0.x, 1}, {0, 1}}};
}

Domain make_convex_polygon(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> jitter(-0.2, 0.2);
  std::vector<Vec2> pts;
  for (int k = 0; k < 10; ++k) {
    const double phi = 2.0 * std::numbers::pi * k / 10.0;
    const double dx = jitter(rng);
    const double dy = jitter(rng);
    pts.push_back({0.5 + 0.4 * std::cos(phi) + dx, 0.5 + 0.4 * std::sin(phi) + dy});
  }
  std::vector<Vec2> hull = convex_hull(pts);
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const Vec2& p : hull) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double s = 1.0 / std::max(xmax - xmin, ymax - ymin);
  const double ox = 0.5 * (1.0 - s * (xmax - xmin));
  const double oy = 0.5 * (1.0 - s * (ymax - ymin));
  for (Vec2& p : hull) p = {ox + s * (p.x - xmin), oy + s * (p.y - ymin)};
  if (hull.size() < 3) throw Error(ErrorCode::InfeasibleGeometry, "degenerate convex hull");
  return {hull};
}

Domain make_domain(const DomainSpec& spec) {
  switch (spec.kind) {
    case DomainKind::LShape: return make_l_shape(spec.p0);
    case DomainKind::UnitSquare: return make_unit_square();
    case DomainKind::ConvexPolygon: return make_convex_polygon(spec.seed);
  }
  throw Error(ErrorCode::InvalidArgument, "unknown domain kind");
}

double signed_area(const Domain& domain) {
  double a = 0.0;
  for (std::size_t k = 0; k < domain.num_sides(); ++k) a += cross(domain.side_start(k), domain.side_end(k));
  return 0.5 * a;
}

double boundary_distance(const Domain& domain, Vec2 p) {
  double d = INFINITY;
  for (std::size_t k = 0; k < domain.num_sides(); ++k) {
    d = std::min(d, segment_distance(p, domain.side_start(k), domain.side_end(k)));
  }
  return d;
}

bool contains(const Domain& domain, Vec2 p, double tol) {
  if (boundary_distance(domain, p) <= tol) return true;
  // Crossing-number test.
  bool inside = false;
  for (std::size_t k = 0; k < domain.num_sides(); ++k) {
    const Vec2 a = domain.side_start(k);
    const Vec2 b = domain.side_end(k);
    if ((a.y > p.y) != (b.y > p.y)) {
      const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
      if (p.x < x) inside = !inside;
    }
  }
  return inside;
}

Mesh classify_boundary(Mesh mesh, const Domain& domain) {
  const std::size_t ns = domain.num_sides();
  mesh.components.clear();
  for (std::size_t k = 0; k < ns; ++k) {
    mesh.components.push_back({domain.side_start(k), normalized(domain.side_end(k) - domain.side_start(k))});
  }
  mesh.boundary.assign(mesh.num_vertices(), {});
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    const Vec2 p = mesh.coords[v];
    if (!contains(domain, p, kBoundaryTol)) {
      throw Error(ErrorCode::OffBoundary, "vertex " + std::to_string(v) + " lies outside the domain");
    }
    BoundaryTag tag;
    for (std::size_t k = 0; k < ns; ++k) {
      if (distance(p, domain.corners[k]) <= kBoundaryTol) {
        tag = {BoundaryClass::Corner, kNone};
        break;
      }
    }
    if (tag.kind == BoundaryClass::Interior) {
      for (std::size_t k = 0; k < ns; ++k) {
        if (segment_distance(p, domain.side_start(k), domain.side_end(k)) <= kBoundaryTol) {
          tag = {BoundaryClass::Edge, static_cast<int>(k)};
          break;
        }
      }
    }
    mesh.boundary[v] = tag;
  }
  if (mesh.lineage.size() != mesh.num_elements()) mesh.lineage.assign(mesh.num_elements(), kNone);
  if (mesh.vertex_origin.size() != mesh.num_vertices()) mesh.vertex_origin.assign(mesh.num_vertices(), kNone);
  return mesh;
}

Mesh generate_domain(const DomainSpec& spec, int target_elements, std::uint64_t seed) {
  if (target_elements < 1) throw Error(ErrorCode::InvalidArgument, "target element count must be positive");
  const Domain domain = make_domain(spec);
  const double area = signed_area(domain);
  if (!(area > 0.0)) throw Error(ErrorCode::InfeasibleGeometry, "domain must be counter-clockwise");

  // Edge length of an equilateral triangle at the requested density.
  const double h = std::sqrt(4.0 * area / (std::sqrt(3.0) * target_elements));

  std::vector<Vec2> pts;
  for (std::size_t k = 0; k < domain.num_sides(); ++k) {
    const Vec2 a = domain.side_start(k);
    const Vec2 b = domain.side_end(k);
    const int n = std::max(1, static_cast<int>(std::lround(distance(a, b) / h)));
    for (int i = 0; i < n; ++i) pts.push_back(a + (static_cast<double>(i) / n) * (b - a));
  }
  const std::size_t nb = pts.size();
  std::vector<Triangle> tris = ear_clip(pts);
  legalize(pts, tris);

  // Triangles = 2 * interior + boundary - 2 for a simply connected polygon.
  const int wanted = std::max(0, (target_elements - static_cast<int>(nb) + 3) / 2);
  std::mt19937_64 rng(seed);
  double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
  for (const Vec2& p : domain.corners) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  std::uniform_real_distribution<double> ux(xmin, xmax);
  std::uniform_real_distribution<double> uy(ymin, ymax);
  int placed = 0;
  for (int attempt = 0; attempt < 10000 && placed < wanted; ++attempt) {
    const Vec2 p{ux(rng), uy(rng)};
    if (!contains(domain, p, 0.0) || boundary_distance(domain, p) < 0.5 * h) continue;
    bool spaced = true;
    for (const Vec2& q : pts) {
      if (distance(p, q) < 0.7 * h) {
        spaced = false;
        break;
      }
    }
    if (!spaced) continue;
    // Locate and split the containing triangle.
    int host = -1;
    for (std::size_t t = 0; t < tris.size(); ++t) {
      const Vec2 a = pts[tris[t][0]], b = pts[tris[t][1]], c = pts[tris[t][2]];
      const double scale = orient(a, b, c);
      if (orient(a, b, p) > 1e-9 * scale && orient(b, c, p) > 1e-9 * scale && orient(c, a, p) > 1e-9 * scale) {
        host = static_cast<int>(t);
        break;
      }
    }
    if (host < 0) continue;
    const int id = static_cast<int>(pts.size());
    pts.push_back(p);
    const Triangle t = tris[host];
    tris[host] = {t[0], t[1], id};
    tris.push_back({t[1], t[2], id});
    tris.push_back({t[2], t[0], id});
    legalize(pts, tris);
    ++placed;
  }

  Mesh mesh;
  mesh.coords = std::move(pts);
  mesh.tris = std::move(tris);
  mesh = classify_boundary(std::move(mesh), domain);
  if (!detect_tangled(mesh).empty()) {
    throw Error(ErrorCode::InfeasibleGeometry, "generated mesh contains inverted elements");
  }
  return mesh;
}

}  // namespace hrmesh
