#pragma once

#include <cstdint>
#include <vector>

#include "hrmesh/geometry.hpp"
#include "hrmesh/mesh.hpp"

namespace hrmesh {

// Simple polygon with counter-clockwise corners. Side k joins corner k and k+1.
struct Domain {
  std::vector<Vec2> corners;

  std::size_t num_sides() const { return corners.size(); }
  Vec2 side_start(std::size_t k) const { return corners[k]; }
  Vec2 side_end(std::size_t k) const { return corners[(k + 1) % corners.size()]; }
};

enum class DomainKind { LShape, UnitSquare, ConvexPolygon };

struct DomainSpec {
  DomainKind kind = DomainKind::UnitSquare;
  Vec2 p0{0.5, 0.5};        // L-shape notch corner
  std::uint64_t seed = 0;   // convex polygon shape

  static DomainSpec l_shape(Vec2 p0) { return {DomainKind::LShape, p0, 0}; }
  static DomainSpec unit_square() { return {DomainKind::UnitSquare, {}, 0}; }
  static DomainSpec convex_polygon(std::uint64_t seed) { return {DomainKind::ConvexPolygon, {}, seed}; }
};

// (0,1)^2 with [p0.x,1) x [p0.y,1) removed.
Domain make_l_shape(Vec2 p0);
Domain make_unit_square();
// Convex hull of 10 jittered points on a circle, rescaled into [0,1]^2.
Domain make_convex_polygon(std::uint64_t seed);
Domain make_domain(const DomainSpec& spec);

double signed_area(const Domain& domain);
// Inside or within tol of the boundary.
bool contains(const Domain& domain, Vec2 p, double tol = 1e-10);
double boundary_distance(const Domain& domain, Vec2 p);

// Tags Corner / Edge(side) / Interior with tolerance 1e-10 and installs one
// boundary component per polygon side.
Mesh classify_boundary(Mesh mesh, const Domain& domain);

// Coarse constrained Delaunay triangulation of the domain with roughly
// target_elements triangles. Deterministic in (spec, target_elements, seed).
Mesh generate_domain(const DomainSpec& spec, int target_elements, std::uint64_t seed);

}  // namespace hrmesh
