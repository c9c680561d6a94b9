#include <catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>
#include <set>

#include "hrmesh/domain.hpp"
#include "hrmesh/features.hpp"
#include "test_support.hpp"

using namespace hrmesh;
using namespace hrmesh::features;
using Catch::Approx;

namespace {

fem::Field field_of(const Mesh& m, double (*f)(Vec2)) {
  std::vector<double> v(m.num_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(m.coords[i]);
  return fem::make_field(m, v);
}

Mesh sample_mesh(int seed) { return uniform_refine(generate_domain(DomainSpec::l_shape({0.55, 0.45}), 24, seed), 1); }

}  // namespace

TEST_CASE("structure of a single triangle") {
  const Structure s = build_structure(test::single_triangle());
  CHECK(s.num_vertices == 3);
  CHECK(s.num_elements == 1);
  for (int v = 0; v < 3; ++v) {
    CHECK(s.vertex_deg[v] == 1.0);
    CHECK(s.neighbors(v).size() == 2);
    CHECK(s.incident(v).size() == 1);
  }
  CHECK(s.elem_deg == std::vector<double>{3.0});
}

TEST_CASE("shared vertices have degree two") {
  const Structure s = build_structure(test::two_triangle_square());
  CHECK(s.vertex_deg == std::vector<double>{2, 1, 2, 1});
}

TEST_CASE("adjacency matches pairwise element scan") {
  const Mesh m = sample_mesh(3);
  const Structure s = build_structure(m);
  std::vector<std::set<int>> oracle(m.num_vertices());
  for (const Triangle& t : m.tris) {
    for (int a : t) {
      for (int b : t) {
        if (a != b) oracle[a].insert(b);
      }
    }
  }
  std::size_t total_incidence = 0;
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const auto n = s.neighbors(static_cast<int>(v));
    CHECK(std::vector<int>(n.begin(), n.end()) == std::vector<int>(oracle[v].begin(), oracle[v].end()));
    CHECK(s.vertex_deg[v] >= 1.0);
    for (int w : n) {
      const auto back = s.neighbors(w);
      CHECK(std::find(back.begin(), back.end(), static_cast<int>(v)) != back.end());
    }
    total_incidence += s.incident(static_cast<int>(v)).size();
  }
  CHECK(total_incidence == 3 * m.num_elements());
  CHECK(build_structure(uniform_refine(m, 1)).num_elements == 4 * s.num_elements);
}

TEST_CASE("vertex features") {
  Mesh m = sample_mesh(1);
  const fem::Field zero = fem::make_field(m, std::vector<double>(m.num_vertices(), 0.0));
  const Matrix f = vertex_features(m, zero);
  CHECK(f.cols == 6);
  for (int v = 0; v < f.rows; ++v) {
    CHECK(f(v, 2) == 0.0);
    CHECK(f(v, 3) + f(v, 4) + f(v, 5) == 1.0);
    if (m.boundary[v].kind == BoundaryClass::Corner) {
      CHECK(f(v, 3) == 0.0);
      CHECK(f(v, 5) == 1.0);
    }
  }
  Mesh shifted = m;
  for (Vec2& p : shifted.coords) p = p + Vec2{0.25, -1.0};
  const Matrix g = vertex_features(shifted, fem::make_field(shifted, zero.values));
  for (int v = 0; v < f.rows; ++v) {
    CHECK(g(v, 0) == Approx(f(v, 0) + 0.25));
    CHECK(g(v, 1) == Approx(f(v, 1) - 1.0));
    for (int c = 2; c < 6; ++c) CHECK(g(v, c) == f(v, c));
  }
}

TEST_CASE("gradients") {
  const Mesh m = sample_mesh(2);
  for (const Vec2 g : gradient_per_element(m, field_of(m, [](Vec2 p) { return 3 * p.x - 2 * p.y + 7; }))) {
    CHECK(g.x == Approx(3.0).epsilon(1e-12));
    CHECK(g.y == Approx(-2.0).epsilon(1e-12));
  }
  for (const Vec2 g : gradient_per_element(m, field_of(m, [](Vec2) { return 4.25; })))
    CHECK((g.x == 0.0 && g.y == 0.0));

  std::mt19937_64 rng(7);
  std::normal_distribution<double> n;
  std::vector<double> vals(m.num_vertices());
  for (double& v : vals) v = n(rng);
  const fem::Field f = fem::make_field(m, vals);
  const auto grads = gradient_per_element(m, f);
  const double h = 1e-6;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Vec2 c = element_centroid(m, static_cast<int>(e));
    const std::vector<Vec2> probes{c + Vec2{h, 0}, c - Vec2{h, 0}, c + Vec2{0, h}, c - Vec2{0, h}};
    const auto at = fem::interpolate_at(m, f, probes);
    CHECK(std::abs((at[0] - at[1]) / (2 * h) - grads[e].x) < 1e-8 * (1 + std::abs(grads[e].x)) + 1e-7);
    CHECK(std::abs((at[2] - at[3]) / (2 * h) - grads[e].y) < 1e-8 * (1 + std::abs(grads[e].y)) + 1e-7);
  }
}

TEST_CASE("edge jump statistics") {
  const Mesh tri = test::single_triangle();
  const fem::Field ux = fem::make_field(tri, {0.0, 1.0, 0.0});
  const JumpStats s = edge_jump_stats(tri, ux, 0);
  const double g[3] = {1.0, 1.0 / std::sqrt(2.0), 0.0};
  const double mean = (g[0] + g[1] + g[2]) / 3.0;
  const double sd = std::sqrt(((g[0] - mean) * (g[0] - mean) + (g[1] - mean) * (g[1] - mean) + mean * mean) / 3.0);
  CHECK(s.max == Approx(1.0));
  CHECK(s.std == Approx(sd).epsilon(1e-14));

  const fem::Field c = fem::make_field(tri, {2.0, 2.0, 2.0});
  CHECK(edge_jump_stats(tri, c, 0).max == 0.0);
  CHECK(edge_jump_stats(tri, c, 0).std == 0.0);

  const fem::Field scaled = fem::make_field(tri, {0.0, -3.0, 0.0});
  CHECK(edge_jump_stats(tri, scaled, 0).max == Approx(3 * s.max));
  CHECK(edge_jump_stats(tri, scaled, 0).std == Approx(3 * s.std));
}

TEST_CASE("alignment") {
  const Mesh stretched = test::single_triangle({0, 0}, {2, 0}, {0, 1});
  CHECK(std::abs(alignment(stretched, fem::make_field(stretched, {0, 2, 0}), 0)) == Approx(1.0));
  CHECK(alignment(stretched, fem::make_field(stretched, {0, 0, 1}), 0) == Approx(0.0).margin(1e-12));
  CHECK(alignment(stretched, fem::make_field(stretched, {5, 5, 5}), 0) == 0.0);
}

TEST_CASE("element features on constant and linear fields") {
  const Mesh m = sample_mesh(4);
  fem::ProblemInstance inst = fem::sample_poisson_instance(3, 24);
  const Matrix task = task_features(m, inst);
  const Matrix c = element_features(m, field_of(m, [](Vec2) { return 1.5; }), 2, 1e-3, task);
  CHECK(c.cols == 13);
  for (int e = 0; e < c.rows; ++e) {
    CHECK(c(e, 0) == Approx(element_area(m, e)));
    CHECK(c(e, 1) == 1.5);
    CHECK(c(e, 2) == 0.0);
    CHECK(c(e, 3) == 2.0);
    CHECK(c(e, 4) == 1e-3);
    CHECK(c(e, 5) >= 1.0);
    CHECK(c(e, 6) * c(e, 6) + c(e, 7) * c(e, 7) == Approx(1.0));
    CHECK(c(e, 8) == 0.0);
    CHECK(c(e, 9) == 0.0);
    CHECK(c(e, 10) == 0.0);
    CHECK(c(e, 11) == 0.0);
    CHECK(c(e, 12) == fem::gmm_load(inst, element_centroid(m, e)));
  }
  const Matrix l = element_features(m, field_of(m, [](Vec2 p) { return p.x; }), 0, 0.0, task);
  for (int e = 0; e < l.rows; ++e) {
    CHECK(l(e, 8) == Approx(1.0).epsilon(1e-12));
    // Per-edge jumps |dx| / length, recomputed directly.
    double jmax = 0.0;
    for (int k = 0; k < 3; ++k) {
      const Vec2 a = m.corner(e, k), b = m.corner(e, (k + 1) % 3);
      jmax = std::max(jmax, std::abs(b.x - a.x) / distance(a, b));
    }
    CHECK(l(e, 9) == Approx(jmax).epsilon(1e-14));
  }
}

TEST_CASE("heat task features and state build") {
  const fem::ProblemInstance inst = fem::sample_heat_instance(2, 24);
  const Mesh m = generate_domain(inst.domain, 24, 2);
  const fem::Field u = fem::solve(m, inst);
  const HypergraphState s = build_state(m, u, 1, 5e-3, inst);
  CHECK(s.elem_feats.cols == element_dim(fem::ProblemKind::Heat));
  CHECK(s.elem_feats.cols == 14);
  CHECK(s.vertex_feats.rows == static_cast<int>(m.num_vertices()));
  for (int e = 0; e < s.elem_feats.rows; ++e) {
    CHECK(s.elem_feats(e, 12) == Approx(distance(element_centroid(m, e), inst.heat.start)));
  }
}

TEST_CASE("features are permutation equivariant") {
  const Mesh m = sample_mesh(5);
  const fem::ProblemInstance inst = fem::sample_poisson_instance(1, 24);
  std::mt19937_64 rng(3);
  std::vector<double> vals(m.num_vertices());
  std::normal_distribution<double> n;
  for (double& v : vals) v = n(rng);

  std::vector<int> vperm(m.num_vertices()), eperm(m.num_elements());
  std::iota(vperm.begin(), vperm.end(), 0);
  std::iota(eperm.begin(), eperm.end(), 0);
  std::shuffle(vperm.begin(), vperm.end(), rng);
  std::shuffle(eperm.begin(), eperm.end(), rng);
  // new vertex vperm[v] holds old vertex v; new element eperm[e] holds old element e.
  Mesh p = m;
  std::vector<double> pvals(vals.size());
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    p.coords[vperm[v]] = m.coords[v];
    p.boundary[vperm[v]] = m.boundary[v];
    pvals[vperm[v]] = vals[v];
  }
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (int k = 0; k < 3; ++k) p.tris[eperm[e]][k] = vperm[m.tris[e][k]];
  }
  const HypergraphState a = build_state(m, fem::make_field(m, vals), 1, 0.01, inst);
  const HypergraphState b = build_state(p, fem::make_field(p, pvals), 1, 0.01, inst);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    for (int c = 0; c < a.vertex_feats.cols; ++c) CHECK(a.vertex_feats(v, c) == b.vertex_feats(vperm[v], c));
  }
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    for (int c = 0; c < a.elem_feats.cols; ++c) CHECK(a.elem_feats(e, c) == b.elem_feats(eperm[e], c));
  }
}
