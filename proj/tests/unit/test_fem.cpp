#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <map>
#include <numbers>
#include <random>

#include "hrmesh/domain.hpp"
#include "hrmesh/error.hpp"
#include "hrmesh/fem.hpp"
#include "test_support.hpp"

using namespace hrmesh;
using namespace hrmesh::fem;
using Catch::Approx;

namespace {

constexpr double kPi = std::numbers::pi;

// Edge-midpoint rule, exact for quadratics.
double l2_error(const Mesh& m, const Field& u, double (*exact)(Vec2)) {
  double sum = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Triangle& t = m.tris[e];
    const double area = element_area(m, static_cast<int>(e));
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      const Vec2 p = midpoint(m.coords[a], m.coords[b]);
      const double d = 0.5 * (u.values[a] + u.values[b]) - exact(p);
      sum += area / 3.0 * d * d;
    }
  }
  return std::sqrt(sum);
}

double sine_bump(Vec2 p) { return std::sin(kPi * p.x) * std::sin(kPi * p.y); }

// Barycentric point location by scanning all elements in index order.
int scan_locate(const Mesh& m, Vec2 p, std::array<double, 3>& l) {
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Vec2 a = m.corner(static_cast<int>(e), 0), b = m.corner(static_cast<int>(e), 1),
               c = m.corner(static_cast<int>(e), 2);
    const double det = (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
    l[1] = ((p.x - a.x) * (c.y - a.y) - (p.y - a.y) * (c.x - a.x)) / det;
    l[2] = ((b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x)) / det;
    l[0] = 1.0 - l[1] - l[2];
    if (l[0] >= -1e-10 && l[1] >= -1e-10 && l[2] >= -1e-10) return static_cast<int>(e);
  }
  return kNone;
}

Field random_field(const Mesh& m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::vector<double> v(m.num_vertices());
  for (double& x : v) x = g(rng);
  return make_field(m, v);
}

}  // namespace

TEST_CASE("gmm load peak values") {
  ProblemInstance inst;
  inst.gmm = {{{0.3, 0.4}, 2e-3, 5e-4, 1e-3, 0.7}};
  const double det = 2e-3 * 1e-3 - 5e-4 * 5e-4;
  CHECK(gmm_load(inst, {0.3, 0.4}) == Approx(0.7 / (2 * kPi * std::sqrt(det))).epsilon(1e-14));
  CHECK(gmm_load(inst, {0.3 + 10 * std::sqrt(2e-3), 0.9}) < 1e-12);

  inst.gmm = {{{0.5, 0.5}, 1e-3, 0, 1e-3, 0.2}, {{0.5, 0.5}, 4e-4, 1e-4, 9e-4, 0.3}, {{0.5, 0.5}, 1e-4, 0, 1e-4, 0.5}};
  double expect = 0.0;
  for (const auto& g : inst.gmm) expect += g.weight / (2 * kPi * std::sqrt(g.cxx * g.cyy - g.cxy * g.cxy));
  CHECK(gmm_load(inst, {0.5, 0.5}) == Approx(expect).epsilon(1e-14));

  inst.kind = ProblemKind::Heat;
  CHECK_THROWS_AS(gmm_load(inst, {0.5, 0.5}), Error);
}

TEST_CASE("zero load gives zero solution") {
  const Mesh m = uniform_refine(test::two_triangle_square(), 3);
  const Field u = solve_poisson(m, [](Vec2) { return 0.0; });
  for (double v : u.values) CHECK(v == 0.0);
}

TEST_CASE("manufactured Poisson solution converges at second order") {
  Mesh m = uniform_refine(test::two_triangle_square(), 2);
  std::vector<double> errors;
  for (int level = 0; level < 4; ++level) {
    const Field u = solve_poisson(m, [](Vec2 p) { return 2 * kPi * kPi * sine_bump(p); });
    errors.push_back(l2_error(m, u, sine_bump));
    m = uniform_refine(m, 1);
  }
  for (std::size_t i = 1; i < errors.size(); ++i) {
    const double ratio = errors[i - 1] / errors[i];
    CHECK(ratio >= 3.5);
    CHECK(ratio <= 4.5);
  }
}

TEST_CASE("solution maximum sits near a corner load") {
  const Mesh m = uniform_refine(test::two_triangle_square(), 4);
  auto load = [](Vec2 p) { return std::exp(-200 * ((p.x - 0.2) * (p.x - 0.2) + (p.y - 0.2) * (p.y - 0.2))); };
  const Field coarse = solve_poisson(m, load);
  const Mesh fine = uniform_refine(m, 2);
  const Field fine_u = solve_poisson(fine, load);
  auto argmax = [](const Mesh& mesh, const Field& u) {
    std::size_t best = 0;
    for (std::size_t v = 0; v < u.size(); ++v) best = u.values[v] > u.values[best] ? v : best;
    return mesh.coords[best];
  };
  const Vec2 a = argmax(m, coarse), b = argmax(fine, fine_u);
  CHECK(a.x < 0.5);
  CHECK(a.y < 0.5);
  CHECK(distance(a, b) < 0.1);
}

TEST_CASE("stiffness matrix rows sum to zero and are symmetric") {
  const Mesh m = generate_domain(DomainSpec::l_shape({0.6, 0.4}), 30, 2);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const auto k = element_stiffness(m, static_cast<int>(e));
    for (int i = 0; i < 3; ++i) {
      CHECK(std::abs(k[i][0] + k[i][1] + k[i][2]) < 1e-12);
      for (int j = 0; j < 3; ++j) CHECK(k[i][j] == Approx(k[j][i]).epsilon(1e-14));
    }
  }
}

TEST_CASE("tangled mesh cannot be solved") {
  Mesh m = uniform_refine(test::two_triangle_square(), 1);
  std::swap(m.tris[0][0], m.tris[0][1]);
  try {
    solve_poisson(m, [](Vec2) { return 1.0; });
    FAIL("expected throw");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::SingularSystem);
  }
}

TEST_CASE("heat with zero amplitude stays zero") {
  ProblemInstance inst;
  inst.kind = ProblemKind::Heat;
  inst.heat.amplitude = 0.0;
  const Mesh m = uniform_refine(test::two_triangle_square(), 2);
  std::vector<Field> history;
  const Field u = solve_heat(m, inst, &history);
  CHECK(history.size() == 20);
  for (const Field& f : history) {
    for (double v : f.values) CHECK(v == 0.0);
  }
  for (double v : u.values) CHECK(v == 0.0);
}

TEST_CASE("stationary centred heat source gives a symmetric field") {
  ProblemInstance inst;
  inst.kind = ProblemKind::Heat;
  inst.heat.start = inst.heat.end = {0.5, 0.5};
  const Mesh m = uniform_refine(test::two_triangle_square(), 3);
  const Field u = solve_heat(m, inst);
  std::map<std::pair<double, double>, double> at;
  for (std::size_t v = 0; v < m.num_vertices(); ++v) at[{m.coords[v].x, m.coords[v].y}] = u.values[v];
  double peak = 0.0;
  for (double v : u.values) peak = std::max(peak, std::abs(v));
  REQUIRE(peak > 0.0);
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const double mirrored = at.at({m.coords[v].y, m.coords[v].x});
    CHECK(std::abs(u.values[v] - mirrored) <= 1e-12 * peak);
  }
}

TEST_CASE("heat solve matches a dense implicit Euler oracle") {
  const ProblemInstance inst = sample_heat_instance(4, 30);
  const Mesh m = uniform_refine(generate_domain(inst.domain, inst.target_elements, inst.mesh_seed), 1);
  const Field u = solve_heat(m, inst);

  const int n = static_cast<int>(m.num_vertices());
  Eigen::MatrixXd mass = Eigen::MatrixXd::Zero(n, n), stiff = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Triangle& t = m.tris[e];
    const Vec2 a = m.coords[t[0]], b = m.coords[t[1]], c = m.coords[t[2]];
    Eigen::Matrix<double, 2, 2> j;
    j << b.x - a.x, c.x - a.x, b.y - a.y, c.y - a.y;
    const double area = 0.5 * j.determinant();
    Eigen::Matrix<double, 2, 3> ref_grad;
    ref_grad << -1, 1, 0, -1, 0, 1;
    const Eigen::Matrix<double, 2, 3> grad = j.inverse().transpose() * ref_grad;
    for (int r = 0; r < 3; ++r) {
      for (int s = 0; s < 3; ++s) {
        stiff(t[r], t[s]) += area * grad.col(r).dot(grad.col(s));
        mass(t[r], t[s]) += area / 12.0 * (r == s ? 2.0 : 1.0);
      }
    }
  }
  std::vector<int> interior;
  for (int v = 0; v < n; ++v) {
    if (!m.is_boundary(v)) interior.push_back(v);
  }
  const int ni = static_cast<int>(interior.size());
  Eigen::MatrixXd mr(ni, ni), kr(ni, ni);
  for (int r = 0; r < ni; ++r) {
    for (int s = 0; s < ni; ++s) {
      mr(r, s) = mass(interior[r], interior[s]);
      kr(r, s) = stiff(interior[r], interior[s]);
    }
  }
  const Eigen::MatrixXd sys = mr + 0.5 * 1e-3 * kr;
  Eigen::VectorXd x = Eigen::VectorXd::Zero(ni);
  for (int k = 1; k <= 20; ++k) {
    const Vec2 pk = inst.heat.start + (k / 20.0) * (inst.heat.end - inst.heat.start);
    Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
    for (std::size_t e = 0; e < m.num_elements(); ++e) {
      const Vec2 c = element_centroid(m, static_cast<int>(e));
      const double val = 1000.0 * std::exp(-100.0 * (std::abs(c.x - pk.x) + std::abs(c.y - pk.y)));
      for (int v : m.tris[e]) f(v) += val * element_area(m, static_cast<int>(e)) / 3.0;
    }
    Eigen::VectorXd fr(ni);
    for (int r = 0; r < ni; ++r) fr(r) = f(interior[r]);
    x = sys.partialPivLu().solve(mr * x + 0.5 * fr);
  }
  double scale = x.cwiseAbs().maxCoeff();
  REQUIRE(scale > 0.0);
  for (int r = 0; r < ni; ++r) CHECK(std::abs(u.values[interior[r]] - x(r)) <= 1e-9 * std::max(1.0, scale));
}

TEST_CASE("interpolation reproduces linear fields") {
  const Mesh m = generate_domain(DomainSpec::l_shape({0.45, 0.7}), 30, 8);
  std::vector<double> v(m.num_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 3 * m.coords[i].x - 2 * m.coords[i].y + 7;
  const Field f = make_field(m, v);
  std::vector<Vec2> pts;
  for (std::size_t e = 0; e < m.num_elements(); ++e) pts.push_back(element_centroid(m, static_cast<int>(e)));
  const auto at = interpolate_at(m, f, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) CHECK(at[i] == Approx(3 * pts[i].x - 2 * pts[i].y + 7).epsilon(1e-13));
  const auto at_vertices = interpolate_at(m, f, m.coords);
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(at_vertices[i] == Approx(v[i]).epsilon(1e-13));
  CHECK_THROWS_AS(interpolate_at(m, f, std::vector<Vec2>{{0.9, 0.9}}), Error);
}

TEST_CASE("walking locator agrees with a brute-force scan") {
  const Mesh m = uniform_refine(generate_domain(DomainSpec::l_shape({0.3, 0.55}), 30, 4), 2);
  std::mt19937_64 rng(99);
  const Field f = random_field(m, rng);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Vec2> pts;
  while (pts.size() < 1000) {
    const Vec2 p{u(rng), u(rng)};
    if (p.x >= 0.3 && p.y >= 0.55) continue;
    pts.push_back(p);
  }
  const auto got = interpolate_at(m, f, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    std::array<double, 3> l{};
    const int e = scan_locate(m, pts[i], l);
    REQUIRE(e != kNone);
    const Triangle& t = m.tris[e];
    const double expect = l[0] * f.values[t[0]] + l[1] * f.values[t[1]] + l[2] * f.values[t[2]];
    CHECK(std::abs(got[i] - expect) < 1e-12);
  }
}

TEST_CASE("error indicators match nested-loop oracles") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 5; ++trial) {
    const Mesh coarse = generate_domain(DomainSpec::l_shape({0.5, 0.5}), 24, trial);
    // Move interior vertices a little so coarse and reference are not nested.
    Mesh moved = coarse;
    std::uniform_real_distribution<double> jitter(-0.01, 0.01);
    for (std::size_t v = 0; v < moved.num_vertices(); ++v) {
      if (!moved.is_boundary(static_cast<int>(v))) moved.coords[v] = moved.coords[v] + Vec2{jitter(rng), jitter(rng)};
    }
    REQUIRE(detect_tangled(moved).empty());
    const Mesh ref = uniform_refine(coarse, 2);
    const Field uf = random_field(moved, rng);
    const Field rf = random_field(ref, rng);

    std::vector<double> inf(moved.num_elements(), 0.0), sq(moved.num_elements(), 0.0);
    std::vector<int> hit(moved.num_elements(), 0);
    double total = 0.0;
    for (std::size_t r = 0; r < ref.num_elements(); ++r) {
      const Triangle& rt = ref.tris[r];
      const Vec2 p = element_centroid(ref, static_cast<int>(r));
      const double uref = (rf.values[rt[0]] + rf.values[rt[1]] + rf.values[rt[2]]) / 3.0;
      std::array<double, 3> l{};
      const int k = scan_locate(moved, p, l);
      REQUIRE(k != kNone);
      const Triangle& t = moved.tris[k];
      const double d = l[0] * uf.values[t[0]] + l[1] * uf.values[t[1]] + l[2] * uf.values[t[2]] - uref;
      inf[k] = std::max(inf[k], std::abs(d));
      sq[k] += element_area(ref, static_cast<int>(r)) * d * d;
      total += element_area(ref, static_cast<int>(r)) * d * d;
      hit[k] = 1;
    }
    const auto got_inf = eta_inf(moved, uf, ref, rf);
    const auto got_sq = eta_2_sq(moved, uf, ref, rf);
    for (std::size_t e = 0; e < moved.num_elements(); ++e) {
      REQUIRE(hit[e]);
      CHECK(std::abs(got_inf[e] - inf[e]) <= 1e-12 * (1 + inf[e]));
      CHECK(std::abs(got_sq[e] - sq[e]) <= 1e-12 * (1 + sq[e]));
    }
    CHECK(std::abs(global_error_sq(moved, uf, ref, rf) - total) <= 1e-12 * total);
  }
}

TEST_CASE("indicators vanish on the reference itself") {
  std::mt19937_64 rng(1);
  const Mesh ref = uniform_refine(test::two_triangle_square(), 3);
  const Field rf = random_field(ref, rng);
  // Zero up to barycentric rounding at the centroids.
  for (double v : eta_inf(ref, rf, ref, rf)) CHECK(v < 1e-14);
  CHECK(global_error_sq(ref, rf, ref, rf) < 1e-28);

  // Same mesh, different field: centroid differences per element.
  const Field other = random_field(ref, rng);
  const auto inf = eta_inf(ref, other, ref, rf);
  for (std::size_t e = 0; e < ref.num_elements(); ++e) {
    const Triangle& t = ref.tris[e];
    double d = 0.0;
    for (int v : t) d += other.values[v] - rf.values[v];
    CHECK(inf[e] == Approx(std::abs(d / 3.0)).margin(1e-14));
  }
}

TEST_CASE("global error is the sum of element indicators and never grows under uniform refinement") {
  const Mesh coarse = uniform_refine(test::two_triangle_square(), 1);
  auto load = [](Vec2 p) { return 2 * kPi * kPi * sine_bump(p); };
  const Mesh ref_mesh = uniform_refine(coarse, 5);
  const Reference ref = make_reference(ref_mesh, solve_poisson(ref_mesh, load));
  double previous = INFINITY;
  for (int level = 0; level < 4; ++level) {
    const Mesh m = uniform_refine(coarse, level);
    const ErrorIndicators ind = compute_indicators(m, solve_poisson(m, load), ref);
    double sum = 0.0;
    for (double v : ind.eta2_sq) sum += v;
    CHECK(sum == Approx(ind.total_sq).epsilon(1e-12));
    CHECK(ind.total_sq <= previous * 1.01);
    previous = ind.total_sq;
  }
  CHECK(relative_error_sq(2.0, 2.0) == 1.0);
  CHECK_THROWS_AS(relative_error_sq(1.0, 0.0), Error);
}

TEST_CASE("fine elements without reference centroids fall back to their own centroid") {
  const Mesh coarse = test::two_triangle_square();
  const Mesh ref_mesh = uniform_refine(coarse, 1);
  std::vector<double> rv(ref_mesh.num_vertices());
  for (std::size_t v = 0; v < rv.size(); ++v) rv[v] = ref_mesh.coords[v].x * ref_mesh.coords[v].x;
  const Reference ref = make_reference(ref_mesh, make_field(ref_mesh, rv));
  const Mesh fine = uniform_refine(coarse, 2);
  const Field zero = make_field(fine, std::vector<double>(fine.num_vertices(), 0.0));
  const ErrorIndicators ind = compute_indicators(fine, zero, ref);
  const PointLocator loc(ref_mesh);
  int fallback = 0;
  for (std::size_t e = 0; e < fine.num_elements(); ++e) {
    const Vec2 c = element_centroid(fine, static_cast<int>(e));
    if (ind.eta2_sq[e] > 0.0) continue;
    ++fallback;
    const int r = loc.locate_scan(c);
    CHECK(ind.eta_inf[e] == Approx(std::abs(evaluate(ref_mesh, ref.field, loc, r, c))).margin(1e-15));
  }
  CHECK(fallback == 24);
}

TEST_CASE("field fingerprint guards against mixing meshes") {
  const Mesh a = test::two_triangle_square();
  const Mesh b = uniform_refine(a, 1);
  const Field f = make_field(a, {0, 0, 0, 0});
  CHECK_THROWS_AS(check_field(b, f), Error);
  Mesh moved = a;
  moved.coords[0].x = 1e-3;
  CHECK(mesh_fingerprint(moved) != mesh_fingerprint(a));
}

TEST_CASE("instance sampling and JSON round trip") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const ProblemInstance p = sample_poisson_instance(seed, 30);
    const Domain d = make_domain(p.domain);
    REQUIRE(p.gmm.size() == 3);
    double wsum = 0.0;
    for (const auto& g : p.gmm) {
      CHECK(contains(d, g.mean, 0.0));
      CHECK(g.cxx * g.cyy - g.cxy * g.cxy > 0.0);
      CHECK(g.weight > 0.0);
      wsum += g.weight;
    }
    CHECK(wsum == Approx(1.0).epsilon(1e-14));
    CHECK(p.domain.p0.x >= 0.2);
    CHECK(p.domain.p0.x <= 0.95);
    const ProblemInstance back = instance_from_json(instance_to_json(p));
    CHECK(instance_to_json(back) == instance_to_json(p));
    CHECK(back.gmm[1].cxy == p.gmm[1].cxy);

    const ProblemInstance h = sample_heat_instance(seed, 30);
    CHECK(contains(make_domain(h.domain), h.heat.start, 0.0));
    CHECK(contains(make_domain(h.domain), h.heat.end, 0.0));
  }
  CHECK_THROWS_AS(instance_from_json("{\"kind\": 3}"), Error);
}
