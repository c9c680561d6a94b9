#include <catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "hrmesh/baselines.hpp"
#include "hrmesh/domain.hpp"
#include "hrmesh/error.hpp"
#include "hrmesh/features.hpp"
#include "test_support.hpp"

using namespace hrmesh;
using namespace hrmesh::baselines;
using Catch::Approx;

namespace {

fem::Field field_of(const Mesh& m, double (*f)(Vec2)) {
  std::vector<double> v(m.num_vertices());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = f(m.coords[i]);
  return fem::make_field(m, v);
}

fem::ProblemInstance square_instance() {
  fem::ProblemInstance inst;
  inst.domain = DomainSpec::unit_square();
  fem::GaussianComponent g;
  g.mean = {0.7, 0.3};
  g.cxx = g.cyy = 5e-3;
  inst.gmm = {g};
  return inst;
}

}  // namespace

TEST_CASE("threshold marking") {
  const std::vector<double> eta{0.1, 0.5, 0.5, 0.2, 0.0};
  CHECK(threshold_mark(eta, 0.0) == std::vector<std::uint8_t>{1, 1, 1, 1, 1});
  CHECK(threshold_mark(eta, 1.0) == std::vector<std::uint8_t>{0, 1, 1, 0, 0});
  CHECK(threshold_mark(std::vector<double>(4, 0.0), 0.0) == std::vector<std::uint8_t>(4, 0));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x(40);
    for (double& v : x) v = u(rng);
    const double theta = u(rng);
    // Sort-based oracle: walk the indices in decreasing order until the cut.
    std::vector<int> order(x.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return x[a] > x[b]; });
    std::vector<std::uint8_t> expect(x.size(), 0);
    for (int k : order) {
      if (x[k] < theta * x[order[0]]) break;
      expect[k] = 1;
    }
    CHECK(threshold_mark(x, theta) == expect);
    std::vector<double> scaled = x;
    for (double& v : scaled) v *= 37.5;
    CHECK(threshold_mark(scaled, theta) == expect);
  }
}

TEST_CASE("zz estimator vanishes on linear fields and is homogeneous") {
  const Mesh m = uniform_refine(generate_domain(DomainSpec::l_shape({0.4, 0.6}), 30, 5), 1);
  for (double e : zz_estimate(m, field_of(m, [](Vec2 p) { return 2.0 * p.x - 0.5 * p.y + 3.0; }))) {
    CHECK(e < 1e-12);
  }
  const fem::Field q = field_of(m, [](Vec2 p) { return std::sin(3 * p.x) * p.y; });
  std::vector<double> scaled(q.values);
  for (double& v : scaled) v *= -2.5;
  const auto a = zz_estimate(m, q);
  const auto b = zz_estimate(m, fem::make_field(m, scaled));
  for (std::size_t k = 0; k < a.size(); ++k) CHECK(b[k] == Approx(2.5 * a[k]).epsilon(1e-12));
}

TEST_CASE("zz recovery matches a dense patch fit") {
  const Mesh m = uniform_refine(test::two_triangle_square(), 3);
  const fem::Field u = field_of(m, [](Vec2 p) { return p.x * p.x; });
  const auto grads = features::gradient_per_element(m, u);
  const auto recovered = recover_gradient(m, u);
  const features::Structure s = features::build_structure(m);
  int interior = 0;
  for (std::size_t v = 0; v < m.num_vertices(); ++v) {
    const auto patch = s.incident(static_cast<int>(v));
    if (patch.size() < 3) continue;
    const int n = static_cast<int>(patch.size());
    Eigen::MatrixXd a(n, 3);
    Eigen::MatrixXd b(n, 2);
    for (int i = 0; i < n; ++i) {
      const int e = patch[i];
      const double w = std::sqrt(element_area(m, e));
      const Vec2 c = element_centroid(m, e) - m.coords[v];
      a.row(i) << w, w * c.x, w * c.y;
      b.row(i) << w * grads[e].x, w * grads[e].y;
    }
    const Eigen::MatrixXd x = a.colPivHouseholderQr().solve(b);
    CHECK(recovered[v].x == Approx(x(0, 0)).epsilon(1e-10).margin(1e-12));
    CHECK(recovered[v].y == Approx(x(0, 1)).epsilon(1e-10).margin(1e-12));
    if (m.boundary[v].kind == BoundaryClass::Interior) {
      // Superconvergence: the interior recovered gradient of x^2 is exact at structured vertices.
      CHECK(recovered[v].x == Approx(2.0 * m.coords[v].x).margin(1e-10));
      ++interior;
    }
  }
  CHECK(interior > 0);
}

TEST_CASE("uniform and zz schedules") {
  const auto data = env::prepare_instance(square_instance(), test::two_triangle_square(), 3);
  HeuristicConfig c;
  c.kind = HeuristicKind::Uniform;
  c.steps = 2;
  const auto uni = run_heuristic(c, *data);
  CHECK(uni.elements == 32);
  CHECK(uni.trajectory.size() == 2);
  CHECK(uni.trajectory[1].error_rel <= uni.trajectory[0].error_rel);

  c.kind = HeuristicKind::Zz;
  c.initial_uniform_steps = 1;
  c.steps = 1;
  c.theta = 0.5;
  const auto zz = run_heuristic(c, *data);
  CHECK(zz.trajectory[0].elements_before == 8);
  CHECK(zz.elements >= 8);

  c.theta = 1.5;
  CHECK_THROWS_AS(run_heuristic(c, *data), Error);
}

TEST_CASE("oracle with theta one refines the argmax closure") {
  const auto data = env::prepare_instance(square_instance(), uniform_refine(test::two_triangle_square(), 1), 4);
  HeuristicConfig c;
  c.kind = HeuristicKind::Oracle;
  c.theta = 1.0;
  c.steps = 1;
  const auto res = run_heuristic(c, *data);
  const auto& eta = data->initial_indicators.eta_inf;
  const auto top = std::max_element(eta.begin(), eta.end()) - eta.begin();
  std::vector<std::uint8_t> flags(eta.size(), 0);
  flags[top] = 1;
  const Mesh expect = rgb_refine(data->initial_mesh, flags).mesh;
  CHECK(res.trajectory[0].refined == 1);
  CHECK(res.mesh.tris == expect.tris);
  CHECK(res.mesh.coords == expect.coords);

  const auto again = run_heuristic(c, *data);
  CHECK(again.error_rel == res.error_rel);

  std::ostringstream log;
  write_trajectory_log(log, res.trajectory);
  CHECK(log.str().find("\"elements\"") != std::string::npos);
}

TEST_CASE("heuristic names") {
  for (auto k : {HeuristicKind::Uniform, HeuristicKind::Oracle, HeuristicKind::Zz}) {
    CHECK(heuristic_kind_from_string(to_string(k)) == k);
  }
  CHECK_THROWS_AS(heuristic_kind_from_string("dorfler"), Error);
}
