#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "hrmesh/error.hpp"
#include "hrmesh/sparse.hpp"

using namespace hrmesh::fem;

namespace {

// 1D Laplacian tridiag(-1, 2, -1) plus a diagonal shift.
CsrMatrix laplacian_1d(int n, double shift) {
  std::vector<Triplet> t;
  for (int i = 0; i < n; ++i) {
    t.push_back({i, i, 2.0 + shift});
    if (i > 0) t.push_back({i, i - 1, -1.0});
    if (i + 1 < n) t.push_back({i, i + 1, -1.0});
  }
  return CsrMatrix::from_triplets(n, t);
}

}  // namespace

TEST_CASE("duplicate triplets are summed") {
  const std::vector<Triplet> t{{0, 0, 1.0}, {0, 0, 2.0}, {1, 0, -1.0}, {0, 1, -1.0}, {1, 1, 4.0}};
  const CsrMatrix a = CsrMatrix::from_triplets(2, t);
  CHECK(a.at(0, 0) == 3.0);
  CHECK(a.at(1, 1) == 4.0);
  CHECK(a.at(0, 1) == -1.0);
  CHECK(a.nonzeros() == 4);
  CHECK(a.asymmetry() == 0.0);
  CHECK_THROWS_AS(CsrMatrix::from_triplets(2, std::vector<Triplet>{{2, 0, 1.0}}), hrmesh::Error);
}

TEST_CASE("pcg and dense paths agree") {
  for (int n : {10, 2500}) {
    const CsrMatrix a = laplacian_1d(n, 0.01);
    std::mt19937_64 rng(n);
    std::normal_distribution<double> g;
    std::vector<double> b(n);
    for (double& v : b) v = g(rng);
    SolveStats stats;
    const SpdSolver solver(a);
    const auto x = solver.solve(b, &stats);
    CHECK(stats.dense == (n < SpdSolver::kDenseThreshold));
    CHECK(relative_residual(a, x, b) < 1e-10);
    const auto y = pcg(a, b, 1e-13, 20 * n);
    for (int i = 0; i < n; ++i) CHECK(std::abs(x[i] - y[i]) < 1e-8 * (1.0 + std::abs(y[i])));
  }
}

TEST_CASE("zero right-hand side gives zero") {
  const CsrMatrix a = laplacian_1d(5, 0.0);
  const auto x = pcg(a, std::vector<double>(5, 0.0), 1e-12, 50);
  for (double v : x) CHECK(v == 0.0);
}

TEST_CASE("indefinite matrix is reported as singular") {
  const std::vector<Triplet> t{{0, 0, 1.0}, {1, 1, -1.0}};
  const CsrMatrix a = CsrMatrix::from_triplets(2, t);
  CHECK_THROWS_AS(SpdSolver(a), hrmesh::Error);
}
