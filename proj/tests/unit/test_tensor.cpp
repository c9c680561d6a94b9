#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "gradcheck.hpp"
#include "hrmesh/error.hpp"
#include "hrmesh/optim.hpp"
#include "hrmesh/tensor.hpp"
#include "random_graph.hpp"

using namespace hrmesh;
using namespace hrmesh::ad;
using Catch::Approx;

namespace {

// Forward-mode oracle: value and directional derivative.
struct Dual {
  double v, d;
};
Dual operator+(Dual a, Dual b) { return {a.v + b.v, a.d + b.d}; }
Dual operator*(Dual a, Dual b) { return {a.v * b.v, a.d * b.v + a.v * b.d}; }
Dual dtanh(Dual a) {
  const double t = std::tanh(a.v);
  return {t, (1 - t * t) * a.d};
}
Dual dexp(Dual a) { return {std::exp(a.v), std::exp(a.v) * a.d}; }
Dual dlog(Dual a) { return {std::log(a.v), a.d / a.v}; }

}  // namespace

TEST_CASE("basic op values") {
  const Tensor s = softmax_rows(Tensor::zeros(1, 4));
  for (double v : s.data()) CHECK(v == 0.25);

  const std::vector<int> seg{0, 0, 1};
  const Tensor m = segment_mean(Tensor::from(3, 1, {1, 3, 5}), seg, 2);
  CHECK(m.data() == std::vector<double>{2, 5});

  Tensor x = Tensor::scalar(3.0, true);
  square(x).backward();
  CHECK(x.grad()[0] == 6.0);

  const Tensor a = Tensor::from(2, 2, {1, 2, 3, 4});
  const Tensor b = Tensor::from(2, 1, {5, 6});
  CHECK(matmul(a, b).data() == std::vector<double>{17, 39});
  CHECK(concat_cols(a, b).data() == std::vector<double>{1, 2, 5, 3, 4, 6});
  CHECK(slice_cols(a, 1, 1).data() == std::vector<double>{2, 4});
  const std::vector<int> idx{1, 1, 0};
  CHECK(gather_rows(a, idx).data() == std::vector<double>{3, 4, 3, 4, 1, 2});
  CHECK(sum(a).item() == 10.0);
  CHECK(mean(a).item() == 2.5);
}

TEST_CASE("distribution closed forms") {
  const double half_log_2pi = 0.5 * std::log(2 * std::numbers::pi);
  const Tensor lp = gaussian_logprob(Tensor::from(1, 2, {0.3, -1}), Tensor::from(1, 2, {0.3, -1}), Tensor::zeros(1, 2));
  CHECK(lp.data()[0] == Approx(-half_log_2pi).epsilon(1e-15));
  CHECK(lp.data()[1] == Approx(-half_log_2pi).epsilon(1e-15));
  const Tensor lp2 = gaussian_logprob(Tensor::scalar(1.0), Tensor::scalar(0.0), Tensor::scalar(std::log(2.0)));
  CHECK(lp2.item() == Approx(-0.125 - std::log(2.0) - half_log_2pi));
  CHECK(gaussian_entropy(Tensor::scalar(0.0)).item() == Approx(0.5 * std::log(2 * std::numbers::pi * std::numbers::e)));

  CHECK(bernoulli_logprob(Tensor::scalar(1), Tensor::scalar(0)).item() == Approx(std::log(0.5)));
  CHECK(bernoulli_logprob(Tensor::scalar(0), Tensor::scalar(2)).item() == Approx(std::log(1 - 1 / (1 + std::exp(-2.0)))));
  CHECK(bernoulli_entropy(Tensor::scalar(0)).item() == Approx(std::log(2.0)));
  CHECK(bernoulli_logprob(Tensor::scalar(1), Tensor::scalar(-800)).item() == Approx(-800));

  CHECK_THROWS_AS(gaussian_logprob(Tensor::scalar(0), Tensor::scalar(0), Tensor::scalar(NAN)), Error);
}

TEST_CASE("shape mismatches throw") {
  const Tensor a = Tensor::zeros(2, 3), b = Tensor::zeros(3, 2);
  CHECK_THROWS_AS(add(a, b), Error);
  CHECK_THROWS_AS(matmul(a, a), Error);
  CHECK_THROWS_AS(add_row(a, Tensor::zeros(1, 2)), Error);
  const std::vector<int> bad{0, 5};
  CHECK_THROWS_AS(segment_sum(a, bad, 2), Error);
  CHECK_THROWS_AS(Tensor::from(2, 2, {1, 2, 3}), Error);
  CHECK_THROWS_AS(a.backward(), Error);
}

TEST_CASE("gradients match central differences on random graphs") {
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto g = test::random_graph(seed);
    const auto r = test::grad_check(g.leaves, g.loss);
    INFO("seed " << seed);
    CHECK(r.max_rel_error < 1e-4);
    checked += r.checked;
  }
  CHECK(checked > 500);
}

TEST_CASE("backward agrees with forward-mode duals") {
  // f(x, y) = sum_j tanh(x_j * y_j + exp(x_j)) * log(1 + y_j^2)
  const std::vector<double> xv{0.3, -0.7, 1.1}, yv{-0.4, 0.9, 0.2};
  Tensor x = Tensor::from(1, 3, xv, true), y = Tensor::from(1, 3, yv, true);
  const Tensor f = sum(mul(ad::tanh(add(mul(x, y), ad::exp(x))), ad::log(add_scalar(square(y), 1.0))));
  f.backward();
  for (int dir = 0; dir < 6; ++dir) {
    Dual total{0, 0};
    for (int j = 0; j < 3; ++j) {
      const Dual xj{xv[j], dir == j ? 1.0 : 0.0};
      const Dual yj{yv[j], dir == 3 + j ? 1.0 : 0.0};
      total = total + dtanh(xj * yj + dexp(xj)) * dlog(Dual{1, 0} + yj * yj);
    }
    CHECK(total.v == Approx(f.item()).epsilon(1e-14));
    const double analytic = dir < 3 ? x.grad()[dir] : y.grad()[dir - 3];
    CHECK(analytic == Approx(total.d).epsilon(1e-13));
  }
}

TEST_CASE("tape is freed and leaves accumulate") {
  Tensor w = Tensor::scalar(2.0, true);
  Tensor y = square(w);
  y.backward();
  CHECK(y.node()->parents.empty());
  square(w).backward();
  CHECK(w.grad()[0] == 8.0);
  {
    NoGradGuard guard;
    CHECK_FALSE(square(w).requires_grad());
  }
  CHECK(grad_enabled());
}

TEST_CASE("forward values are deterministic") {
  auto a = test::random_graph(42), b = test::random_graph(42);
  CHECK(a.loss().item() == b.loss().item());
}

TEST_CASE("adam matches the scalar recurrence") {
  AdamConfig cfg;
  cfg.lr = 0.1;
  cfg.grad_clip_norm = 0.0;
  ParamStore store;
  Tensor w = store.add("w", 1, 1, {1.0}, "g");
  double ow = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 5; ++t) {
    store.zero_grad();
    square(w).backward();
    store.adam_step(cfg);
    const double g = 2 * ow;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ow -= 0.1 * (m / (1 - std::pow(0.9, t))) / (std::sqrt(v / (1 - std::pow(0.999, t))) + 1e-8);
    CHECK(w.item() == Approx(ow).epsilon(1e-14));
  }
  // First step by hand: m̂ = 2, v̂ = 4, so w = 1 - 0.1 * 2 / (2 + 1e-8).
  ParamStore s2;
  Tensor w2 = s2.add("w", 1, 1, {1.0}, "g");
  square(w2).backward();
  s2.adam_step(cfg);
  CHECK(w2.item() == Approx(1.0 - 0.1 * 2.0 / (2.0 + 1e-8)).epsilon(1e-15));
}

TEST_CASE("adam clipping, zero gradients, freezing") {
  ParamStore store;
  Tensor a = store.add("a", 1, 2, {1.0, -1.0}, "policy");
  Tensor b = store.add("b", 1, 2, {0.5, 0.25}, "element");
  a.mutable_grad() = {std::sqrt(2.0), std::sqrt(2.0)};  // norm 2
  b.mutable_grad() = {0.0, 0.0};
  AdamConfig cfg;
  const AdamReport r = store.adam_step(cfg);
  CHECK(r.grad_norm == Approx(2.0));
  CHECK(r.clip_scale == Approx(0.25));
  CHECK(store.entries()[0].m[0] == Approx(0.1 * 0.25 * std::sqrt(2.0)));
  CHECK(b.data() == std::vector<double>{0.5, 0.25});

  const auto before = store.flatten("element");
  b.mutable_grad() = {1.0, -3.0};
  store.adam_step(cfg, {"element"});
  CHECK(store.flatten("element") == before);
  CHECK(store.entries()[1].steps == 1);

  a.mutable_grad() = {NAN, 0.0};
  const auto snapshot = store.flatten();
  CHECK_THROWS_AS(store.adam_step(cfg), Error);
  CHECK(store.flatten() == snapshot);
}

TEST_CASE("checkpoint round trip") {
  ParamStore store;
  std::mt19937_64 rng(1);
  Tensor w = store.add("w", 3, 2, glorot_uniform(3, 2, rng), "g");
  store.add("b", 1, 2, {0.1, 0.2}, "h");
  sum(square(w)).backward();
  store.adam_step(AdamConfig{});
  const auto path = (std::filesystem::temp_directory_path() / "hrmesh_ckpt_test.json").string();
  save_checkpoint(path, store, R"({"hidden":64})");

  ParamStore other;
  other.add("w", 3, 2, std::vector<double>(6, 0.0), "g");
  other.add("b", 1, 2, {0.0, 0.0}, "h");
  CHECK(load_checkpoint(path, other) == R"({"hidden":64})");
  CHECK(other.flatten() == store.flatten());
  CHECK(other.entries()[0].m == store.entries()[0].m);
  CHECK(other.entries()[0].v == store.entries()[0].v);
  CHECK(other.step() == 1);

  ParamStore wrong;
  wrong.add("w", 2, 3, std::vector<double>(6, 0.0), "g");
  CHECK_THROWS_AS(load_checkpoint(path, wrong), Error);
  std::filesystem::remove(path);
}
