#pragma once

#include <random>
#include <vector>

#include "hrmesh/domain.hpp"
#include "hrmesh/features.hpp"
#include "hrmesh/fem.hpp"
#include "hrmesh/policy.hpp"

namespace hrmesh::test {

// Right triangle with one edge vertex and one interior vertex: four elements
// covering all three boundary classes.
inline Mesh tiny_mesh() {
  Mesh m;
  m.coords = {{0, 0}, {1, 0}, {0, 1}, {0.5, 0}, {0.3, 0.3}};
  m.tris = {{0, 3, 4}, {3, 1, 4}, {1, 2, 4}, {2, 0, 4}};
  m.lineage.assign(4, kNone);
  m.vertex_origin.assign(5, kNone);
  return classify_boundary(m, Domain{{{0, 0}, {1, 0}, {0, 1}}});
}

// Features from a random nodal field on the mesh.
inline features::HypergraphState random_state(const Mesh& mesh, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> u(mesh.num_vertices());
  for (double& v : u) v = normal(rng);
  const fem::ProblemInstance inst = fem::sample_poisson_instance(seed, 16);
  const double alpha = std::exp(std::uniform_real_distribution<double>(std::log(7e-5), std::log(2e-2))(rng));
  return features::build_state(mesh, fem::make_field(mesh, u), static_cast<int>(seed % 4), alpha, inst);
}

// Scalar touching every policy output: fixed projections of all heads plus
// the log-densities and entropies of a fixed action.
struct PolicyProbe {
  std::vector<double> weights;
  policy::Action action;
};

inline PolicyProbe make_probe(const policy::PolicyParams& p, const features::HypergraphState& s, const Mesh& mesh,
                              std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  PolicyProbe probe;
  ad::NoGradGuard guard;
  const policy::PolicyOutput out = policy::forward(p, s, mesh);
  probe.action = policy::sample_actions(out, mesh, rng).action;
  std::normal_distribution<double> normal;
  probe.weights.resize(4 * mesh.num_vertices() + 2 * mesh.num_elements() + 4);
  for (double& w : probe.weights) w = normal(rng);
  return probe;
}

inline ad::Tensor probe_loss(const policy::PolicyParams& p, const features::HypergraphState& s, const Mesh& mesh,
                             const PolicyProbe& probe) {
  using namespace hrmesh::ad;
  const policy::PolicyOutput out = policy::forward(p, s, mesh);
  const int nv = static_cast<int>(mesh.num_vertices());
  const int ne = static_cast<int>(mesh.num_elements());
  std::size_t k = 0;
  auto take = [&](int rows, int cols) {
    std::vector<double> w(probe.weights.begin() + k, probe.weights.begin() + k + rows * cols);
    k += static_cast<std::size_t>(rows) * cols;
    return Tensor::from(rows, cols, std::move(w));
  };
  Tensor loss = sum(mul(out.vertex_mean, take(nv, 2)));
  loss = add(loss, sum(mul(out.vertex_log_std, take(nv, 2))));
  loss = add(loss, sum(mul(out.elem_logit, take(ne, 1))));
  loss = add(loss, sum(mul(out.elem_value, take(ne, 1))));
  const double c0 = probe.weights[k], c1 = probe.weights[k + 1], c2 = probe.weights[k + 2], c3 = probe.weights[k + 3];
  loss = add(loss, scale(sum(out.vertex_value), c0));
  loss = add(loss, scale(sum(policy::vertex_log_prob(out, mesh, probe.action.coords)), 1e-2 * c1));
  loss = add(loss, scale(sum(policy::elem_log_prob(out, probe.action.flags)), c2));
  loss = add(loss, scale(add(sum(policy::vertex_entropy(out, mesh)), sum(policy::elem_entropy(out))), c3));
  return loss;
}

inline std::vector<ad::Tensor> param_leaves(const policy::PolicyParams& p) {
  std::vector<ad::Tensor> out;
  for (const auto& e : p.store.entries()) out.push_back(e.param);
  return out;
}

}  // namespace hrmesh::test
