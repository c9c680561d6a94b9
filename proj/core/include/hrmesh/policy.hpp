#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/features.hpp"
#include "hrmesh/mesh.hpp"
#include "hrmesh/optim.hpp"
#include "hrmesh/tensor.hpp"

namespace hrmesh::policy {

inline constexpr const char* kVertexGroup = "vertex";
inline constexpr const char* kElementGroup = "element";

struct PolicyConfig {
  int vertex_dim = features::kVertexDim;
  int elem_dim = features::kElementBaseDim + 1;
  int hidden = 64;
  int layers = 4;
  int head_hidden = 64;
  int attention_dim = 16;
  int stages = 4;
  int euler_steps = 2;
  double dtau = 0.1;
  // Cap on the mean's displacement as a fraction of the vertex's smallest
  // incident-element height; any value below 0.26 keeps every element
  // positively oriented. <= 0 disables the cap.
  double max_move_fraction = 0.25;
  // Log standard deviations are relative to the vertex's smallest incident
  // height; the bounds apply before that scaling.
  double log_std_min = -6.0;
  double log_std_max = 0.0;
  double log_std_init = -3.0;
  // Initial refinement probability 0.25.
  double elem_logit_init = -1.0986122886681098;
  std::uint64_t seed = 0;
};

std::string config_to_json(const PolicyConfig& config);
PolicyConfig config_from_json(const std::string& json);

struct HConvWeights {
  ad::Tensor w_ve;    // D x D
  ad::Tensor w_pool;  // 2D x D
  ad::Tensor w_ev;    // D x D
};

struct Backbone {
  ad::Tensor w_v;  // d_v x D
  ad::Tensor w_e;  // d_e x D
  std::vector<HConvWeights> layers;
};

// Pair score: <h_i W_q, h_j W_k> / sqrt(d) + h_j . w_dst + self_bias [i == j].
struct Scorer {
  ad::Tensor w_q;
  ad::Tensor w_k;
  ad::Tensor w_dst;
  ad::Tensor self_bias;  // 1 x 1
};

// Three dense layers, tanh after the first two.
struct Mlp {
  ad::Tensor w1, b1, w2, b2, w3, b3;
};

// Running per-column mean/variance (Welford) of vertex and element features.
// The alpha column is log-transformed before accumulation and normalisation.
class ObsNormalizer {
 public:
  static constexpr double kVarianceFloor = 1e-8;
  static constexpr double kClip = 10.0;
  static constexpr int kAlphaColumn = 4;

  ObsNormalizer() = default;
  ObsNormalizer(int vertex_dim, int elem_dim);

  void update(const features::HypergraphState& raw) { update(raw.vertex_feats, raw.elem_feats); }
  void update(const features::Matrix& vertex_feats, const features::Matrix& elem_feats);
  features::HypergraphState apply(features::HypergraphState raw) const;

  std::int64_t vertex_count() const { return vertex_.count; }
  std::int64_t elem_count() const { return elem_.count; }

  std::string to_json() const;
  static ObsNormalizer from_json(const std::string& text);

 private:
  struct Stats {
    std::int64_t count = 0;
    std::vector<double> mean;
    std::vector<double> m2;
  };
  static void accumulate(Stats& s, const features::Matrix& m, bool log_alpha);
  static void normalise(const Stats& s, features::Matrix& m, bool log_alpha);

  Stats vertex_;
  Stats elem_;
};

// Owns the parameters. Tensor handles below alias entries of `store`, so the
// struct is move-only; use clone() for an independent copy.
struct PolicyParams {
  PolicyConfig config;
  ObsNormalizer normalizer;
  ad::ParamStore store;
  Backbone vertex_backbone;
  Backbone elem_backbone;
  std::vector<Scorer> scorers;  // one per diffusion stage
  Mlp elem_policy, elem_value, vertex_cov, vertex_value;

  PolicyParams() = default;
  PolicyParams(PolicyParams&&) = default;
  PolicyParams& operator=(PolicyParams&&) = default;
  PolicyParams(const PolicyParams&) = delete;
  PolicyParams& operator=(const PolicyParams&) = delete;

  PolicyParams clone() const;
};

PolicyParams init_params(const PolicyConfig& config);

void save_policy(const std::string& path, const PolicyParams& params);
PolicyParams load_policy(const std::string& path);

// Hypergraph incidence as gather/segment index lists.
struct Incidence {
  int num_vertices = 0;
  int num_elements = 0;
  std::vector<int> elem_slot_vertex;  // 3 per element
  std::vector<int> elem_slot_elem;
  std::vector<int> vertex_slot_elem;  // one per incident element
  std::vector<int> vertex_slot_vertex;
};

Incidence make_incidence(const features::Structure& structure);

// Masked attention support: row `src` may attend to column `dst`.
// Interior vertices see all neighbours; edge vertices see boundary-edge
// neighbours on their own line; corners see only themselves. Self pairs come first per row.
struct AttentionPairs {
  std::vector<int> src;
  std::vector<int> dst;
  std::vector<double> is_self;
};

AttentionPairs attention_pairs(const Mesh& mesh, const features::Structure& structure);

struct HConvOut {
  ad::Tensor x;
  ad::Tensor e;
};

HConvOut hconv_layer(const HConvWeights& w, const ad::Tensor& x, const ad::Tensor& e, const Incidence& inc);

// Row-stochastic weights per pair (column vector aligned with pairs).
ad::Tensor attention_weights(const Scorer& s, const ad::Tensor& h, const AttentionPairs& pairs, int num_vertices);

// Z <- Z + dtau (A Z - Z), `steps` times with fixed weights.
ad::Tensor diffuse(const ad::Tensor& z, const ad::Tensor& weights, const AttentionPairs& pairs, double dtau,
                   int steps);

ad::Tensor diffformer(const PolicyParams& p, const ad::Tensor& coords, const ad::Tensor& h,
                      const AttentionPairs& pairs);

// Per-vertex displacement bound: fraction * min height over incident elements.
std::vector<double> displacement_caps(const Mesh& mesh, double fraction);

// z0 + c (z - z0) with c = min(1, cap / |z - z0|) per row. Rows that did not
// move are returned bitwise unchanged.
ad::Tensor cap_displacement(const ad::Tensor& z0, const ad::Tensor& z, std::span<const double> caps);

ad::Tensor mlp(const Mlp& m, const ad::Tensor& x);

struct PolicyOutput {
  ad::Tensor vertex_mean;     // N_v x 2
  ad::Tensor vertex_log_std;  // N_v x 2; interior uses both, edge column 0, corner none
  ad::Tensor elem_logit;      // N_e x 1
  ad::Tensor vertex_value;    // N_v x 1
  ad::Tensor elem_value;      // N_e x 1
};

ad::Tensor to_tensor(const features::Matrix& m);
ad::Tensor coords_tensor(const Mesh& mesh);

// Normalised copy of a raw state, as fed to forward().
features::HypergraphState prepare_state(const PolicyParams& p, const features::HypergraphState& raw);

// The state must have been built from `mesh` and passed through prepare_state.
PolicyOutput forward(const PolicyParams& p, const features::HypergraphState& state, const Mesh& mesh);

struct Action {
  std::vector<Vec2> coords;
  std::vector<std::uint8_t> flags;
};

struct Sample {
  Action action;
  std::vector<double> vertex_logprob;
  std::vector<double> elem_logprob;
};

// Per-agent log densities in the reduced coordinates (corner rows are 0).
ad::Tensor vertex_log_prob(const PolicyOutput& out, const Mesh& mesh, std::span<const Vec2> coords);
ad::Tensor elem_log_prob(const PolicyOutput& out, std::span<const std::uint8_t> flags);
ad::Tensor vertex_entropy(const PolicyOutput& out, const Mesh& mesh);
ad::Tensor elem_entropy(const PolicyOutput& out);

Sample sample_actions(const PolicyOutput& out, const Mesh& mesh, std::mt19937_64& rng);

// Mode of the policy: Diffformer mean and flags with sigmoid(logit) > 0.5.
Action mode_action(const PolicyOutput& out);
// Takes a raw state and normalises it.
Action inference_act(const PolicyParams& p, const features::HypergraphState& raw, const Mesh& mesh);

}  // namespace hrmesh::policy
