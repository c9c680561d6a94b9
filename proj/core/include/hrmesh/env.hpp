#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <random>
#include <span>
#include <vector>

#include "hrmesh/features.hpp"
#include "hrmesh/fem.hpp"
#include "hrmesh/mesh.hpp"
#include "hrmesh/policy.hpp"

namespace hrmesh::env {

struct EnvConfig {
  int horizon = 4;  // hr-steps; one relocation-only step follows
  int ref_depth = 6;
  double alpha_min = 7e-5;
  double alpha_max = 2e-2;
  double tangle_penalty = 1.5;
  double pagerank_beta = 0.5;
  int pagerank_iterations = 20;
  double gamma_h = 1.0;
  double gamma_r = 0.1;
  double lambda = 0.95;
};

// Everything about an instance that does not depend on the policy. Built once
// and shared read-only across episodes.
struct InstanceData {
  fem::ProblemInstance instance;
  Mesh initial_mesh;
  fem::Field initial_field;
  std::shared_ptr<const fem::Reference> ref;
  fem::ErrorIndicators initial_indicators;
  double initial_error_sq = 0.0;
  // Sum of max-norm indicators on the initial mesh; element rewards are scaled by it.
  double initial_total_error = 0.0;
};

Mesh initial_mesh(const fem::ProblemInstance& instance);
std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, int ref_depth);
// Same, starting from a given classified mesh instead of the generated one.
std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, Mesh mesh, int ref_depth);
// Same, with a reference built elsewhere (e.g. loaded from disk).
std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, Mesh mesh,
                                                     fem::Reference ref);

double sample_alpha(const EnvConfig& config, std::mt19937_64& rng);

struct Episode {
  std::shared_ptr<const InstanceData> data;
  EnvConfig config;
  double alpha = 0.0;
  int step_index = 0;
  Mesh mesh;
  fem::Field field;
  fem::ErrorIndicators indicators;  // only maintained while training

  int total_steps() const { return config.horizon + 1; }
  bool finished() const { return step_index >= total_steps(); }
  bool relocation_only() const { return step_index == config.horizon; }
  double error_rel() const;  // needs indicators
};

Episode start_episode(std::shared_ptr<const InstanceData> data, const EnvConfig& config, double alpha);

struct Transition {
  int step = 0;
  double alpha = 0.0;
  Mesh mesh;                          // pre-action mesh
  features::HypergraphState state;    // as fed to the policy
  features::Matrix raw_vertex_feats;  // unnormalised copies, kept when requested
  features::Matrix raw_elem_feats;
  policy::Action action;
  std::vector<double> vertex_logprob;
  std::vector<double> elem_logprob;
  std::vector<double> vertex_value;
  std::vector<double> elem_value;
  std::vector<double> vertex_reward;
  std::vector<double> elem_reward;
  double global_gain = 0.0;  // g: fractional drop of the total error from relocation
  RefinementMaps maps;
  bool tangled = false;
  bool refine_step = true;  // false on the relocation-only step; elements are inactive there
  bool random_flags = false;

  // Filled by compute_advantages.
  std::vector<double> vertex_return;
  std::vector<double> vertex_advantage;
  std::vector<double> elem_return;
  std::vector<double> elem_advantage;

  // Diagnostics after the step.
  int elements_after = 0;
  double error_rel_after = 0.0;
  double displacement = 0.0;
};

struct StepOptions {
  bool training = true;
  bool deterministic = false;
  bool random_flags = false;  // Phase I: element actions drawn from Bernoulli(flag_prob)
  double flag_prob = 0.25;
  bool keep_raw = false;
};

// One transition: solve state, act, relocate (rollback on tangling), refine on
// the moved mesh, solve, reward. Throws when the episode is already finished.
Transition step_hr(Episode& episode, const policy::PolicyParams& params, std::mt19937_64& rng,
                   const StepOptions& options);

// Area-weighted vertex error of each vertex.
std::vector<double> vertex_error(const Mesh& mesh, std::span<const double> eta2_sq);

// r <- (1 - beta) delta + beta D^-1 A r, starting from r = delta.
std::vector<double> pagerank_smooth(std::span<const double> delta, const features::Structure& adjacency,
                                    double beta, int iterations);

// Diffused error drop normalised by its max norm (zero vector stays zero).
std::vector<double> vertex_rewards(const Mesh& mesh_before, std::span<const double> eta2_sq_before,
                                   const Mesh& mesh_moved, std::span<const double> eta2_sq_moved,
                                   const features::Structure& adjacency, double beta, int iterations);

struct TanglingResult {
  bool rolled_back = false;
  std::vector<double> penalty;
};

TanglingResult tangling_penalty(const Mesh& mesh_moved, double penalty);

std::vector<double> element_rewards(std::span<const double> eta_inf_moved, std::span<const double> eta_inf_next,
                                    const RefinementMaps& maps, double alpha, double initial_total_error);

// Local lambda-returns along lineage, blended with the swarm mean (elements)
// or the global gain (vertices); advantages are blended return minus value.
void compute_advantages(std::span<Transition> episode, const EnvConfig& config);

// One JSON object per transition.
void write_episode_log(std::ostream& os, std::span<const Transition> episode);

struct InferenceResult {
  Mesh mesh;
  fem::Field field;
  int elements = 0;
  double error_rel = 0.0;
  double displacement = 0.0;
  int tangle_events = 0;
};

// Deterministic rollout without intermediate solves.
InferenceResult run_inference(std::shared_ptr<const InstanceData> data, const EnvConfig& config,
                              const policy::PolicyParams& params, double alpha);

}  // namespace hrmesh::env
