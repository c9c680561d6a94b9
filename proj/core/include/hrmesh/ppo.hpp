#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/env.hpp"
#include "hrmesh/optim.hpp"
#include "hrmesh/policy.hpp"

namespace hrmesh::ppo {

struct TrainConfig {
  int iterations = 400;
  int transitions_per_iter = 256;
  int epochs = 5;
  int minibatch = 32;
  double clip = 0.2;
  double value_coef_vertex = 0.5;
  double value_coef_elem = 0.5;
  double entropy_vertex = 1e-3;
  double entropy_elem = 1e-3;
  double lr = 3e-4;
  double grad_clip = 0.5;
  int phase1_iters = 150;
  double random_flag_prob = 0.25;
  int checkpoint_every = 10;
  int threads = 1;
  std::uint64_t seed = 0;
  env::EnvConfig env;
};

void validate(const TrainConfig& config);

// Standardises with the current statistics; accumulates first when update is set.
features::HypergraphState normalize_obs(policy::ObsNormalizer& normalizer, const features::HypergraphState& raw,
                                        bool update);

// Rescales advantages of each swarm to zero mean and unit deviation across
// the buffer. Inactive element swarms (relocation-only or random flags) are skipped.
void normalize_advantages(std::span<env::Transition> buffer);

struct LossTerms {
  ad::Tensor total;
  double policy_vertex = 0.0;
  double value_vertex = 0.0;
  double entropy_vertex = 0.0;
  double policy_elem = 0.0;
  double value_elem = 0.0;
  double entropy_elem = 0.0;
  double clip_fraction = 0.0;
  int vertex_agents = 0;
  int elem_agents = 0;
};

// Swarm-averaged clipped PPO loss over a minibatch of transitions. Element
// terms are dropped when train_elements is false or a transition's element
// swarm was inactive. Throws NonFinite for a non-finite loss.
LossTerms ppo_loss(std::span<const env::Transition* const> batch, const policy::PolicyParams& params,
                   const TrainConfig& config, bool train_elements);

struct IterationMetrics {
  int iteration = 0;
  int phase = 1;
  int episodes = 0;
  int transitions = 0;
  double return_vertex = 0.0;  // per episode: sum over steps of the mean agent reward
  double return_elem = 0.0;
  double err_rel = 0.0;        // final step of each episode
  double elements_mean = 0.0;
  int elements_min = 0;
  int elements_max = 0;
  int tangles = 0;
  double loss = 0.0;
  double policy_vertex = 0.0;
  double value_vertex = 0.0;
  double policy_elem = 0.0;
  double value_elem = 0.0;
  double entropy_vertex = 0.0;
  double entropy_elem = 0.0;
  double clip_fraction = 0.0;
  double grad_norm = 0.0;
  double seconds = 0.0;
};

void write_metrics_header(std::ostream& os);
void write_metrics_row(std::ostream& os, const IterationMetrics& m);

// Rolls whole episodes until at least transitions_per_iter transitions exist.
// Episode seeds depend only on (seed, iteration, episode index), so results
// do not depend on the thread count.
std::vector<env::Transition> collect_rollouts(std::span<const std::shared_ptr<const env::InstanceData>> dataset,
                                              const policy::PolicyParams& params, const TrainConfig& config,
                                              int iteration, bool phase1);

struct TrainCallbacks {
  std::ostream* metrics_csv = nullptr;
  std::string checkpoint_dir;  // empty disables checkpoints
  std::function<void(const IterationMetrics&)> on_iteration;
};

// Runs the two-phase schedule in place on params; returns per-iteration metrics.
std::vector<IterationMetrics> train(const TrainConfig& config,
                                    std::span<const std::shared_ptr<const env::InstanceData>> dataset,
                                    policy::PolicyParams& params, const TrainCallbacks& callbacks = {});

}  // namespace hrmesh::ppo
