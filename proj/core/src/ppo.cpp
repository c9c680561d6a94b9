#include "hrmesh/ppo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "hrmesh/error.hpp"
#include "parallel.hpp"

namespace hrmesh::ppo {

using ad::Tensor;

void validate(const TrainConfig& c) {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::InvalidArgument, what);
  };
  require(c.iterations > 0, "iterations must be positive");
  require(c.transitions_per_iter > 0, "transitions_per_iter must be positive");
  require(c.epochs > 0 && c.minibatch > 0, "epochs and minibatch must be positive");
  require(c.clip > 0.0, "clip range must be positive");
  require(c.lr >= 0.0, "learning rate must be non-negative");
  require(c.phase1_iters >= 0 && c.phase1_iters < c.iterations, "phase1_iters must lie in [0, iterations)");
  require(c.random_flag_prob >= 0.0 && c.random_flag_prob <= 1.0, "random_flag_prob must lie in [0, 1]");
  require(c.threads > 0, "threads must be positive");
}

features::HypergraphState normalize_obs(policy::ObsNormalizer& normalizer, const features::HypergraphState& raw,
                                        bool update) {
  if (update) normalizer.update(raw);
  return normalizer.apply(raw);
}

namespace {

bool elements_active(const env::Transition& t) { return t.refine_step && !t.random_flags; }

void standardise(std::vector<std::vector<double>*>& groups) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (auto* g : groups) {
    for (double a : *g) {
      sum += a;
      sq += a * a;
      ++n;
    }
  }
  if (n < 2) return;
  const double mean = sum / static_cast<double>(n);
  const double sd = std::sqrt(std::max(sq / static_cast<double>(n) - mean * mean, 0.0));
  for (auto* g : groups) {
    for (double& a : *g) a = (a - mean) / (sd + 1e-8);
  }
}

}  // namespace

void normalize_advantages(std::span<env::Transition> buffer) {
  std::vector<std::vector<double>*> vert, elem;
  for (env::Transition& t : buffer) {
    vert.push_back(&t.vertex_advantage);
    if (elements_active(t)) elem.push_back(&t.elem_advantage);
  }
  standardise(vert);
  standardise(elem);
}

namespace {

struct SwarmSums {
  Tensor policy, value, entropy;
  int agents = 0;   // acting agents, for policy and entropy means
  int valued = 0;   // agents with a value target
  int clipped = 0;

  void add(const Tensor& p, const Tensor& v, const Tensor& h) {
    policy = policy.defined() ? ad::add(policy, p) : p;
    value = value.defined() ? ad::add(value, v) : v;
    entropy = entropy.defined() ? ad::add(entropy, h) : h;
  }
};

Tensor column(std::vector<double> v) {
  const int n = static_cast<int>(v.size());
  return Tensor::from(n, 1, std::move(v));
}

// Sums of the clipped surrogate, clipped value loss, and the entropy over one swarm.
void swarm_terms(SwarmSums& acc, const Tensor& new_logp, const std::vector<double>& old_logp,
                 const std::vector<double>& advantage, const Tensor& value, const std::vector<double>& old_value,
                 const std::vector<double>& returns, const Tensor& entropy, const std::vector<double>& active,
                 double clip) {
  const Tensor mask = column(active);
  const Tensor ratio = ad::exp(ad::sub(new_logp, column(old_logp)));
  const Tensor adv = column(advantage);
  const Tensor surr = ad::minimum(ad::mul(ratio, adv), ad::mul(ad::clamp(ratio, 1.0 - clip, 1.0 + clip), adv));

  const Tensor vold = column(old_value);
  const Tensor ret = column(returns);
  const Tensor vclip = ad::add(vold, ad::clamp(ad::sub(value, vold), -clip, clip));
  const Tensor vloss = ad::maximum(ad::square(ad::sub(value, ret)), ad::square(ad::sub(vclip, ret)));

  acc.add(ad::sum(ad::mul(surr, mask)), ad::sum(vloss), ad::sum(ad::mul(entropy, mask)));
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i] == 0.0) continue;
    ++acc.agents;
    if (std::abs(ratio.data()[i] - 1.0) > clip) ++acc.clipped;
  }
  acc.valued += static_cast<int>(returns.size());
}

}  // namespace

LossTerms ppo_loss(std::span<const env::Transition* const> batch, const policy::PolicyParams& params,
                   const TrainConfig& config, bool train_elements) {
  if (batch.empty()) throw Error(ErrorCode::InvalidArgument, "empty minibatch");
  SwarmSums vs, es;
  for (const env::Transition* t : batch) {
    const policy::PolicyOutput out = policy::forward(params, t->state, t->mesh);
    std::vector<double> acting(t->mesh.num_vertices());
    for (std::size_t v = 0; v < acting.size(); ++v) {
      acting[v] = t->mesh.boundary[v].kind == BoundaryClass::Corner ? 0.0 : 1.0;
    }
    swarm_terms(vs, policy::vertex_log_prob(out, t->mesh, t->action.coords), t->vertex_logprob,
                t->vertex_advantage, out.vertex_value, t->vertex_value, t->vertex_return,
                policy::vertex_entropy(out, t->mesh), acting, config.clip);
    if (train_elements && elements_active(*t)) {
      swarm_terms(es, policy::elem_log_prob(out, t->action.flags), t->elem_logprob, t->elem_advantage,
                  out.elem_value, t->elem_value, t->elem_return, policy::elem_entropy(out),
                  std::vector<double>(t->mesh.num_elements(), 1.0), config.clip);
    }
  }

  LossTerms terms;
  Tensor total;
  auto fold = [&](const SwarmSums& s, double value_coef, double entropy_coef, double& pol, double& val,
                  double& ent) {
    if (s.valued == 0) return;
    const double inv_agents = s.agents > 0 ? 1.0 / s.agents : 0.0;
    const Tensor p = ad::scale(s.policy, -inv_agents);
    const Tensor v = ad::scale(s.value, 1.0 / s.valued);
    const Tensor h = ad::scale(s.entropy, inv_agents);
    pol = p.item();
    val = v.item();
    ent = h.item();
    const Tensor part = ad::sub(ad::add(p, ad::scale(v, value_coef)), ad::scale(h, entropy_coef));
    total = total.defined() ? ad::add(total, part) : part;
  };
  fold(vs, config.value_coef_vertex, config.entropy_vertex, terms.policy_vertex, terms.value_vertex,
       terms.entropy_vertex);
  fold(es, config.value_coef_elem, config.entropy_elem, terms.policy_elem, terms.value_elem, terms.entropy_elem);
  terms.total = total;
  terms.vertex_agents = vs.agents;
  terms.elem_agents = es.agents;
  const int acting = vs.agents + es.agents;
  terms.clip_fraction = acting > 0 ? static_cast<double>(vs.clipped + es.clipped) / acting : 0.0;
  if (!std::isfinite(total.item())) throw Error(ErrorCode::NonFinite, "non-finite PPO loss");
  return terms;
}

void write_metrics_header(std::ostream& os) {
  os << "iteration,phase,episodes,transitions,return_vertex,return_elem,err_rel,elements_mean,elements_min,"
        "elements_max,tangles,loss,policy_vertex,value_vertex,policy_elem,value_elem,entropy_vertex,entropy_elem,"
        "clip_fraction,grad_norm,seconds\n";
}

void write_metrics_row(std::ostream& os, const IterationMetrics& m) {
  std::ostringstream s;
  s << std::setprecision(10) << m.iteration << ',' << m.phase << ',' << m.episodes << ',' << m.transitions << ','
    << m.return_vertex << ',' << m.return_elem << ',' << m.err_rel << ',' << m.elements_mean << ','
    << m.elements_min << ',' << m.elements_max << ',' << m.tangles << ',' << m.loss << ',' << m.policy_vertex << ','
    << m.value_vertex << ',' << m.policy_elem << ',' << m.value_elem << ',' << m.entropy_vertex << ','
    << m.entropy_elem << ',' << m.clip_fraction << ',' << m.grad_norm << ',' << std::setprecision(4) << m.seconds
    << '\n';
  os << s.str();
}

std::vector<env::Transition> collect_rollouts(std::span<const std::shared_ptr<const env::InstanceData>> dataset,
                                              const policy::PolicyParams& params, const TrainConfig& config,
                                              int iteration, bool phase1) {
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  const int steps = config.env.horizon + 1;
  const int episodes = (config.transitions_per_iter + steps - 1) / steps;
  std::vector<std::vector<env::Transition>> per_episode(episodes);

  env::StepOptions opt;
  opt.training = true;
  opt.random_flags = phase1;
  opt.flag_prob = config.random_flag_prob;
  opt.keep_raw = true;

  auto run = [&](int e) {
    std::seed_seq seq{static_cast<std::uint64_t>(config.seed), static_cast<std::uint64_t>(iteration),
                      static_cast<std::uint64_t>(e)};
    std::mt19937_64 rng(seq);
    const auto& data = dataset[std::uniform_int_distribution<std::size_t>(0, dataset.size() - 1)(rng)];
    env::Episode ep = env::start_episode(data, config.env, env::sample_alpha(config.env, rng));
    auto& out = per_episode[e];
    while (!ep.finished()) out.push_back(env::step_hr(ep, params, rng, opt));
    env::compute_advantages(out, config.env);
  };

  detail::parallel_for(episodes, config.threads, run);

  std::vector<env::Transition> buffer;
  buffer.reserve(static_cast<std::size_t>(episodes) * steps);
  for (auto& ep : per_episode) {
    for (auto& t : ep) buffer.push_back(std::move(t));
  }
  return buffer;
}

namespace {

double mean_of(const std::vector<double>& v) {
  return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

IterationMetrics rollout_metrics(std::span<const env::Transition> buffer, int steps) {
  IterationMetrics m;
  m.transitions = static_cast<int>(buffer.size());
  m.episodes = m.transitions / steps;
  m.elements_min = std::numeric_limits<int>::max();
  for (std::size_t i = 0; i < buffer.size(); ++i) {
    const env::Transition& t = buffer[i];
    m.return_vertex += mean_of(t.vertex_reward);
    m.return_elem += mean_of(t.elem_reward);
    m.tangles += t.tangled ? 1 : 0;
    if ((i + 1) % steps == 0) {
      m.err_rel += t.error_rel_after;
      m.elements_mean += t.elements_after;
      m.elements_min = std::min(m.elements_min, t.elements_after);
      m.elements_max = std::max(m.elements_max, t.elements_after);
    }
  }
  if (m.episodes > 0) {
    m.return_vertex /= m.episodes;
    m.return_elem /= m.episodes;
    m.err_rel /= m.episodes;
    m.elements_mean /= m.episodes;
  }
  return m;
}

}  // namespace

std::vector<IterationMetrics> train(const TrainConfig& config,
                                    std::span<const std::shared_ptr<const env::InstanceData>> dataset,
                                    policy::PolicyParams& params, const TrainCallbacks& callbacks) {
  validate(config);
  if (dataset.empty()) throw Error(ErrorCode::InvalidArgument, "empty training set");
  const int steps = config.env.horizon + 1;
  std::mt19937_64 rng(config.seed ^ 0x5eed5eedULL);
  ad::AdamConfig adam;
  adam.lr = config.lr;
  adam.grad_clip_norm = config.grad_clip;

  policy::ObsNormalizer stats = params.normalizer;
  if (stats.vertex_count() == 0) {
    // Warm start from the initial states so the first rollouts are already standardised.
    for (const auto& d : dataset) {
      stats.update(features::build_state(d->initial_mesh, d->initial_field, 0, env::sample_alpha(config.env, rng),
                                         d->instance));
    }
    params.normalizer = stats;
  }
  if (!callbacks.checkpoint_dir.empty()) std::filesystem::create_directories(callbacks.checkpoint_dir);
  if (callbacks.metrics_csv) write_metrics_header(*callbacks.metrics_csv);

  std::vector<IterationMetrics> history;
  for (int it = 0; it < config.iterations; ++it) {
    const auto start = std::chrono::steady_clock::now();
    const bool phase1 = it < config.phase1_iters;
    std::vector<env::Transition> buffer = collect_rollouts(dataset, params, config, it, phase1);
    for (env::Transition& t : buffer) {
      stats.update(t.raw_vertex_feats, t.raw_elem_feats);
      t.raw_vertex_feats = {};
      t.raw_elem_feats = {};
    }
    IterationMetrics m = rollout_metrics(buffer, steps);
    m.iteration = it;
    m.phase = phase1 ? 1 : 2;
    normalize_advantages(buffer);

    const std::set<std::string> frozen =
        phase1 ? std::set<std::string>{std::string(policy::kElementGroup)} : std::set<std::string>{};
    std::vector<int> order(buffer.size());
    std::iota(order.begin(), order.end(), 0);
    int updates = 0;
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
      std::shuffle(order.begin(), order.end(), rng);
      for (std::size_t b = 0; b < order.size(); b += config.minibatch) {
        std::vector<const env::Transition*> batch;
        for (std::size_t i = b; i < std::min(order.size(), b + config.minibatch); ++i) {
          batch.push_back(&buffer[order[i]]);
        }
        params.store.zero_grad();
        const LossTerms terms = ppo_loss(batch, params, config, !phase1);
        terms.total.backward();
        const ad::AdamReport rep = params.store.adam_step(adam, frozen);
        ++updates;
        m.loss += terms.total.item();
        m.policy_vertex += terms.policy_vertex;
        m.value_vertex += terms.value_vertex;
        m.policy_elem += terms.policy_elem;
        m.value_elem += terms.value_elem;
        m.entropy_vertex += terms.entropy_vertex;
        m.entropy_elem += terms.entropy_elem;
        m.clip_fraction += terms.clip_fraction;
        m.grad_norm += rep.grad_norm;
      }
    }
    if (updates > 0) {
      const double inv = 1.0 / updates;
      for (double* x : {&m.loss, &m.policy_vertex, &m.value_vertex, &m.policy_elem, &m.value_elem,
                        &m.entropy_vertex, &m.entropy_elem, &m.clip_fraction, &m.grad_norm}) {
        *x *= inv;
      }
    }
    params.normalizer = stats;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    if (callbacks.metrics_csv) {
      write_metrics_row(*callbacks.metrics_csv, m);
      callbacks.metrics_csv->flush();
    }
    const bool last = it + 1 == config.iterations;
    if (!callbacks.checkpoint_dir.empty() &&
        (last || (config.checkpoint_every > 0 && (it + 1) % config.checkpoint_every == 0))) {
      std::ostringstream name;
      name << callbacks.checkpoint_dir << "/policy_" << std::setw(4) << std::setfill('0') << it + 1 << ".json";
      policy::save_policy(name.str(), params);
    }
    if (callbacks.on_iteration) callbacks.on_iteration(m);
    history.push_back(m);
  }
  return history;
}

}  // namespace hrmesh::ppo
