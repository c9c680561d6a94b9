#include "hrmesh/env.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <numeric>

#include "hrmesh/domain.hpp"
#include "hrmesh/error.hpp"

namespace hrmesh::env {

Mesh initial_mesh(const fem::ProblemInstance& instance) {
  return generate_domain(instance.domain, instance.target_elements, instance.mesh_seed);
}

std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, int ref_depth) {
  return prepare_instance(instance, initial_mesh(instance), ref_depth);
}

std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, Mesh mesh, int ref_depth) {
  fem::Reference ref = fem::build_reference(mesh, instance, ref_depth);
  return prepare_instance(instance, std::move(mesh), std::move(ref));
}

std::shared_ptr<const InstanceData> prepare_instance(const fem::ProblemInstance& instance, Mesh mesh,
                                                     fem::Reference ref) {
  auto d = std::make_shared<InstanceData>();
  d->instance = instance;
  d->initial_mesh = std::move(mesh);
  d->initial_field = fem::solve(d->initial_mesh, instance);
  d->ref = std::make_shared<const fem::Reference>(std::move(ref));
  d->initial_indicators = fem::compute_indicators(d->initial_mesh, d->initial_field, *d->ref);
  d->initial_error_sq = d->initial_indicators.total_sq;
  d->initial_total_error =
      std::accumulate(d->initial_indicators.eta_inf.begin(), d->initial_indicators.eta_inf.end(), 0.0);
  if (!(d->initial_error_sq > 0.0) || !(d->initial_total_error > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "initial mesh already resolves the reference exactly");
  }
  return d;
}

double sample_alpha(const EnvConfig& config, std::mt19937_64& rng) {
  if (!(config.alpha_min > 0.0) || config.alpha_max < config.alpha_min) {
    throw Error(ErrorCode::InvalidArgument, "alpha range must be positive and ordered");
  }
  std::uniform_real_distribution<double> u(std::log(config.alpha_min), std::log(config.alpha_max));
  return std::clamp(std::exp(u(rng)), config.alpha_min, config.alpha_max);
}

double Episode::error_rel() const { return fem::relative_error_sq(indicators.total_sq, data->initial_error_sq); }

Episode start_episode(std::shared_ptr<const InstanceData> data, const EnvConfig& config, double alpha) {
  if (!data) throw Error(ErrorCode::InvalidArgument, "episode needs instance data");
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw Error(ErrorCode::InvalidArgument, "alpha must be finite and >= 0");
  Episode ep;
  ep.config = config;
  ep.alpha = alpha;
  ep.mesh = data->initial_mesh;
  ep.field = data->initial_field;
  ep.indicators = data->initial_indicators;
  ep.data = std::move(data);
  return ep;
}

std::vector<double> vertex_error(const Mesh& mesh, std::span<const double> eta2_sq) {
  if (eta2_sq.size() != mesh.num_elements()) throw Error(ErrorCode::ShapeMismatch, "indicator count mismatch");
  std::vector<double> num(mesh.num_vertices(), 0.0), den(mesh.num_vertices(), 0.0);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double a = element_area(mesh, static_cast<int>(e));
    for (int v : mesh.tris[e]) {
      num[v] += a * eta2_sq[e];
      den[v] += a;
    }
  }
  for (std::size_t v = 0; v < num.size(); ++v) num[v] = den[v] > 0.0 ? num[v] / den[v] : 0.0;
  return num;
}

std::vector<double> pagerank_smooth(std::span<const double> delta, const features::Structure& adjacency,
                                    double beta, int iterations) {
  if (static_cast<int>(delta.size()) != adjacency.num_vertices) {
    throw Error(ErrorCode::ShapeMismatch, "reward vector does not match the vertex count");
  }
  std::vector<double> r(delta.begin(), delta.end()), next(r.size());
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t v = 0; v < r.size(); ++v) {
      const auto nb = adjacency.neighbors(static_cast<int>(v));
      double avg = 0.0;
      for (int w : nb) avg += r[w];
      if (!nb.empty()) avg /= static_cast<double>(nb.size());
      next[v] = (1.0 - beta) * delta[v] + beta * avg;
    }
    r.swap(next);
  }
  return r;
}

std::vector<double> vertex_rewards(const Mesh& mesh_before, std::span<const double> eta2_sq_before,
                                   const Mesh& mesh_moved, std::span<const double> eta2_sq_moved,
                                   const features::Structure& adjacency, double beta, int iterations) {
  if (mesh_before.num_vertices() != mesh_moved.num_vertices()) {
    throw Error(ErrorCode::ShapeMismatch, "relocation changed the vertex population");
  }
  const auto before = vertex_error(mesh_before, eta2_sq_before);
  const auto after = vertex_error(mesh_moved, eta2_sq_moved);
  std::vector<double> delta(before.size());
  for (std::size_t v = 0; v < delta.size(); ++v) delta[v] = before[v] - after[v];
  auto r = pagerank_smooth(delta, adjacency, beta, iterations);
  double peak = 0.0;
  for (double x : r) peak = std::max(peak, std::abs(x));
  if (peak > 0.0) {
    for (double& x : r) x = std::clamp(x / peak, -1.0, 1.0);
  }
  return r;
}

TanglingResult tangling_penalty(const Mesh& mesh_moved, double penalty) {
  TanglingResult out;
  out.penalty.assign(mesh_moved.num_vertices(), 0.0);
  const auto bad = detect_tangled(mesh_moved);
  out.rolled_back = !bad.empty();
  for (int e : bad) {
    for (int v : mesh_moved.tris[e]) out.penalty[v] = -penalty;
  }
  return out;
}

std::vector<double> element_rewards(std::span<const double> eta_inf_moved, std::span<const double> eta_inf_next,
                                    const RefinementMaps& maps, double alpha, double initial_total_error) {
  if (maps.elem_children.size() != eta_inf_moved.size()) {
    throw Error(ErrorCode::MissingLineage, "refinement maps do not cover every parent element");
  }
  if (!(initial_total_error > 0.0)) throw Error(ErrorCode::InvalidArgument, "initial total error must be positive");
  std::vector<double> r(eta_inf_moved.size());
  for (std::size_t k = 0; k < r.size(); ++k) {
    const auto& children = maps.elem_children[k];
    if (children.empty()) throw Error(ErrorCode::MissingLineage, "element without children");
    double worst = 0.0;
    for (int c : children) {
      if (c < 0 || static_cast<std::size_t>(c) >= eta_inf_next.size()) {
        throw Error(ErrorCode::MissingLineage, "child index out of range");
      }
      worst = std::max(worst, eta_inf_next[c]);
    }
    r[k] = (eta_inf_moved[k] - worst) / initial_total_error - alpha * static_cast<double>(children.size() - 1);
  }
  return r;
}

namespace {

RefinementMaps identity_maps(std::size_t nv, std::size_t ne) {
  RefinementMaps m;
  m.elem_children.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) m.elem_children[e] = {static_cast<int>(e)};
  m.vertex_persist.resize(nv);
  std::iota(m.vertex_persist.begin(), m.vertex_persist.end(), 0);
  return m;
}

double total_displacement(const Mesh& a, const Mesh& b) {
  double d = 0.0;
  for (std::size_t v = 0; v < a.coords.size(); ++v) d += distance(a.coords[v], b.coords[v]);
  return d;
}

}  // namespace

Transition step_hr(Episode& ep, const policy::PolicyParams& params, std::mt19937_64& rng,
                   const StepOptions& options) {
  if (ep.finished()) throw Error(ErrorCode::InvalidArgument, "episode already finished");
  const InstanceData& data = *ep.data;
  const EnvConfig& cfg = ep.config;

  Transition tr;
  tr.step = ep.step_index;
  tr.alpha = ep.alpha;
  tr.mesh = ep.mesh;
  tr.refine_step = !ep.relocation_only();
  tr.random_flags = options.random_flags && tr.refine_step;
  {
    features::HypergraphState raw = features::build_state(ep.mesh, ep.field, ep.step_index, ep.alpha, data.instance);
    if (options.keep_raw) {
      tr.raw_vertex_feats = raw.vertex_feats;
      tr.raw_elem_feats = raw.elem_feats;
    }
    tr.state = policy::prepare_state(params, raw);
  }

  {
    ad::NoGradGuard guard;
    const policy::PolicyOutput out = policy::forward(params, tr.state, ep.mesh);
    tr.action = options.deterministic ? policy::mode_action(out) : policy::sample_actions(out, ep.mesh, rng).action;
    if (!tr.refine_step) {
      std::fill(tr.action.flags.begin(), tr.action.flags.end(), std::uint8_t{0});
    } else if (tr.random_flags) {
      std::bernoulli_distribution coin(options.flag_prob);
      for (auto& f : tr.action.flags) f = coin(rng) ? 1 : 0;
    }
    tr.vertex_logprob = policy::vertex_log_prob(out, ep.mesh, tr.action.coords).data();
    tr.elem_logprob = policy::elem_log_prob(out, tr.action.flags).data();
    tr.vertex_value = out.vertex_value.data();
    tr.elem_value = out.elem_value.data();
  }
  for (double x : tr.vertex_logprob) {
    if (!std::isfinite(x)) throw Error(ErrorCode::NonFinite, "non-finite vertex log-probability");
  }

  // Relocation, with rollback when any element inverts.
  Mesh moved = with_coords(ep.mesh, tr.action.coords);
  const TanglingResult tangle = tangling_penalty(moved, cfg.tangle_penalty);
  fem::Field field_moved;
  fem::ErrorIndicators ind_moved;
  bool have_moved_field = false;
  tr.vertex_reward.assign(ep.mesh.num_vertices(), 0.0);
  if (tangle.rolled_back) {
    tr.tangled = true;
    tr.vertex_reward = tangle.penalty;
    moved = ep.mesh;
    field_moved = ep.field;
    ind_moved = ep.indicators;
    have_moved_field = true;
  } else {
    tr.displacement = total_displacement(ep.mesh, moved);
    if (options.training) {
      field_moved = fem::solve(moved, data.instance);
      ind_moved = fem::compute_indicators(moved, field_moved, *data.ref);
      have_moved_field = true;
      tr.vertex_reward = vertex_rewards(ep.mesh, ep.indicators.eta2_sq, moved, ind_moved.eta2_sq,
                                        tr.state.structure, cfg.pagerank_beta, cfg.pagerank_iterations);
      tr.global_gain = (ep.indicators.total_sq - ind_moved.total_sq) / ep.indicators.total_sq;
    }
  }

  Mesh next;
  fem::Field field_next;
  fem::ErrorIndicators ind_next;
  if (tr.refine_step) {
    RefinementResult res = rgb_refine(moved, tr.action.flags);
    next = std::move(res.mesh);
    tr.maps = std::move(res.maps);
    field_next = fem::solve(next, data.instance);
    if (options.training) {
      ind_next = fem::compute_indicators(next, field_next, *data.ref);
      tr.elem_reward = element_rewards(ind_moved.eta_inf, ind_next.eta_inf, tr.maps, ep.alpha, data.initial_total_error);
    }
  } else {
    next = std::move(moved);
    tr.maps = identity_maps(next.num_vertices(), next.num_elements());
    field_next = have_moved_field ? std::move(field_moved) : fem::solve(next, data.instance);
    ind_next = std::move(ind_moved);
  }
  if (tr.elem_reward.empty()) tr.elem_reward.assign(ep.mesh.num_elements(), 0.0);

  tr.elements_after = static_cast<int>(next.num_elements());
  ep.mesh = std::move(next);
  ep.field = std::move(field_next);
  if (options.training) {
    ep.indicators = std::move(ind_next);
    tr.error_rel_after = ep.error_rel();
  }
  ++ep.step_index;
  return tr;
}

void compute_advantages(std::span<Transition> episode, const EnvConfig& cfg) {
  // Local value and advantage of the following step, indexed by its agents.
  std::vector<double> v_elem_next, a_elem_next, v_vert_next, a_vert_next;
  for (std::size_t i = episode.size(); i-- > 0;) {
    Transition& t = episode[i];
    const bool last = i + 1 == episode.size();
    const std::size_t ne = t.elem_value.size();
    const std::size_t nv = t.vertex_value.size();

    std::vector<double> a_elem(ne, 0.0), j_elem(ne, 0.0);
    t.elem_return.assign(ne, 0.0);
    t.elem_advantage.assign(ne, 0.0);
    if (t.refine_step) {
      for (std::size_t k = 0; k < ne; ++k) {
        double child_v = 0.0, child_a = 0.0;
        if (!last) {
          for (int c : t.maps.elem_children[k]) {
            child_v += v_elem_next.at(c);
            child_a += a_elem_next.at(c);
          }
        }
        const double delta = t.elem_reward[k] + cfg.gamma_h * child_v - t.elem_value[k];
        a_elem[k] = delta + cfg.gamma_h * cfg.lambda * child_a;
        j_elem[k] = a_elem[k] + t.elem_value[k];
      }
      const double mean_j = ne ? std::accumulate(j_elem.begin(), j_elem.end(), 0.0) / static_cast<double>(ne) : 0.0;
      for (std::size_t k = 0; k < ne; ++k) {
        t.elem_return[k] = 0.5 * j_elem[k] + 0.5 * mean_j;
        t.elem_advantage[k] = t.elem_return[k] - t.elem_value[k];
      }
      v_elem_next = t.elem_value;
    } else {
      // Inactive element swarm: nothing to bootstrap from.
      v_elem_next.assign(ne, 0.0);
    }
    a_elem_next = std::move(a_elem);

    std::vector<double> a_vert(nv, 0.0);
    t.vertex_return.assign(nv, 0.0);
    t.vertex_advantage.assign(nv, 0.0);
    for (std::size_t z = 0; z < nv; ++z) {
      double nv_val = 0.0, na = 0.0;
      if (!last) {
        const int p = t.maps.vertex_persist.at(z);
        nv_val = v_vert_next.at(p);
        na = a_vert_next.at(p);
      }
      const double delta = t.vertex_reward[z] + cfg.gamma_r * nv_val - t.vertex_value[z];
      a_vert[z] = delta + cfg.gamma_r * cfg.lambda * na;
      const double j = a_vert[z] + t.vertex_value[z];
      t.vertex_return[z] = 0.5 * j + 0.5 * t.global_gain;
      t.vertex_advantage[z] = t.vertex_return[z] - t.vertex_value[z];
    }
    v_vert_next = t.vertex_value;
    a_vert_next = std::move(a_vert);
  }
}

void write_episode_log(std::ostream& os, std::span<const Transition> episode) {
  for (const Transition& t : episode) {
    nlohmann::json j{{"step", t.step},
                     {"alpha", t.alpha},
                     {"elements", t.elements_after},
                     {"err_rel", t.error_rel_after},
                     {"displacement", t.displacement},
                     {"tangled", t.tangled},
                     {"refined", std::count(t.action.flags.begin(), t.action.flags.end(), std::uint8_t{1})}};
    os << j.dump() << '\n';
  }
}

InferenceResult run_inference(std::shared_ptr<const InstanceData> data, const EnvConfig& config,
                              const policy::PolicyParams& params, double alpha) {
  Episode ep = start_episode(data, config, alpha);
  std::mt19937_64 unused(0);
  StepOptions opt;
  opt.training = false;
  opt.deterministic = true;
  InferenceResult res;
  while (!ep.finished()) {
    const Transition t = step_hr(ep, params, unused, opt);
    res.displacement += t.displacement;
    res.tangle_events += t.tangled ? 1 : 0;
  }
  const auto ind = fem::compute_indicators(ep.mesh, ep.field, *data->ref);
  res.elements = static_cast<int>(ep.mesh.num_elements());
  res.error_rel = fem::relative_error_sq(ind.total_sq, data->initial_error_sq);
  res.mesh = std::move(ep.mesh);
  res.field = std::move(ep.field);
  return res;
}

}  // namespace hrmesh::env
