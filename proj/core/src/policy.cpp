#include "hrmesh/policy.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>

#include "hrmesh/error.hpp"

namespace hrmesh::policy {
namespace {

using ad::Tensor;

class Builder {
 public:
  Builder(ad::ParamStore& store, std::uint64_t seed) : store_(store), rng_(seed) {}

  Tensor weight(const std::string& name, int rows, int cols, const std::string& group, double gain = 1.0) {
    return store_.add(name, rows, cols, ad::glorot_uniform(rows, cols, rng_, gain), group);
  }
  Tensor constant(const std::string& name, int rows, int cols, double value, const std::string& group) {
    return store_.add(name, rows, cols, std::vector<double>(static_cast<std::size_t>(rows) * cols, value), group);
  }

  Backbone backbone(const std::string& prefix, const PolicyConfig& c, const std::string& group) {
    Backbone b;
    b.w_v = weight(prefix + ".w_v", c.vertex_dim, c.hidden, group);
    b.w_e = weight(prefix + ".w_e", c.elem_dim, c.hidden, group);
    for (int l = 0; l < c.layers; ++l) {
      const std::string p = prefix + ".l" + std::to_string(l);
      b.layers.push_back({weight(p + ".w_ve", c.hidden, c.hidden, group),
                          weight(p + ".w_pool", 2 * c.hidden, c.hidden, group),
                          weight(p + ".w_ev", c.hidden, c.hidden, group)});
    }
    return b;
  }

  Mlp mlp(const std::string& prefix, int in, int hidden, int out, const std::string& group, double out_gain,
          double out_bias) {
    return {weight(prefix + ".w1", in, hidden, group),       constant(prefix + ".b1", 1, hidden, 0.0, group),
            weight(prefix + ".w2", hidden, hidden, group),   constant(prefix + ".b2", 1, hidden, 0.0, group),
            weight(prefix + ".w3", hidden, out, group, out_gain), constant(prefix + ".b3", 1, out, out_bias, group)};
  }

 private:
  ad::ParamStore& store_;
  std::mt19937_64 rng_;
};

void check_finite(const Tensor& t, const char* what) {
  for (double v : t.data()) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFinite, std::string("non-finite policy output: ") + what);
  }
}

std::vector<double> column_mask(const Mesh& mesh, BoundaryClass kind, int cols) {
  std::vector<double> m(mesh.num_vertices() * cols, 0.0);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.boundary[v].kind == kind) {
      for (int c = 0; c < cols; ++c) m[v * cols + c] = 1.0;
    }
  }
  return m;
}

// Unit tangent rows for edge vertices, zero elsewhere.
Tensor tangents(const Mesh& mesh) {
  std::vector<double> t(mesh.num_vertices() * 2, 0.0);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    if (mesh.boundary[v].kind != BoundaryClass::Edge) continue;
    const Vec2 d = mesh.components.at(mesh.boundary[v].component).tangent;
    t[2 * v] = d.x;
    t[2 * v + 1] = d.y;
  }
  return Tensor::from(static_cast<int>(mesh.num_vertices()), 2, std::move(t));
}

}  // namespace

ObsNormalizer::ObsNormalizer(int vertex_dim, int elem_dim) {
  vertex_.mean.assign(vertex_dim, 0.0);
  vertex_.m2.assign(vertex_dim, 0.0);
  elem_.mean.assign(elem_dim, 0.0);
  elem_.m2.assign(elem_dim, 0.0);
}

void ObsNormalizer::accumulate(Stats& s, const features::Matrix& m, bool log_alpha) {
  if (static_cast<int>(s.mean.size()) != m.cols) throw Error(ErrorCode::ShapeMismatch, "normaliser width mismatch");
  for (int r = 0; r < m.rows; ++r) {
    ++s.count;
    for (int c = 0; c < m.cols; ++c) {
      double x = m(r, c);
      if (log_alpha && c == kAlphaColumn) x = std::log(std::max(x, 1e-12));
      const double d = x - s.mean[c];
      s.mean[c] += d / static_cast<double>(s.count);
      s.m2[c] += d * (x - s.mean[c]);
    }
  }
}

void ObsNormalizer::normalise(const Stats& s, features::Matrix& m, bool log_alpha) {
  if (static_cast<int>(s.mean.size()) != m.cols) throw Error(ErrorCode::ShapeMismatch, "normaliser width mismatch");
  for (int r = 0; r < m.rows; ++r) {
    for (int c = 0; c < m.cols; ++c) {
      double x = m(r, c);
      if (log_alpha && c == kAlphaColumn) x = std::log(std::max(x, 1e-12));
      if (s.count > 1) {
        const double var = std::max(s.m2[c] / static_cast<double>(s.count), kVarianceFloor);
        x = std::clamp((x - s.mean[c]) / std::sqrt(var), -kClip, kClip);
      }
      m(r, c) = x;
    }
  }
}

void ObsNormalizer::update(const features::Matrix& vertex_feats, const features::Matrix& elem_feats) {
  accumulate(vertex_, vertex_feats, false);
  accumulate(elem_, elem_feats, true);
}

features::HypergraphState ObsNormalizer::apply(features::HypergraphState raw) const {
  normalise(vertex_, raw.vertex_feats, false);
  normalise(elem_, raw.elem_feats, true);
  return raw;
}

std::string ObsNormalizer::to_json() const {
  auto stats = [](const Stats& s) { return nlohmann::json{{"count", s.count}, {"mean", s.mean}, {"m2", s.m2}}; };
  return nlohmann::json{{"vertex", stats(vertex_)}, {"element", stats(elem_)}}.dump();
}

ObsNormalizer ObsNormalizer::from_json(const std::string& text) {
  ObsNormalizer n;
  try {
    const auto j = nlohmann::json::parse(text);
    auto read = [](const nlohmann::json& js, Stats& s) {
      s.count = js.at("count");
      s.mean = js.at("mean").get<std::vector<double>>();
      s.m2 = js.at("m2").get<std::vector<double>>();
      if (s.mean.size() != s.m2.size()) throw Error(ErrorCode::Parse, "normaliser moments differ in length");
    };
    read(j.at("vertex"), n.vertex_);
    read(j.at("element"), n.elem_);
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("malformed normaliser: ") + ex.what());
  }
  return n;
}

std::string config_to_json(const PolicyConfig& c) {
  const nlohmann::json j{{"vertex_dim", c.vertex_dim},       {"elem_dim", c.elem_dim},
                         {"hidden", c.hidden},               {"layers", c.layers},
                         {"head_hidden", c.head_hidden},     {"attention_dim", c.attention_dim},
                         {"stages", c.stages},               {"euler_steps", c.euler_steps},
                         {"dtau", c.dtau},                   {"max_move_fraction", c.max_move_fraction},
                         {"log_std_min", c.log_std_min},
                         {"log_std_max", c.log_std_max},     {"log_std_init", c.log_std_init},
                         {"elem_logit_init", c.elem_logit_init},
                         {"seed", c.seed}};
  return j.dump();
}

PolicyConfig config_from_json(const std::string& text) {
  PolicyConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    c.vertex_dim = j.at("vertex_dim");
    c.elem_dim = j.at("elem_dim");
    c.hidden = j.at("hidden");
    c.layers = j.at("layers");
    c.head_hidden = j.at("head_hidden");
    c.attention_dim = j.at("attention_dim");
    c.stages = j.at("stages");
    c.euler_steps = j.at("euler_steps");
    c.dtau = j.at("dtau");
    c.max_move_fraction = j.at("max_move_fraction");
    c.log_std_min = j.at("log_std_min");
    c.log_std_max = j.at("log_std_max");
    c.log_std_init = j.at("log_std_init");
    c.elem_logit_init = j.at("elem_logit_init");
    c.seed = j.at("seed");
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("malformed policy config: ") + ex.what());
  }
  return c;
}

PolicyParams init_params(const PolicyConfig& c) {
  if (c.hidden <= 0 || c.layers <= 0 || c.head_hidden <= 0 || c.attention_dim <= 0 || c.stages < 0 ||
      c.euler_steps < 0) {
    throw Error(ErrorCode::InvalidArgument, "policy dimensions must be positive");
  }
  if (!(c.dtau > 0.0 && c.dtau < 0.5)) throw Error(ErrorCode::InvalidArgument, "dtau must lie in (0, 0.5)");
  PolicyParams p;
  p.config = c;
  p.normalizer = ObsNormalizer(c.vertex_dim, c.elem_dim);
  Builder b(p.store, c.seed);
  p.vertex_backbone = b.backbone("vertex.backbone", c, kVertexGroup);
  for (int s = 0; s < c.stages; ++s) {
    const std::string prefix = "vertex.attn" + std::to_string(s);
    p.scorers.push_back({b.weight(prefix + ".w_q", c.hidden, c.attention_dim, kVertexGroup),
                         b.weight(prefix + ".w_k", c.hidden, c.attention_dim, kVertexGroup),
                         b.weight(prefix + ".w_dst", c.hidden, 1, kVertexGroup),
                         b.constant(prefix + ".self_bias", 1, 1, 0.0, kVertexGroup)});
  }
  p.vertex_cov = b.mlp("vertex.cov", c.hidden, c.head_hidden, 2, kVertexGroup, 0.01, c.log_std_init);
  p.vertex_value = b.mlp("vertex.value", c.hidden, c.head_hidden, 1, kVertexGroup, 1.0, 0.0);
  p.elem_backbone = b.backbone("element.backbone", c, kElementGroup);
  p.elem_policy = b.mlp("element.policy", c.hidden, c.head_hidden, 1, kElementGroup, 0.01, c.elem_logit_init);
  p.elem_value = b.mlp("element.value", c.hidden, c.head_hidden, 1, kElementGroup, 1.0, 0.0);
  return p;
}

PolicyParams PolicyParams::clone() const {
  PolicyParams out = init_params(config);
  auto& dst = out.store.entries();
  const auto& src = store.entries();
  for (std::size_t i = 0; i < src.size(); ++i) {
    dst[i].param.mutable_data() = src[i].param.data();
    dst[i].m = src[i].m;
    dst[i].v = src[i].v;
    dst[i].steps = src[i].steps;
  }
  out.store.set_step(store.step());
  out.normalizer = normalizer;
  return out;
}

void save_policy(const std::string& path, const PolicyParams& params) {
  const nlohmann::json header{{"config", nlohmann::json::parse(config_to_json(params.config))},
                              {"normalizer", nlohmann::json::parse(params.normalizer.to_json())}};
  ad::save_checkpoint(path, params.store, header.dump());
}

PolicyParams load_policy(const std::string& path) {
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(ad::read_checkpoint_header(path));
    PolicyParams p = init_params(config_from_json(header.at("config").dump()));
    p.normalizer = ObsNormalizer::from_json(header.at("normalizer").dump());
    ad::load_checkpoint(path, p.store);
    return p;
  } catch (const nlohmann::json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("malformed policy checkpoint: ") + ex.what());
  }
}

features::HypergraphState prepare_state(const PolicyParams& p, const features::HypergraphState& raw) {
  return p.normalizer.apply(raw);
}

Incidence make_incidence(const features::Structure& s) {
  Incidence inc;
  inc.num_vertices = s.num_vertices;
  inc.num_elements = s.num_elements;
  for (int e = 0; e < s.num_elements; ++e) {
    for (int v : s.elem_vertices[e]) {
      inc.elem_slot_vertex.push_back(v);
      inc.elem_slot_elem.push_back(e);
    }
  }
  for (int v = 0; v < s.num_vertices; ++v) {
    for (int e : s.incident(v)) {
      inc.vertex_slot_elem.push_back(e);
      inc.vertex_slot_vertex.push_back(v);
    }
  }
  return inc;
}

AttentionPairs attention_pairs(const Mesh& mesh, const features::Structure& s) {
  const MeshTopology topo = build_topology(mesh);
  std::vector<std::vector<int>> along_boundary(mesh.num_vertices());
  for (std::size_t ed = 0; ed < topo.edges.size(); ++ed) {
    if (!topo.is_boundary_edge(static_cast<int>(ed))) continue;
    const auto [a, b] = topo.edges[ed];
    along_boundary[a].push_back(b);
    along_boundary[b].push_back(a);
  }
  AttentionPairs pairs;
  auto push = [&](int i, int j) {
    pairs.src.push_back(i);
    pairs.dst.push_back(j);
    pairs.is_self.push_back(i == j ? 1.0 : 0.0);
  };
  for (int v = 0; v < s.num_vertices; ++v) {
    push(v, v);
    const BoundaryTag tag = mesh.boundary[v];
    if (tag.kind == BoundaryClass::Interior) {
      for (int w : s.neighbors(v)) push(v, w);
    } else if (tag.kind == BoundaryClass::Edge) {
      for (int w : s.neighbors(v)) {
        const bool on_line = std::find(along_boundary[v].begin(), along_boundary[v].end(), w) != along_boundary[v].end();
        const BoundaryTag other = mesh.boundary[w];
        const bool same = other.kind == BoundaryClass::Corner ||
                          (other.kind == BoundaryClass::Edge && other.component == tag.component);
        if (on_line && same) push(v, w);
      }
    }
  }
  return pairs;
}

HConvOut hconv_layer(const HConvWeights& w, const Tensor& x, const Tensor& e, const Incidence& inc) {
  const Tensor z_e =
      ad::relu(ad::matmul(ad::segment_mean(ad::gather_rows(x, inc.elem_slot_vertex), inc.elem_slot_elem, inc.num_elements),
                          w.w_ve));
  const Tensor e_tilde = ad::matmul(ad::concat_cols(z_e, e), w.w_pool);
  const Tensor x_next = ad::relu(ad::matmul(
      ad::segment_mean(ad::gather_rows(e_tilde, inc.vertex_slot_elem), inc.vertex_slot_vertex, inc.num_vertices),
      w.w_ev));
  return {x_next, e_tilde};
}

Tensor attention_weights(const Scorer& s, const Tensor& h, const AttentionPairs& pairs, int num_vertices) {
  const int d = s.w_q.cols();
  const Tensor q = ad::gather_rows(ad::matmul(h, s.w_q), pairs.src);
  const Tensor k = ad::gather_rows(ad::matmul(h, s.w_k), pairs.dst);
  const Tensor dst_term = ad::gather_rows(ad::matmul(h, s.w_dst), pairs.dst);
  const Tensor self = ad::matmul(Tensor::from(static_cast<int>(pairs.is_self.size()), 1, pairs.is_self), s.self_bias);
  const Tensor score = ad::add(ad::add(ad::scale(ad::rowdot(q, k), 1.0 / std::sqrt(static_cast<double>(d))), dst_term), self);
  return ad::segment_softmax(score, pairs.src, num_vertices);
}

Tensor diffuse(const Tensor& z, const Tensor& weights, const AttentionPairs& pairs, double dtau, int steps) {
  Tensor out = z;
  const int n = z.rows();
  for (int m = 0; m < steps; ++m) {
    const Tensor az = ad::segment_sum(ad::mul_col(ad::gather_rows(out, pairs.dst), weights), pairs.src, n);
    // Written as Z + dtau (AZ - Z) so rows with A_ii = 1 stay bitwise fixed.
    out = ad::add(out, ad::scale(ad::sub(az, out), dtau));
  }
  return out;
}

Tensor diffformer(const PolicyParams& p, const Tensor& coords, const Tensor& h, const AttentionPairs& pairs) {
  Tensor z = coords;
  for (const Scorer& s : p.scorers) {
    z = diffuse(z, attention_weights(s, h, pairs, coords.rows()), pairs, p.config.dtau, p.config.euler_steps);
  }
  return z;
}

std::vector<double> displacement_caps(const Mesh& mesh, double fraction) {
  std::vector<double> caps(mesh.num_vertices(), INFINITY);
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    const double det = jacobian_det(mesh, static_cast<int>(e));
    for (int k = 0; k < 3; ++k) {
      const Vec2 b = mesh.corner(static_cast<int>(e), (k + 1) % 3);
      const Vec2 c = mesh.corner(static_cast<int>(e), (k + 2) % 3);
      const double height = det / distance(b, c);
      double& cap = caps[mesh.tris[e][k]];
      cap = std::min(cap, fraction * height);
    }
  }
  return caps;
}

Tensor cap_displacement(const Tensor& z0, const Tensor& z, std::span<const double> caps) {
  const int n = z.rows();
  if (static_cast<int>(caps.size()) != n) throw Error(ErrorCode::ShapeMismatch, "one cap per vertex expected");
  std::vector<double> log_cap(caps.size());
  for (std::size_t i = 0; i < caps.size(); ++i) log_cap[i] = std::log(caps[i]);
  const Tensor d = ad::sub(z, z0);
  // c = cap / sqrt(|d|^2 + tiny), evaluated in log space.
  const Tensor log_norm = ad::scale(ad::log(ad::add_scalar(ad::sum_cols(ad::square(d)), 1e-200)), 0.5);
  const Tensor ratio = ad::exp(ad::sub(Tensor::from(n, 1, std::move(log_cap)), log_norm));
  const Tensor c = ad::minimum(Tensor::full(n, 1, 1.0), ratio);
  return ad::add(z0, ad::mul_col(d, c));
}

Tensor mlp(const Mlp& m, const Tensor& x) {
  const Tensor h1 = ad::tanh(ad::add_row(ad::matmul(x, m.w1), m.b1));
  const Tensor h2 = ad::tanh(ad::add_row(ad::matmul(h1, m.w2), m.b2));
  return ad::add_row(ad::matmul(h2, m.w3), m.b3);
}

Tensor to_tensor(const features::Matrix& m) { return Tensor::from(m.rows, m.cols, m.data); }

Tensor coords_tensor(const Mesh& mesh) {
  std::vector<double> z(mesh.num_vertices() * 2);
  for (std::size_t v = 0; v < mesh.num_vertices(); ++v) {
    z[2 * v] = mesh.coords[v].x;
    z[2 * v + 1] = mesh.coords[v].y;
  }
  return Tensor::from(static_cast<int>(mesh.num_vertices()), 2, std::move(z));
}

PolicyOutput forward(const PolicyParams& p, const features::HypergraphState& state, const Mesh& mesh) {
  const auto& c = p.config;
  if (state.vertex_feats.cols != c.vertex_dim || state.elem_feats.cols != c.elem_dim) {
    throw Error(ErrorCode::ShapeMismatch, "feature widths do not match the policy configuration");
  }
  if (state.structure.num_vertices != static_cast<int>(mesh.num_vertices()) ||
      state.structure.num_elements != static_cast<int>(mesh.num_elements())) {
    throw Error(ErrorCode::ShapeMismatch, "state was not built from this mesh");
  }
  const Incidence inc = make_incidence(state.structure);
  const Tensor xf = to_tensor(state.vertex_feats);
  const Tensor ef = to_tensor(state.elem_feats);
  auto run = [&](const Backbone& b) {
    HConvOut h{ad::matmul(xf, b.w_v), ad::matmul(ef, b.w_e)};
    for (const HConvWeights& w : b.layers) h = hconv_layer(w, h.x, h.e, inc);
    return h;
  };
  const HConvOut vb = run(p.vertex_backbone);
  const HConvOut eb = run(p.elem_backbone);

  PolicyOutput out;
  const Tensor z0 = coords_tensor(mesh);
  out.vertex_mean = diffformer(p, z0, vb.x, attention_pairs(mesh, state.structure));
  if (c.max_move_fraction > 0.0) {
    out.vertex_mean = cap_displacement(z0, out.vertex_mean, displacement_caps(mesh, c.max_move_fraction));
  }
  std::vector<double> log_scale;
  log_scale.reserve(2 * mesh.num_vertices());
  for (double h : displacement_caps(mesh, 1.0)) log_scale.insert(log_scale.end(), 2, std::log(h));
  const int nv = static_cast<int>(mesh.num_vertices());
  out.vertex_log_std =
      ad::add(ad::clamp(mlp(p.vertex_cov, vb.x), c.log_std_min, c.log_std_max), Tensor::from(nv, 2, std::move(log_scale)));
  out.vertex_value = mlp(p.vertex_value, vb.x);
  out.elem_logit = mlp(p.elem_policy, eb.e);
  out.elem_value = mlp(p.elem_value, eb.e);
  check_finite(out.vertex_mean, "vertex mean");
  check_finite(out.vertex_log_std, "vertex log std");
  check_finite(out.vertex_value, "vertex value");
  check_finite(out.elem_logit, "element logit");
  check_finite(out.elem_value, "element value");
  return out;
}

Tensor vertex_log_prob(const PolicyOutput& out, const Mesh& mesh, std::span<const Vec2> coords) {
  if (coords.size() != mesh.num_vertices()) throw Error(ErrorCode::ShapeMismatch, "one action per vertex expected");
  const int n = static_cast<int>(mesh.num_vertices());
  std::vector<double> a(2 * coords.size());
  for (std::size_t v = 0; v < coords.size(); ++v) {
    a[2 * v] = coords[v].x;
    a[2 * v + 1] = coords[v].y;
  }
  const Tensor act = Tensor::from(n, 2, std::move(a));
  const Tensor interior = Tensor::from(n, 2, column_mask(mesh, BoundaryClass::Interior, 2));
  const Tensor edge = Tensor::from(n, 1, column_mask(mesh, BoundaryClass::Edge, 1));
  const Tensor t = tangents(mesh);
  const Tensor lp_int = ad::sum_cols(ad::mul(ad::gaussian_logprob(act, out.vertex_mean, out.vertex_log_std), interior));
  const Tensor lp_edge = ad::mul(
      ad::gaussian_logprob(ad::rowdot(act, t), ad::rowdot(out.vertex_mean, t), ad::slice_cols(out.vertex_log_std, 0, 1)),
      edge);
  return ad::add(lp_int, lp_edge);
}

Tensor elem_log_prob(const PolicyOutput& out, std::span<const std::uint8_t> flags) {
  if (static_cast<int>(flags.size()) != out.elem_logit.rows()) {
    throw Error(ErrorCode::ShapeMismatch, "one flag per element expected");
  }
  std::vector<double> a(flags.begin(), flags.end());
  const int n = static_cast<int>(a.size());
  return ad::bernoulli_logprob(Tensor::from(n, 1, std::move(a)), out.elem_logit);
}

Tensor vertex_entropy(const PolicyOutput& out, const Mesh& mesh) {
  const int n = static_cast<int>(mesh.num_vertices());
  const Tensor interior = Tensor::from(n, 2, column_mask(mesh, BoundaryClass::Interior, 2));
  const Tensor edge = Tensor::from(n, 1, column_mask(mesh, BoundaryClass::Edge, 1));
  const Tensor h = ad::gaussian_entropy(out.vertex_log_std);
  return ad::add(ad::sum_cols(ad::mul(h, interior)), ad::mul(ad::slice_cols(h, 0, 1), edge));
}

Tensor elem_entropy(const PolicyOutput& out) { return ad::bernoulli_entropy(out.elem_logit); }

Sample sample_actions(const PolicyOutput& out, const Mesh& mesh, std::mt19937_64& rng) {
  const std::size_t nv = mesh.num_vertices();
  std::normal_distribution<double> normal;
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Sample s;
  s.action.coords.resize(nv);
  const auto& mu = out.vertex_mean.data();
  const auto& ls = out.vertex_log_std.data();
  for (std::size_t v = 0; v < nv; ++v) {
    const Vec2 m{mu[2 * v], mu[2 * v + 1]};
    switch (mesh.boundary[v].kind) {
      case BoundaryClass::Interior:
        s.action.coords[v] = {m.x + std::exp(ls[2 * v]) * normal(rng), m.y + std::exp(ls[2 * v + 1]) * normal(rng)};
        break;
      case BoundaryClass::Edge: {
        const Vec2 t = mesh.components.at(mesh.boundary[v].component).tangent;
        s.action.coords[v] = m + t * (std::exp(ls[2 * v]) * normal(rng));
        break;
      }
      case BoundaryClass::Corner:
        s.action.coords[v] = m;
        break;
    }
  }
  const auto& logit = out.elem_logit.data();
  s.action.flags.resize(logit.size());
  for (std::size_t e = 0; e < logit.size(); ++e) {
    s.action.flags[e] = uniform(rng) < 1.0 / (1.0 + std::exp(-logit[e])) ? 1 : 0;
  }
  ad::NoGradGuard guard;
  s.vertex_logprob = vertex_log_prob(out, mesh, s.action.coords).data();
  s.elem_logprob = elem_log_prob(out, s.action.flags).data();
  return s;
}

Action mode_action(const PolicyOutput& out) {
  Action a;
  const auto& mu = out.vertex_mean.data();
  a.coords.resize(mu.size() / 2);
  for (std::size_t v = 0; v < a.coords.size(); ++v) a.coords[v] = {mu[2 * v], mu[2 * v + 1]};
  for (double l : out.elem_logit.data()) a.flags.push_back(l > 0.0 ? 1 : 0);
  return a;
}

Action inference_act(const PolicyParams& p, const features::HypergraphState& raw, const Mesh& mesh) {
  ad::NoGradGuard guard;
  return mode_action(forward(p, prepare_state(p, raw), mesh));
}

}  // namespace hrmesh::policy
