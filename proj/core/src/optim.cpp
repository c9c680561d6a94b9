#include "hrmesh/optim.hpp"

#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "hrmesh/error.hpp"

namespace hrmesh::ad {

Tensor ParamStore::add(const std::string& name, int rows, int cols, std::vector<double> init,
                       const std::string& group) {
  if (contains(name)) throw Error(ErrorCode::InvalidArgument, "duplicate parameter name " + name);
  Tensor t = Tensor::from(rows, cols, std::move(init), true);
  Entry e{name, group, t, std::vector<double>(t.size(), 0.0), std::vector<double>(t.size(), 0.0), 0};
  entries_.push_back(std::move(e));
  return t;
}

Tensor ParamStore::get(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return e.param;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown parameter " + name);
}

bool ParamStore::contains(const std::string& name) const {
  for (const Entry& e : entries_) {
    if (e.name == name) return true;
  }
  return false;
}

std::size_t ParamStore::num_scalars(const std::string& group) const {
  std::size_t n = 0;
  for (const Entry& e : entries_) {
    if (group.empty() || e.group == group) n += e.param.size();
  }
  return n;
}

void ParamStore::zero_grad() {
  for (Entry& e : entries_) {
    e.param.mutable_grad().assign(e.param.size(), 0.0);
  }
}

double ParamStore::grad_norm(const std::set<std::string>& frozen) const {
  double sq = 0.0;
  for (const Entry& e : entries_) {
    if (frozen.count(e.group)) continue;
    for (double g : e.param.grad()) sq += g * g;
  }
  return std::sqrt(sq);
}

AdamReport ParamStore::adam_step(const AdamConfig& config, const std::set<std::string>& frozen) {
  AdamReport report;
  report.grad_norm = grad_norm(frozen);
  if (!std::isfinite(report.grad_norm)) {
    throw Error(ErrorCode::NonFinite, "non-finite gradient; optimizer step aborted");
  }
  if (config.grad_clip_norm > 0.0 && report.grad_norm > config.grad_clip_norm) {
    report.clip_scale = config.grad_clip_norm / report.grad_norm;
  }
  ++step_;
  for (Entry& e : entries_) {
    if (frozen.count(e.group)) continue;
    const auto& grad = e.param.grad();
    if (grad.empty()) continue;
    ++e.steps;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(e.steps));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(e.steps));
    auto& w = e.param.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double g = grad[i] * report.clip_scale;
      e.m[i] = config.beta1 * e.m[i] + (1.0 - config.beta1) * g;
      e.v[i] = config.beta2 * e.v[i] + (1.0 - config.beta2) * g * g;
      const double mhat = e.m[i] / bc1;
      const double vhat = e.v[i] / bc2;
      w[i] -= config.lr * mhat / (std::sqrt(vhat) + config.eps);
    }
  }
  return report;
}

std::vector<double> ParamStore::flatten(const std::string& group) const {
  std::vector<double> out;
  for (const Entry& e : entries_) {
    if (group.empty() || e.group == group) out.insert(out.end(), e.param.data().begin(), e.param.data().end());
  }
  return out;
}

std::vector<double> glorot_uniform(int fan_in, int fan_out, std::mt19937_64& rng, double gain) {
  const double limit = gain * std::sqrt(6.0 / (fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  std::vector<double> out(static_cast<std::size_t>(fan_in) * fan_out);
  for (double& v : out) v = u(rng);
  return out;
}

void save_checkpoint(const std::string& path, const ParamStore& store, const std::string& header_json) {
  using nlohmann::json;
  json j;
  j["header"] = json::parse(header_json);
  json params = json::object();
  json moments = json::object();
  for (const auto& e : store.entries()) {
    params[e.name] = {{"shape", {e.param.rows(), e.param.cols()}}, {"group", e.group}, {"data", e.param.data()}};
    moments[e.name] = {{"m", e.m}, {"v", e.v}, {"steps", e.steps}};
  }
  j["params"] = params;
  j["optimizer"] = {{"step", store.step()}, {"moments", moments}};
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  os << j.dump() << '\n';
}

std::string load_checkpoint(const std::string& path, ParamStore& store) {
  using nlohmann::json;
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  json j;
  try {
    is >> j;
    for (auto& e : store.entries()) {
      const json& p = j.at("params").at(e.name);
      const auto shape = p.at("shape").get<std::vector<int>>();
      if (shape.size() != 2 || shape[0] != e.param.rows() || shape[1] != e.param.cols()) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint shape mismatch for " + e.name);
      }
      auto data = p.at("data").get<std::vector<double>>();
      if (data.size() != e.param.size()) {
        throw Error(ErrorCode::ShapeMismatch, "checkpoint data length mismatch for " + e.name);
      }
      e.param.mutable_data() = std::move(data);
      const json& opt = j.at("optimizer");
      if (opt.at("moments").contains(e.name)) {
        const json& m = opt.at("moments").at(e.name);
        e.m = m.at("m").get<std::vector<double>>();
        e.v = m.at("v").get<std::vector<double>>();
        e.steps = m.at("steps").get<std::int64_t>();
      }
    }
    store.set_step(j.at("optimizer").at("step").get<std::int64_t>());
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("malformed checkpoint: ") + ex.what());
  }
  return j.at("header").dump();
}

std::string read_checkpoint_header(const std::string& path) {
  using nlohmann::json;
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  try {
    json j;
    is >> j;
    return j.at("header").dump();
  } catch (const json::exception& ex) {
    throw Error(ErrorCode::Parse, std::string("malformed checkpoint: ") + ex.what());
  }
}

}  // namespace hrmesh::ad
