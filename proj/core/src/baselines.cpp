#include "hrmesh/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <string>

#include "hrmesh/error.hpp"
#include "hrmesh/features.hpp"

namespace hrmesh::baselines {

std::string_view to_string(HeuristicKind kind) {
  switch (kind) {
    case HeuristicKind::Uniform:
      return "uniform";
    case HeuristicKind::Oracle:
      return "oracle";
    case HeuristicKind::Zz:
      return "zz";
  }
  return "?";
}

HeuristicKind heuristic_kind_from_string(std::string_view name) {
  if (name == "uniform") return HeuristicKind::Uniform;
  if (name == "oracle") return HeuristicKind::Oracle;
  if (name == "zz") return HeuristicKind::Zz;
  throw Error(ErrorCode::InvalidArgument, "unknown heuristic '" + std::string(name) + "'");
}

void validate(const HeuristicConfig& c) {
  if (!(c.theta >= 0.0 && c.theta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "theta must lie in [0, 1]");
  if (c.steps < 1) throw Error(ErrorCode::InvalidArgument, "steps must be at least 1");
  if (c.kind == HeuristicKind::Zz && (c.initial_uniform_steps < 0 || c.initial_uniform_steps > 2)) {
    throw Error(ErrorCode::InvalidArgument, "zz initial uniform steps must be 0, 1 or 2");
  }
}

std::vector<std::uint8_t> threshold_mark(std::span<const double> indicator, double theta) {
  std::vector<std::uint8_t> flags(indicator.size(), 0);
  double peak = 0.0;
  for (double x : indicator) peak = std::max(peak, x);
  if (!(peak > 0.0)) return flags;
  const double cut = theta * peak;
  for (std::size_t k = 0; k < indicator.size(); ++k) flags[k] = indicator[k] >= cut ? 1 : 0;
  return flags;
}

std::vector<std::uint8_t> oracle_mark(const Mesh& mesh, const fem::Field& field, const fem::Reference& ref,
                                      double theta) {
  return threshold_mark(fem::compute_indicators(mesh, field, ref).eta_inf, theta);
}

namespace {

// Solves the symmetric 3x3 system a x = b by Cramer's rule; false when singular.
bool solve3(const double a[3][3], const double b[3], double x[3]) {
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  double scale = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) scale = std::max(scale, std::abs(a[i][j]));
  }
  if (!(std::abs(det) > 1e-12 * scale * scale * scale)) return false;
  for (int c = 0; c < 3; ++c) {
    double m[3][3];
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) m[i][j] = j == c ? b[i] : a[i][j];
    }
    x[c] = (m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0]) +
            m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])) /
           det;
  }
  return true;
}

}  // namespace

std::vector<Vec2> recover_gradient(const Mesh& mesh, const fem::Field& field) {
  const auto grads = features::gradient_per_element(mesh, field);
  const features::Structure s = features::build_structure(mesh);
  std::vector<double> area(mesh.num_elements());
  std::vector<Vec2> centroid(mesh.num_elements());
  for (std::size_t e = 0; e < area.size(); ++e) {
    area[e] = element_area(mesh, static_cast<int>(e));
    centroid[e] = element_centroid(mesh, static_cast<int>(e));
  }
  std::vector<Vec2> out(mesh.num_vertices());
  for (std::size_t v = 0; v < out.size(); ++v) {
    const auto patch = s.incident(static_cast<int>(v));
    const Vec2 xv = mesh.coords[v];
    double w_sum = 0.0;
    Vec2 mean{0, 0};
    for (int e : patch) {
      w_sum += area[e];
      mean = mean + grads[e] * area[e];
    }
    out[v] = mean * (1.0 / w_sum);
    if (patch.size() < 3) continue;
    // Weighted normal equations for g(x) = c + B (x - x_v), one per gradient component.
    double a[3][3] = {};
    double bx[3] = {}, by[3] = {};
    for (int e : patch) {
      const double p[3] = {1.0, centroid[e].x - xv.x, centroid[e].y - xv.y};
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) a[i][j] += area[e] * p[i] * p[j];
        bx[i] += area[e] * p[i] * grads[e].x;
        by[i] += area[e] * p[i] * grads[e].y;
      }
    }
    double cx[3], cy[3];
    if (solve3(a, bx, cx) && solve3(a, by, cy)) out[v] = {cx[0], cy[0]};
  }
  return out;
}

std::vector<double> zz_estimate(const Mesh& mesh, const fem::Field& field) {
  const auto grads = features::gradient_per_element(mesh, field);
  const auto recovered = recover_gradient(mesh, field);
  std::vector<double> eta(mesh.num_elements());
  for (std::size_t e = 0; e < eta.size(); ++e) {
    double sq = 0.0;
    for (int v : mesh.tris[e]) {
      const Vec2 d = recovered[v] - grads[e];
      sq += dot(d, d);
    }
    eta[e] = std::sqrt(element_area(mesh, static_cast<int>(e)) * sq / 3.0);
  }
  return eta;
}

HeuristicResult run_heuristic(const HeuristicConfig& config, const env::InstanceData& data) {
  validate(config);
  HeuristicResult res;
  Mesh mesh = data.initial_mesh;
  if (config.kind == HeuristicKind::Zz) mesh = uniform_refine(mesh, config.initial_uniform_steps);
  fem::Field field = fem::solve(mesh, data.instance);
  for (int step = 0; step < config.steps; ++step) {
    std::vector<std::uint8_t> flags;
    switch (config.kind) {
      case HeuristicKind::Uniform:
        flags.assign(mesh.num_elements(), 1);
        break;
      case HeuristicKind::Oracle:
        flags = oracle_mark(mesh, field, *data.ref, config.theta);
        break;
      case HeuristicKind::Zz:
        flags = threshold_mark(zz_estimate(mesh, field), config.theta);
        break;
    }
    TrajectoryStep t;
    t.step = step;
    t.elements_before = static_cast<int>(mesh.num_elements());
    t.refined = static_cast<int>(std::count(flags.begin(), flags.end(), std::uint8_t{1}));
    mesh = rgb_refine(mesh, flags).mesh;
    field = fem::solve(mesh, data.instance);
    t.elements = static_cast<int>(mesh.num_elements());
    t.error_rel = fem::relative_error_sq(fem::compute_indicators(mesh, field, *data.ref).total_sq,
                                         data.initial_error_sq);
    res.trajectory.push_back(t);
  }
  res.elements = static_cast<int>(mesh.num_elements());
  res.error_rel = res.trajectory.back().error_rel;
  res.mesh = std::move(mesh);
  res.field = std::move(field);
  return res;
}

void write_trajectory_log(std::ostream& os, std::span<const TrajectoryStep> trajectory) {
  for (const TrajectoryStep& t : trajectory) {
    nlohmann::json j{{"step", t.step},      {"elements", t.elements}, {"err_rel", t.error_rel},
                     {"displacement", 0.0}, {"tangled", false},       {"refined", t.refined}};
    os << j.dump() << '\n';
  }
}

}  // namespace hrmesh::baselines
