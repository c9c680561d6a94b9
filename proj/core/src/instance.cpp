#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>
#include <sstream>

#include "hrmesh/error.hpp"
#include "hrmesh/fem.hpp"

namespace hrmesh::fem {
namespace {

using nlohmann::json;

constexpr int kMaxDraws = 10000;

json vec(Vec2 p) { return json::array({p.x, p.y}); }

Vec2 to_vec(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>()}; }

std::string domain_kind_name(DomainKind kind) {
  switch (kind) {
    case DomainKind::LShape:
      return "l_shape";
    case DomainKind::UnitSquare:
      return "unit_square";
    case DomainKind::ConvexPolygon:
      return "convex_polygon";
  }
  return "unit_square";
}

DomainKind domain_kind_from(const std::string& name) {
  if (name == "l_shape") return DomainKind::LShape;
  if (name == "unit_square") return DomainKind::UnitSquare;
  if (name == "convex_polygon") return DomainKind::ConvexPolygon;
  throw Error(ErrorCode::Parse, "unknown domain kind: " + name);
}

// Uniform point of [lo,hi]^2 strictly inside the domain.
Vec2 draw_inside(const Domain& domain, double lo, double hi, std::mt19937_64& rng, int& draws) {
  std::uniform_real_distribution<double> u(lo, hi);
  while (draws < kMaxDraws) {
    ++draws;
    const Vec2 p{u(rng), u(rng)};
    if (contains(domain, p, 0.0) && boundary_distance(domain, p) > 0.0) return p;
  }
  throw Error(ErrorCode::InfeasibleGeometry, "rejection sampling exhausted after 10000 draws");
}

}  // namespace

ProblemInstance sample_poisson_instance(std::uint64_t seed, int target_elements) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> corner(0.2, 0.95);
  ProblemInstance inst;
  inst.kind = ProblemKind::Poisson;
  const double px = corner(rng);
  const double py = corner(rng);
  inst.domain = DomainSpec::l_shape({px, py});
  inst.mesh_seed = seed;
  inst.target_elements = target_elements;

  const Domain domain = make_domain(inst.domain);
  std::uniform_real_distribution<double> log_var(std::log(1e-4), std::log(1e-3));
  std::uniform_real_distribution<double> angle(0.0, std::numbers::pi);
  std::normal_distribution<double> normal(0.0, 1.0);
  int draws = 0;
  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    GaussianComponent g;
    g.mean = draw_inside(domain, 0.1, 0.9, rng, draws);
    const double v1 = std::exp(log_var(rng));
    const double v2 = std::exp(log_var(rng));
    const double phi = angle(rng);
    const double cs = std::cos(phi), sn = std::sin(phi);
    // R diag(v1, v2) R^T
    g.cxx = cs * cs * v1 + sn * sn * v2;
    g.cxy = cs * sn * (v1 - v2);
    g.cyy = sn * sn * v1 + cs * cs * v2;
    g.weight = std::exp(normal(rng)) + 1.0;
    total += g.weight;
    inst.gmm.push_back(g);
  }
  for (GaussianComponent& g : inst.gmm) g.weight /= total;
  return inst;
}

ProblemInstance sample_heat_instance(std::uint64_t seed, int target_elements) {
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
  ProblemInstance inst;
  inst.kind = ProblemKind::Heat;
  inst.domain = DomainSpec::convex_polygon(seed);
  inst.mesh_seed = seed;
  inst.target_elements = target_elements;
  const Domain domain = make_domain(inst.domain);
  int draws = 0;
  inst.heat.start = draw_inside(domain, 0.0, 1.0, rng, draws);
  inst.heat.end = draw_inside(domain, 0.0, 1.0, rng, draws);
  return inst;
}

ProblemInstance sample_instance(ProblemKind kind, std::uint64_t seed, int target_elements) {
  return kind == ProblemKind::Poisson ? sample_poisson_instance(seed, target_elements)
                                      : sample_heat_instance(seed, target_elements);
}

std::string instance_to_json(const ProblemInstance& inst) {
  json j;
  j["kind"] = std::string(to_string(inst.kind));
  j["domain"] = {{"kind", domain_kind_name(inst.domain.kind)}, {"p0", vec(inst.domain.p0)}, {"seed", inst.domain.seed}};
  j["mesh_seed"] = inst.mesh_seed;
  j["target_elements"] = inst.target_elements;
  json gmm = json::array();
  for (const GaussianComponent& g : inst.gmm) {
    gmm.push_back({{"mean", vec(g.mean)}, {"cov", {g.cxx, g.cxy, g.cyy}}, {"weight", g.weight}});
  }
  j["gmm"] = gmm;
  const HeatParams& h = inst.heat;
  j["heat"] = {{"start", vec(h.start)},         {"end", vec(h.end)},   {"diffusivity", h.diffusivity},
               {"amplitude", h.amplitude},     {"decay", h.decay},    {"steps", h.steps},
               {"dt", h.dt}};
  return j.dump(2);
}

ProblemInstance instance_from_json(const std::string& text) {
  try {
    const json j = json::parse(text);
    ProblemInstance inst;
    inst.kind = problem_kind_from_string(j.at("kind").get<std::string>());
    const json& d = j.at("domain");
    inst.domain.kind = domain_kind_from(d.at("kind").get<std::string>());
    inst.domain.p0 = to_vec(d.at("p0"));
    inst.domain.seed = d.at("seed").get<std::uint64_t>();
    inst.mesh_seed = j.at("mesh_seed").get<std::uint64_t>();
    inst.target_elements = j.at("target_elements").get<int>();
    for (const json& g : j.at("gmm")) {
      GaussianComponent c;
      c.mean = to_vec(g.at("mean"));
      const json& cov = g.at("cov");
      c.cxx = cov.at(0).get<double>();
      c.cxy = cov.at(1).get<double>();
      c.cyy = cov.at(2).get<double>();
      c.weight = g.at("weight").get<double>();
      if (!(c.weight > 0.0) || !(c.cxx > 0.0) || !(c.cxx * c.cyy - c.cxy * c.cxy > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "GMM component is not a positive-weight SPD Gaussian");
      }
      inst.gmm.push_back(c);
    }
    const json& h = j.at("heat");
    inst.heat.start = to_vec(h.at("start"));
    inst.heat.end = to_vec(h.at("end"));
    inst.heat.diffusivity = h.at("diffusivity").get<double>();
    inst.heat.amplitude = h.at("amplitude").get<double>();
    inst.heat.decay = h.at("decay").get<double>();
    inst.heat.steps = h.at("steps").get<int>();
    inst.heat.dt = h.at("dt").get<double>();
    return inst;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("malformed instance JSON: ") + e.what());
  }
}

void save_instance(const std::string& path, const ProblemInstance& instance) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorCode::Io, "cannot open " + path + " for writing");
  os << instance_to_json(instance) << '\n';
}

ProblemInstance load_instance(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw Error(ErrorCode::Io, "cannot open " + path);
  std::stringstream ss;
  ss << is.rdbuf();
  return instance_from_json(ss.str());
}

}  // namespace hrmesh::fem
