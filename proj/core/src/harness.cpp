#include "hrmesh/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <nlohmann/json.hpp>
#include <numbers>
#include <random>
#include <sstream>

#include "hrmesh/error.hpp"
#include "hrmesh/features.hpp"
#include "hrmesh/mesh_io.hpp"
#include "parallel.hpp"

namespace hrmesh::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require(bool ok, const char* msg) {
  if (!ok) throw Error(ErrorCode::InvalidArgument, msg);
}

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

}  // namespace

void validate(const ExperimentConfig& c) {
  require(c.train_count >= 1 && c.eval_count >= 1, "dataset counts must be at least 1");
  require(static_cast<std::uint64_t>(std::max(c.train_count, c.eval_count)) < kEvalOffset,
          "dataset counts exceed the seed partition");
  require(c.target_elements >= 2, "target_elements must be at least 2");
  require(c.ref_depth >= 1, "ref_depth must be at least 1");
  require(c.horizon >= 1, "horizon must be at least 1");
  require(c.alpha_count >= 1 && c.theta_count >= 1, "sweep counts must be at least 1");
  require(c.alpha_min > 0.0 && c.alpha_max >= c.alpha_min, "alpha range must be positive and ordered");
  require(c.oracle_theta_min >= 0.0 && c.zz_theta_min >= 0.0, "theta lower bounds must be non-negative");
  require(c.theta_max <= 1.0 && c.theta_max >= std::max(c.oracle_theta_min, c.zz_theta_min),
          "theta range must be ordered within [0, 1]");
  require(c.uniform_levels >= 0 && c.uniform_levels <= c.ref_depth, "uniform_levels must lie in [0, ref_depth]");
  require(c.threads >= 1, "threads must be positive");
  require(!c.output_dir.empty(), "output_dir must not be empty");
}

std::string config_to_json(const ExperimentConfig& c) {
  json j{{"kind", std::string(fem::to_string(c.kind))},
         {"train_count", c.train_count},
         {"eval_count", c.eval_count},
         {"target_elements", c.target_elements},
         {"ref_depth", c.ref_depth},
         {"horizon", c.horizon},
         {"alpha_count", c.alpha_count},
         {"alpha_min", c.alpha_min},
         {"alpha_max", c.alpha_max},
         {"theta_count", c.theta_count},
         {"oracle_theta_min", c.oracle_theta_min},
         {"zz_theta_min", c.zz_theta_min},
         {"theta_max", c.theta_max},
         {"uniform_levels", c.uniform_levels},
         {"seed", c.seed},
         {"output_dir", c.output_dir},
         {"threads", c.threads},
         {"record_time", c.record_time}};
  return j.dump(2);
}

ExperimentConfig config_from_json(const std::string& text, ExperimentConfig c) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("experiment config: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorCode::Parse, "experiment config must be a JSON object");
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      const json& v = it.value();
      if (k == "kind") c.kind = fem::problem_kind_from_string(v.get<std::string>());
      else if (k == "train_count") c.train_count = v.get<int>();
      else if (k == "eval_count") c.eval_count = v.get<int>();
      else if (k == "target_elements") c.target_elements = v.get<int>();
      else if (k == "ref_depth") c.ref_depth = v.get<int>();
      else if (k == "horizon") c.horizon = v.get<int>();
      else if (k == "alpha_count") c.alpha_count = v.get<int>();
      else if (k == "alpha_min") c.alpha_min = v.get<double>();
      else if (k == "alpha_max") c.alpha_max = v.get<double>();
      else if (k == "theta_count") c.theta_count = v.get<int>();
      else if (k == "oracle_theta_min") c.oracle_theta_min = v.get<double>();
      else if (k == "zz_theta_min") c.zz_theta_min = v.get<double>();
      else if (k == "theta_max") c.theta_max = v.get<double>();
      else if (k == "uniform_levels") c.uniform_levels = v.get<int>();
      else if (k == "seed") c.seed = v.get<std::uint64_t>();
      else if (k == "output_dir") c.output_dir = v.get<std::string>();
      else if (k == "threads") c.threads = v.get<int>();
      else if (k == "record_time") c.record_time = v.get<bool>();
      else throw Error(ErrorCode::Parse, "unknown experiment config key '" + k + "'");
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Parse, std::string("experiment config: ") + e.what());
  }
  return c;
}

std::vector<double> alpha_sweep(const ExperimentConfig& c) {
  validate(c);
  if (c.alpha_count == 1) return {std::sqrt(c.alpha_min * c.alpha_max)};
  std::vector<double> out(c.alpha_count);
  const double lo = std::log(c.alpha_min), hi = std::log(c.alpha_max);
  for (int i = 0; i < c.alpha_count; ++i) out[i] = std::exp(lo + (hi - lo) * i / (c.alpha_count - 1));
  out.front() = c.alpha_min;
  out.back() = c.alpha_max;
  return out;
}

std::vector<double> theta_sweep(const ExperimentConfig& c, baselines::HeuristicKind kind) {
  validate(c);
  const double lo = kind == baselines::HeuristicKind::Zz ? c.zz_theta_min : c.oracle_theta_min;
  if (c.theta_count == 1) return {0.5 * (lo + c.theta_max)};
  std::vector<double> out(c.theta_count);
  for (int i = 0; i < c.theta_count; ++i) out[i] = lo + (c.theta_max - lo) * i / (c.theta_count - 1);
  out.back() = c.theta_max;
  return out;
}

std::uint64_t instance_seed(const ExperimentConfig& c, Split split, int index) {
  return c.seed * kSplitStride + (split == Split::Eval ? kEvalOffset : 0) + static_cast<std::uint64_t>(index);
}

std::string split_dir(const ExperimentConfig& c, Split split) {
  return (fs::path(c.output_dir) / "dataset" / (split == Split::Train ? "train" : "eval")).string();
}

InstancePaths instance_paths(const ExperimentConfig& c, Split split, int index) {
  char stem[16];
  std::snprintf(stem, sizeof stem, "%04d", index);
  const fs::path base = fs::path(split_dir(c, split)) / stem;
  return {base.string() + ".json", base.string() + ".mesh", base.string() + ".ref.mesh",
          base.string() + ".ref.field"};
}

void gen_dataset(const ExperimentConfig& c) {
  validate(c);
  for (Split split : {Split::Train, Split::Eval}) {
    fs::create_directories(split_dir(c, split));
    const int n = split == Split::Train ? c.train_count : c.eval_count;
    detail::parallel_for(n, c.threads, [&](int i) {
      const fem::ProblemInstance inst = fem::sample_instance(c.kind, instance_seed(c, split, i), c.target_elements);
      const Mesh mesh = env::initial_mesh(inst);
      const fem::Reference ref = fem::build_reference(mesh, inst, c.ref_depth);
      const InstancePaths p = instance_paths(c, split, i);
      fem::save_instance(p.instance, inst);
      save_mesh(p.mesh, mesh);
      save_mesh(p.ref_mesh, ref.mesh);
      save_field(p.ref_field, ref.field.values);
    });
  }
  std::ofstream manifest(fs::path(c.output_dir) / "dataset" / "manifest.json");
  if (!manifest) throw Error(ErrorCode::Io, "cannot write dataset manifest");
  manifest << config_to_json(c) << '\n';
}

std::vector<std::shared_ptr<const env::InstanceData>> load_split(const ExperimentConfig& c, Split split) {
  validate(c);
  const int n = split == Split::Train ? c.train_count : c.eval_count;
  std::vector<std::shared_ptr<const env::InstanceData>> out(n);
  detail::parallel_for(n, c.threads, [&](int i) {
    const InstancePaths p = instance_paths(c, split, i);
    fem::ProblemInstance inst = fem::load_instance(p.instance);
    Mesh ref_mesh = load_mesh(p.ref_mesh);
    fem::Field ref_field = fem::make_field(ref_mesh, load_field(p.ref_field));
    fem::Reference ref = fem::make_reference(std::move(ref_mesh), std::move(ref_field));
    out[i] = env::prepare_instance(inst, load_mesh(p.mesh), std::move(ref));
  });
  return out;
}

void write_rows(std::ostream& os, std::span<const EvalRow> rows) {
  os << kCsvHeader << '\n';
  for (const EvalRow& r : rows) {
    os << r.method << ',' << format_double(r.param) << ',' << r.elements << ',' << format_double(r.err_rel) << ','
       << format_double(r.time_s) << ',' << format_double(r.displacement) << '\n';
  }
}

std::vector<EvalRow> read_rows(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCsvHeader) throw Error(ErrorCode::Parse, "unexpected CSV header");
  std::vector<EvalRow> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::vector<std::string> cells;
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (cells.size() != 6) throw Error(ErrorCode::Parse, "CSV row needs 6 columns: " + line);
    EvalRow r;
    try {
      r.method = cells[0];
      r.param = std::stod(cells[1]);
      r.elements = std::stoi(cells[2]);
      r.err_rel = std::stod(cells[3]);
      r.time_s = std::stod(cells[4]);
      r.displacement = std::stod(cells[5]);
    } catch (const std::exception&) {
      throw Error(ErrorCode::Parse, "malformed CSV row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::vector<EvalRow> eval_reference_rows(const ExperimentConfig& c,
                                         std::span<const std::shared_ptr<const env::InstanceData>> data) {
  validate(c);
  const int levels = c.uniform_levels + 1;
  std::vector<EvalRow> rows(data.size() * levels);
  detail::parallel_for(static_cast<int>(rows.size()), c.threads, [&](int idx) {
    const int i = idx / levels, k = idx % levels;
    const env::InstanceData& d = *data[i];
    EvalRow& r = rows[idx];
    r.instance = i;
    r.param = k;
    if (k == 0) {
      r.method = "initial";
      r.elements = static_cast<int>(d.initial_mesh.num_elements());
      r.err_rel = 1.0;
      return;
    }
    r.method = "uniform";
    const auto t0 = Clock::now();
    const Mesh m = uniform_refine(d.initial_mesh, k);
    const fem::Field u = fem::solve(m, d.instance);
    r.time_s = c.record_time ? seconds_since(t0) : 0.0;
    r.elements = static_cast<int>(m.num_elements());
    r.err_rel = fem::relative_error_sq(fem::compute_indicators(m, u, *d.ref).total_sq, d.initial_error_sq);
  });
  return rows;
}

std::vector<EvalRow> eval_policy(const ExperimentConfig& c, const policy::PolicyParams& params,
                                 std::span<const std::shared_ptr<const env::InstanceData>> data) {
  const std::vector<double> alphas = alpha_sweep(c);
  env::EnvConfig ecfg;
  ecfg.horizon = c.horizon;
  ecfg.ref_depth = c.ref_depth;
  ecfg.alpha_min = c.alpha_min;
  ecfg.alpha_max = c.alpha_max;
  const int na = static_cast<int>(alphas.size());
  std::vector<EvalRow> rows(data.size() * alphas.size());
  detail::parallel_for(static_cast<int>(rows.size()), c.threads, [&](int idx) {
    const int i = idx / na;
    const auto t0 = Clock::now();
    const env::InferenceResult res = env::run_inference(data[i], ecfg, params, alphas[idx % na]);
    const double t = seconds_since(t0);
    rows[idx] = {"hr", alphas[idx % na], i, res.elements, res.error_rel, c.record_time ? t : 0.0, res.displacement};
  });
  return rows;
}

std::vector<EvalRow> eval_heuristic(const ExperimentConfig& c, baselines::HeuristicKind kind,
                                    std::span<const std::shared_ptr<const env::InstanceData>> data) {
  const std::vector<double> thetas = theta_sweep(c, kind);
  const int nt = static_cast<int>(thetas.size());
  const std::string name(baselines::to_string(kind));
  std::vector<EvalRow> rows(data.size() * thetas.size());
  detail::parallel_for(static_cast<int>(rows.size()), c.threads, [&](int idx) {
    const int i = idx / nt;
    baselines::HeuristicConfig h;
    h.kind = kind;
    h.theta = thetas[idx % nt];
    h.steps = c.horizon;
    const auto t0 = Clock::now();
    const baselines::HeuristicResult res = baselines::run_heuristic(h, *data[i]);
    const double t = seconds_since(t0);
    rows[idx] = {name, h.theta, i, res.elements, res.error_rel, c.record_time ? t : 0.0, 0.0};
  });
  return rows;
}

std::vector<Aggregate> aggregate(std::span<const EvalRow> rows) {
  std::vector<Aggregate> out;
  std::vector<std::vector<const EvalRow*>> groups;
  std::map<std::pair<std::string, double>, std::size_t> index;
  for (const EvalRow& r : rows) {
    auto [it, inserted] = index.try_emplace({r.method, r.param}, out.size());
    if (inserted) {
      out.push_back({r.method, r.param});
      groups.emplace_back();
    }
    groups[it->second].push_back(&r);
  }
  for (std::size_t g = 0; g < out.size(); ++g) {
    Aggregate& a = out[g];
    const auto& members = groups[g];
    const double n = static_cast<double>(members.size());
    a.count = static_cast<int>(members.size());
    for (const EvalRow* r : members) {
      a.elements_mean += r->elements / n;
      a.err_rel_mean += r->err_rel / n;
      a.time_s_mean += r->time_s / n;
      a.displacement_mean += r->displacement / n;
    }
    for (const EvalRow* r : members) {
      a.elements_std += std::pow(r->elements - a.elements_mean, 2) / n;
      a.err_rel_std += std::pow(r->err_rel - a.err_rel_mean, 2) / n;
    }
    a.elements_std = std::sqrt(a.elements_std);
    a.err_rel_std = std::sqrt(a.err_rel_std);
  }
  return out;
}

void write_aggregates(std::ostream& os, std::span<const Aggregate> aggs) {
  os << "method,alpha_or_theta,count,elements_mean,elements_std,err_rel_mean,err_rel_std,time_s_mean,"
        "displacement_mean\n";
  for (const Aggregate& a : aggs) {
    os << a.method << ',' << format_double(a.param) << ',' << a.count << ',' << format_double(a.elements_mean) << ','
       << format_double(a.elements_std) << ',' << format_double(a.err_rel_mean) << ','
       << format_double(a.err_rel_std) << ',' << format_double(a.time_s_mean) << ','
       << format_double(a.displacement_mean) << '\n';
  }
}

std::vector<Aggregate> pareto_front(std::span<const Aggregate> aggs, const std::string& method) {
  std::vector<Aggregate> pts;
  for (const Aggregate& a : aggs) {
    if (a.method == method) pts.push_back(a);
  }
  std::sort(pts.begin(), pts.end(), [](const Aggregate& a, const Aggregate& b) {
    return a.elements_mean != b.elements_mean ? a.elements_mean < b.elements_mean : a.err_rel_mean < b.err_rel_mean;
  });
  std::vector<Aggregate> front;
  for (const Aggregate& a : pts) {
    if (front.empty() || a.err_rel_mean < front.back().err_rel_mean) front.push_back(a);
  }
  return front;
}

bool dominates(const Aggregate& a, const Aggregate& b) {
  return a.elements_mean < b.elements_mean && a.err_rel_mean < b.err_rel_mean;
}

namespace {

// Blue (0) to red (1) through white.
std::string ramp(double t) {
  t = std::clamp(std::isfinite(t) ? t : 0.0, 0.0, 1.0);
  int r, g, b;
  if (t < 0.5) {
    const double s = t / 0.5;
    r = static_cast<int>(std::lround(59 + s * (255 - 59)));
    g = static_cast<int>(std::lround(76 + s * (255 - 76)));
    b = static_cast<int>(std::lround(192 + s * (255 - 192)));
  } else {
    const double s = (t - 0.5) / 0.5;
    r = static_cast<int>(std::lround(255 + s * (180 - 255)));
    g = static_cast<int>(std::lround(255 + s * (4 - 255)));
    b = static_cast<int>(std::lround(255 + s * (38 - 255)));
  }
  char buf[8];
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
  return buf;
}

}  // namespace

std::string render_svg(const Mesh& mesh, const std::optional<fem::Field>& field, const RenderOptions& options) {
  if (mesh.num_vertices() == 0) throw Error(ErrorCode::InvalidArgument, "cannot render an empty mesh");
  if (field) fem::check_field(mesh, *field);
  double xmin = mesh.coords[0].x, xmax = xmin, ymin = mesh.coords[0].y, ymax = ymin;
  for (const Vec2& p : mesh.coords) {
    xmin = std::min(xmin, p.x);
    xmax = std::max(xmax, p.x);
    ymin = std::min(ymin, p.y);
    ymax = std::max(ymax, p.y);
  }
  const double span = std::max({xmax - xmin, ymax - ymin, 1e-300});
  const double inner = options.size_px - 2.0 * options.margin_px;
  const double s = inner / span;
  const int width = static_cast<int>(std::lround((xmax - xmin) * s + 2 * options.margin_px));
  const int height = static_cast<int>(std::lround((ymax - ymin) * s + 2 * options.margin_px));

  double lo = 0.0, hi = 1.0;
  if (field && !field->values.empty()) {
    lo = *std::min_element(field->values.begin(), field->values.end());
    hi = *std::max_element(field->values.begin(), field->values.end());
  }
  std::vector<std::uint8_t> inverted(mesh.num_elements(), 0);
  for (int e : detect_tangled(mesh)) inverted[e] = 1;

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
     << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"#ffffff\"/>\n";
  char buf[64];
  for (std::size_t e = 0; e < mesh.num_elements(); ++e) {
    std::string fill = "none";
    if (field) {
      const Triangle& t = mesh.tris[e];
      const double mean = (field->values[t[0]] + field->values[t[1]] + field->values[t[2]]) / 3.0;
      fill = ramp(hi > lo ? (mean - lo) / (hi - lo) : 0.5);
    } else if (options.quality_fill) {
      fill = ramp((aspect_ratio(mesh, static_cast<int>(e)) - 1.0) / 3.0);
    }
    os << "<polygon points=\"";
    for (int k = 0; k < 3; ++k) {
      const Vec2 p = mesh.corner(static_cast<int>(e), k);
      std::snprintf(buf, sizeof buf, "%s%.3f,%.3f", k ? " " : "", options.margin_px + (p.x - xmin) * s,
                    options.margin_px + (ymax - p.y) * s);
      os << buf;
    }
    os << "\" fill=\"" << fill << "\"";
    if (inverted[e]) {
      os << " stroke=\"#ff0000\" stroke-width=\"2\" class=\"inverted\"";
    } else {
      os << " stroke=\"#000000\" stroke-width=\"0.5\"";
    }
    os << "/>\n";
  }
  os << "</svg>\n";
  return os.str();
}

namespace {

// Squared L2 error of the P1 interpolant u_h against f, 3-point edge-midpoint rule.
double l2_error_sq(const Mesh& m, const fem::Field& u, double (*f)(Vec2)) {
  double sum = 0.0;
  for (std::size_t e = 0; e < m.num_elements(); ++e) {
    const Triangle& t = m.tris[e];
    double q = 0.0;
    for (int k = 0; k < 3; ++k) {
      const int a = t[k], b = t[(k + 1) % 3];
      const Vec2 mid = (m.coords[a] + m.coords[b]) * 0.5;
      q += std::pow(0.5 * (u.values[a] + u.values[b]) - f(mid), 2) / 3.0;
    }
    sum += element_area(m, static_cast<int>(e)) * q;
  }
  return sum;
}

double sine_bump(Vec2 p) { return std::sin(std::numbers::pi * p.x) * std::sin(std::numbers::pi * p.y); }

CheckResult check_convergence() {
  CheckResult r{"fem_convergence", true, ""};
  Mesh m = classify_boundary(uniform_refine(generate_domain(DomainSpec::unit_square(), 32, 0), 1),
                             make_unit_square());
  const double k = 2.0 * std::numbers::pi * std::numbers::pi;
  double prev = 0.0;
  std::ostringstream d;
  for (int level = 0; level < 4; ++level) {
    const fem::Field u = fem::solve_poisson(m, [&](Vec2 p) { return k * sine_bump(p); });
    const double err = std::sqrt(l2_error_sq(m, u, sine_bump));
    if (level > 0) {
      const double ratio = prev / err;
      d << (level > 1 ? " " : "") << format_double(ratio);
      r.passed = r.passed && ratio >= 3.5 && ratio <= 4.5;
    }
    prev = err;
    if (level < 3) m = uniform_refine(m, 1);
  }
  r.detail = "ratios " + d.str();
  return r;
}

Mesh random_refined(std::mt19937_64& rng) {
  const int kind = static_cast<int>(rng() % 3);
  const DomainSpec spec = kind == 0   ? DomainSpec::unit_square()
                          : kind == 1 ? DomainSpec::l_shape({0.3 + 0.6 * (rng() % 1000) / 1000.0, 0.5})
                                      : DomainSpec::convex_polygon(rng());
  Mesh m = generate_domain(spec, 12 + static_cast<int>(rng() % 30), rng());
  const int rounds = static_cast<int>(rng() % 3);
  std::bernoulli_distribution flip(0.3);
  for (int i = 0; i < rounds; ++i) {
    std::vector<std::uint8_t> flags(m.num_elements());
    for (auto& f : flags) f = flip(rng);
    m = rgb_refine(m, flags).mesh;
  }
  return m;
}

CheckResult check_conformity(std::uint64_t seed) {
  CheckResult r{"rgb_conformity", true, ""};
  std::mt19937_64 rng(seed);
  int cases = 0;
  for (; cases < 50; ++cases) {
    const Mesh m = random_refined(rng);
    std::vector<std::uint8_t> flags(m.num_elements());
    for (auto& f : flags) f = static_cast<std::uint8_t>(rng() % 2);
    const RefinementResult ref = rgb_refine(m, flags);
    bool ok = is_conforming(ref.mesh);
    for (std::size_t e = 0; ok && e < m.num_elements(); ++e) {
      double child = 0.0;
      for (int c : ref.maps.elem_children[e]) child += element_area(ref.mesh, c);
      const double parent = element_area(m, static_cast<int>(e));
      ok = std::abs(child - parent) <= 1e-12 * parent;
    }
    if (!ok) {
      r.passed = false;
      r.detail = "failed case " + std::to_string(cases);
      return r;
    }
  }
  r.detail = std::to_string(cases) + " cases";
  return r;
}

CheckResult check_non_tangling(std::uint64_t seed) {
  CheckResult r{"non_tangling", true, ""};
  std::mt19937_64 rng(seed + 1);
  int draws = 0;
  for (; draws < 30; ++draws) {
    const Mesh m = random_refined(rng);
    const fem::ProblemInstance inst = fem::sample_poisson_instance(rng(), 20);
    std::vector<double> vals(m.num_vertices());
    std::normal_distribution<double> n01;
    for (double& v : vals) v = n01(rng);
    policy::PolicyConfig pc;
    pc.hidden = 16;
    pc.head_hidden = 16;
    pc.seed = rng();
    const policy::PolicyParams p = policy::init_params(pc);
    const auto state = features::build_state(m, fem::make_field(m, vals), 0, 1e-3, inst);
    const policy::Action a = policy::inference_act(p, state, m);
    bool ok = detect_tangled(with_coords(m, a.coords)).empty();
    for (std::size_t v = 0; ok && v < m.num_vertices(); ++v) {
      if (m.boundary[v].kind == BoundaryClass::Corner) ok = a.coords[v] == m.coords[v];
      if (m.boundary[v].kind == BoundaryClass::Edge) {
        const BoundaryLine& l = m.components[m.boundary[v].component];
        ok = std::abs(cross(l.tangent, a.coords[v] - l.origin)) < 1e-12;
      }
    }
    if (!ok) {
      r.passed = false;
      r.detail = "failed draw " + std::to_string(draws);
      return r;
    }
  }
  r.detail = std::to_string(draws) + " draws";
  return r;
}

CheckResult check_gradients(std::uint64_t seed) {
  CheckResult r{"autodiff", true, ""};
  std::mt19937_64 rng(seed + 2);
  std::normal_distribution<double> n01;
  auto leaf = [&](int rows, int cols) {
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (double& x : v) x = n01(rng);
    return ad::Tensor::from(rows, cols, std::move(v), true);
  };
  ad::Tensor x = leaf(5, 3), w = leaf(3, 4), b = leaf(1, 4);
  auto f = [&] { return ad::sum(ad::softmax_rows(ad::tanh(ad::add_row(ad::matmul(x, w), b)))); };
  auto g = [&] { return ad::mean(ad::square(ad::sigmoid(ad::matmul(x, w)))); };
  double worst = 0.0;
  for (const auto& fn : {std::function<ad::Tensor()>(f), std::function<ad::Tensor()>(g)}) {
    for (ad::Tensor t : {x, w, b}) t.zero_grad();
    fn().backward();
    ad::NoGradGuard guard;
    for (ad::Tensor t : {x, w, b}) {
      const std::vector<double> analytic = t.grad().empty() ? std::vector<double>(t.size(), 0.0) : t.grad();
      auto& data = t.mutable_data();
      for (std::size_t i = 0; i < data.size(); ++i) {
        const double saved = data[i];
        data[i] = saved + 1e-5;
        const double up = fn().item();
        data[i] = saved - 1e-5;
        const double down = fn().item();
        data[i] = saved;
        const double numeric = (up - down) / 2e-5;
        worst = std::max(worst, std::abs(numeric - analytic[i]) /
                                    std::max({std::abs(numeric), std::abs(analytic[i]), 1e-4}));
      }
    }
  }
  r.passed = worst < 1e-4;
  r.detail = "max rel error " + format_double(worst);
  return r;
}

}  // namespace

std::vector<CheckResult> run_verify(std::uint64_t seed) {
  using Check = CheckResult (*)(std::uint64_t);
  const std::pair<const char*, Check> checks[] = {
      {"fem_convergence", [](std::uint64_t) { return check_convergence(); }},
      {"rgb_conformity", &check_conformity},
      {"non_tangling", &check_non_tangling},
      {"autodiff", &check_gradients},
  };
  std::vector<CheckResult> out;
  for (const auto& [name, check] : checks) {
    try {
      out.push_back(check(seed));
    } catch (const std::exception& e) {
      out.push_back({name, false, e.what()});
    }
  }
  return out;
}

}  // namespace hrmesh::harness
