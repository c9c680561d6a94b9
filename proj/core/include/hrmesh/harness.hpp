#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/baselines.hpp"
#include "hrmesh/env.hpp"
#include "hrmesh/fem.hpp"
#include "hrmesh/mesh.hpp"
#include "hrmesh/policy.hpp"

namespace hrmesh::harness {

struct ExperimentConfig {
  fem::ProblemKind kind = fem::ProblemKind::Poisson;
  int train_count = 50;
  int eval_count = 10;
  int target_elements = 30;
  int ref_depth = 3;
  int horizon = 4;
  int alpha_count = 20;
  double alpha_min = 7e-5;
  double alpha_max = 2e-2;
  int theta_count = 100;
  double oracle_theta_min = 0.0;
  double zz_theta_min = 1e-4;
  double theta_max = 1.0;
  int uniform_levels = 2;
  std::uint64_t seed = 0;
  std::string output_dir = "hrmesh_out";
  int threads = 1;
  bool record_time = true;  // false writes time_s = 0 for byte-stable CSVs
};

void validate(const ExperimentConfig& config);
std::string config_to_json(const ExperimentConfig& config);
// Keys absent from the JSON keep the values already in `base`.
ExperimentConfig config_from_json(const std::string& text, ExperimentConfig base = {});

// Evenly spaced in log between alpha_min and alpha_max.
std::vector<double> alpha_sweep(const ExperimentConfig& config);
// Evenly spaced between the method's lower bound and theta_max.
std::vector<double> theta_sweep(const ExperimentConfig& config, baselines::HeuristicKind kind);

enum class Split { Train, Eval };

// Train seeds are seed*kSplitStride + i, eval seeds add kEvalOffset, so the
// two sets are disjoint whenever the counts stay below kEvalOffset.
inline constexpr std::uint64_t kSplitStride = 1u << 24;
inline constexpr std::uint64_t kEvalOffset = 1u << 20;
std::uint64_t instance_seed(const ExperimentConfig& config, Split split, int index);

struct InstancePaths {
  std::string instance;  // JSON
  std::string mesh;      // initial mesh
  std::string ref_mesh;
  std::string ref_field;
};

std::string split_dir(const ExperimentConfig& config, Split split);
InstancePaths instance_paths(const ExperimentConfig& config, Split split, int index);

// Writes both splits under output_dir/dataset plus a manifest.json holding the config.
void gen_dataset(const ExperimentConfig& config);
std::vector<std::shared_ptr<const env::InstanceData>> load_split(const ExperimentConfig& config, Split split);

struct EvalRow {
  std::string method;
  double param = 0.0;  // alpha, theta, or uniform level
  int instance = 0;
  int elements = 0;
  double err_rel = 0.0;
  double time_s = 0.0;
  double displacement = 0.0;
};

inline constexpr std::string_view kCsvHeader = "method,alpha_or_theta,elements,err_rel,time_s,displacement";

void write_rows(std::ostream& os, std::span<const EvalRow> rows);
std::vector<EvalRow> read_rows(std::istream& is);

// Initial mesh (err_rel 1) and uniform levels 1..uniform_levels per instance.
std::vector<EvalRow> eval_reference_rows(const ExperimentConfig& config,
                                         std::span<const std::shared_ptr<const env::InstanceData>> data);
// Deterministic policy inference per (instance, alpha).
std::vector<EvalRow> eval_policy(const ExperimentConfig& config, const policy::PolicyParams& params,
                                 std::span<const std::shared_ptr<const env::InstanceData>> data);
// One heuristic over its theta sweep, horizon refinement steps each.
std::vector<EvalRow> eval_heuristic(const ExperimentConfig& config, baselines::HeuristicKind kind,
                                    std::span<const std::shared_ptr<const env::InstanceData>> data);

struct Aggregate {
  std::string method;
  double param = 0.0;
  int count = 0;
  double elements_mean = 0.0;
  double elements_std = 0.0;
  double err_rel_mean = 0.0;
  double err_rel_std = 0.0;
  double time_s_mean = 0.0;
  double displacement_mean = 0.0;
};

// Mean and population std per (method, param), in order of first appearance.
std::vector<Aggregate> aggregate(std::span<const EvalRow> rows);
void write_aggregates(std::ostream& os, std::span<const Aggregate> aggs);

// Points of one method not dominated by another point of that method, by elements.
std::vector<Aggregate> pareto_front(std::span<const Aggregate> aggs, const std::string& method);

// a has strictly fewer mean elements and strictly lower mean error than b.
bool dominates(const Aggregate& a, const Aggregate& b);

struct RenderOptions {
  int size_px = 600;
  int margin_px = 10;
  bool quality_fill = false;  // shade by aspect ratio when no field is given
};

// One <polygon> per element. A field fills each element with the mean of its
// vertex values on a blue-to-red ramp. Inverted elements get a red outline.
std::string render_svg(const Mesh& mesh, const std::optional<fem::Field>& field, const RenderOptions& options = {});

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

// Fast invariant suite behind the verify command.
std::vector<CheckResult> run_verify(std::uint64_t seed);

}  // namespace hrmesh::harness
