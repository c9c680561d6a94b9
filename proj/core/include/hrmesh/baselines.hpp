#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <span>
#include <string_view>
#include <vector>

#include "hrmesh/env.hpp"
#include "hrmesh/fem.hpp"
#include "hrmesh/mesh.hpp"

namespace hrmesh::baselines {

enum class HeuristicKind { Uniform, Oracle, Zz };

std::string_view to_string(HeuristicKind kind);
HeuristicKind heuristic_kind_from_string(std::string_view name);

struct HeuristicConfig {
  HeuristicKind kind = HeuristicKind::Oracle;
  double theta = 0.5;
  int initial_uniform_steps = 1;  // zz only
  int steps = 4;
};

void validate(const HeuristicConfig& config);

// Flags every element whose indicator reaches theta times the largest one.
std::vector<std::uint8_t> threshold_mark(std::span<const double> indicator, double theta);

// Oracle marking on the max-norm error against the reference.
std::vector<std::uint8_t> oracle_mark(const Mesh& mesh, const fem::Field& field, const fem::Reference& ref,
                                      double theta);

// Gradient recovered at each vertex by an area-weighted least-squares linear
// fit of the element gradients over the vertex patch (falls back to the
// area-weighted mean when the fit is underdetermined).
std::vector<Vec2> recover_gradient(const Mesh& mesh, const fem::Field& field);

// sqrt(|K| * mean over the corners of |G*(v) - grad u_K|^2).
std::vector<double> zz_estimate(const Mesh& mesh, const fem::Field& field);

struct TrajectoryStep {
  int step = 0;
  int elements_before = 0;
  int elements = 0;
  double error_rel = 0.0;
  int refined = 0;
};

struct HeuristicResult {
  Mesh mesh;
  fem::Field field;
  std::vector<TrajectoryStep> trajectory;  // one entry per refinement, in order
  int elements = 0;
  double error_rel = 0.0;
};

HeuristicResult run_heuristic(const HeuristicConfig& config, const env::InstanceData& data);

// Same JSON-lines layout as the env episode log.
void write_trajectory_log(std::ostream& os, std::span<const TrajectoryStep> trajectory);

}  // namespace hrmesh::baselines
