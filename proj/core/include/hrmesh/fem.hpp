#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/domain.hpp"
#include "hrmesh/mesh.hpp"
#include "hrmesh/sparse.hpp"

namespace hrmesh::fem {

enum class ProblemKind { Poisson, Heat };

std::string_view to_string(ProblemKind kind);
ProblemKind problem_kind_from_string(std::string_view name);

struct GaussianComponent {
  Vec2 mean;
  // Symmetric covariance [[cxx, cxy], [cxy, cyy]].
  double cxx = 1e-3;
  double cxy = 0.0;
  double cyy = 1e-3;
  double weight = 1.0;
};

struct HeatParams {
  Vec2 start{0.5, 0.5};
  Vec2 end{0.5, 0.5};
  double diffusivity = 1e-3;
  double amplitude = 1000.0;
  double decay = 100.0;
  int steps = 20;
  double dt = 0.5;
};

struct ProblemInstance {
  ProblemKind kind = ProblemKind::Poisson;
  DomainSpec domain;
  std::uint64_t mesh_seed = 0;
  int target_elements = 30;
  std::vector<GaussianComponent> gmm;  // Poisson load
  HeatParams heat;                     // heat source path
};

// Per-vertex P1 coefficients tagged with the fingerprint of their mesh.
struct Field {
  std::vector<double> values;
  std::uint64_t mesh_id = 0;

  std::size_t size() const { return values.size(); }
  double operator[](std::size_t i) const { return values[i]; }
};

// Hash of coordinates and connectivity.
std::uint64_t mesh_fingerprint(const Mesh& mesh);
Field make_field(const Mesh& mesh, std::vector<double> values);
// Throws ShapeMismatch when the field does not belong to the mesh.
void check_field(const Mesh& mesh, const Field& field);

double gmm_load(const ProblemInstance& instance, Vec2 p);
// Source position after `step` of heat.steps implicit Euler steps.
Vec2 heat_position(const HeatParams& heat, int step);
double heat_source(const HeatParams& heat, Vec2 p, int step);

// Local P1 stiffness of one element, rows/cols in corner order.
std::array<std::array<double, 3>, 3> element_stiffness(const Mesh& mesh, int elem);

// Homogeneous Dirichlet Poisson problem with centroid-rule load.
Field solve_poisson(const Mesh& mesh, const std::function<double(Vec2)>& load, SolveStats* stats = nullptr);
Field solve_poisson(const Mesh& mesh, const ProblemInstance& instance, SolveStats* stats = nullptr);
// Implicit Euler with consistent mass from u = 0. `history` receives every step.
Field solve_heat(const Mesh& mesh, const ProblemInstance& instance, std::vector<Field>* history = nullptr);
Field solve(const Mesh& mesh, const ProblemInstance& instance);

// Walking point locator with a linear-scan fallback.
class PointLocator {
 public:
  static constexpr double kTolerance = 1e-10;

  explicit PointLocator(const Mesh& mesh);

  // Containing element (barycentric coordinates >= -kTolerance), or kNone.
  int locate(Vec2 p, int hint = kNone) const;
  int locate_scan(Vec2 p) const;
  std::array<double, 3> barycentric(int elem, Vec2 p) const;
  std::size_t num_elements() const { return tris_.size(); }

 private:
  bool inside(int elem, Vec2 p) const;

  std::vector<Vec2> coords_;
  std::vector<Triangle> tris_;
  // neighbors_[e][k]: element across the edge opposite corner k.
  std::vector<std::array<int, 3>> neighbors_;
};

double evaluate(const Mesh& mesh, const Field& field, const PointLocator& locator, int elem, Vec2 p);
// Throws PointOutside for points not covered by the mesh.
std::vector<double> interpolate_at(const Mesh& mesh, const Field& field, std::span<const Vec2> points);

// High-fidelity solution on a uniform descendant of the coarse mesh, with
// centroid data cached for the error indicators.
struct Reference {
  Mesh mesh;
  Field field;
  std::vector<Vec2> centroids;
  std::vector<double> areas;
  std::vector<double> centroid_values;
  PointLocator locator;
};

Reference make_reference(Mesh mesh, Field field);
Reference build_reference(const Mesh& coarse, const ProblemInstance& instance, int depth);

struct ErrorIndicators {
  std::vector<double> eta_inf;  // max centroid error inside each element
  std::vector<double> eta2_sq;  // area-weighted squared centroid error
  double total_sq = 0.0;        // sum of eta2_sq
};

// Reference centroids are visited in index order. An element that contains no
// reference centroid takes eta_inf from its own centroid and eta2_sq = 0.
ErrorIndicators compute_indicators(const Mesh& mesh, const Field& field, const Reference& ref);

std::vector<double> eta_inf(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field);
std::vector<double> eta_2_sq(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field);
double global_error_sq(const Mesh& mesh, const Field& field, const Mesh& ref_mesh, const Field& ref_field);
// Throws InvalidArgument when the initial error is not positive.
double relative_error_sq(double error_sq, double initial_error_sq);

// Instance generators. Poisson: L-shape with p0 ~ U(0.2,0.95)^2 and a
// three-component rotated GMM whose means are rejection-sampled into the
// domain. Heat: convex polygon with path endpoints drawn inside it.
ProblemInstance sample_poisson_instance(std::uint64_t seed, int target_elements);
ProblemInstance sample_heat_instance(std::uint64_t seed, int target_elements);
ProblemInstance sample_instance(ProblemKind kind, std::uint64_t seed, int target_elements);

std::string instance_to_json(const ProblemInstance& instance);
ProblemInstance instance_from_json(const std::string& text);
void save_instance(const std::string& path, const ProblemInstance& instance);
ProblemInstance load_instance(const std::string& path);

}  // namespace hrmesh::fem
