#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/fem.hpp"
#include "hrmesh/mesh.hpp"

namespace hrmesh::features {

// Dense row-major matrix.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& operator()(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double operator()(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
  std::span<const double> row(int r) const { return {data.data() + static_cast<std::size_t>(r) * cols, static_cast<std::size_t>(cols)}; }
};

// Incidence H (vertex x element) and adjacency A of the mesh hypergraph.
struct Structure {
  int num_vertices = 0;
  int num_elements = 0;
  std::vector<Triangle> elem_vertices;  // columns of H
  // Rows of H: elements incident to each vertex, CSR.
  std::vector<int> vertex_elem_ptr;
  std::vector<int> vertex_elems;
  // Rows of A: sorted neighbours sharing an element, CSR.
  std::vector<int> adj_ptr;
  std::vector<int> adj;
  std::vector<double> vertex_deg;  // D_v
  std::vector<double> elem_deg;    // D_e, always 3

  std::span<const int> neighbors(int v) const {
    return {adj.data() + adj_ptr[v], static_cast<std::size_t>(adj_ptr[v + 1] - adj_ptr[v])};
  }
  std::span<const int> incident(int v) const {
    return {vertex_elems.data() + vertex_elem_ptr[v],
            static_cast<std::size_t>(vertex_elem_ptr[v + 1] - vertex_elem_ptr[v])};
  }
};

struct HypergraphState {
  Structure structure;
  Matrix vertex_feats;
  Matrix elem_feats;
  std::vector<BoundaryTag> boundary;
};

inline constexpr int kVertexDim = 6;
inline constexpr int kElementBaseDim = 12;

int task_width(fem::ProblemKind kind);
inline int element_dim(fem::ProblemKind kind) { return kElementBaseDim + task_width(kind); }

Structure build_structure(const Mesh& mesh);

// [x, y, u, interior, edge, corner]
Matrix vertex_features(const Mesh& mesh, const fem::Field& field);

// Exact constant gradient of the P1 field on each element.
std::vector<Vec2> gradient_per_element(const Mesh& mesh, const fem::Field& field);

struct JumpStats {
  double max = 0.0;
  double std = 0.0;
};

// |u_b - u_a| / |b - a| over the element edges (v0v1, v1v2, v2v0).
JumpStats edge_jump_stats(const Mesh& mesh, const fem::Field& field, int elem);

// Signed cosine between the element gradient and its principal direction; 0 for a zero gradient.
double alignment(const Mesh& mesh, const fem::Field& field, int elem);

// Poisson: load at the centroid. Heat: centroid distance to the path start and end.
Matrix task_features(const Mesh& mesh, const fem::ProblemInstance& instance);

// [|K|, mean u, std u, step, alpha, aspect, sin, cos, |grad u|, jump max, jump std, align] ++ task
Matrix element_features(const Mesh& mesh, const fem::Field& field, int step, double alpha, const Matrix& task_feats);

HypergraphState build_state(const Mesh& mesh, const fem::Field& field, int step, double alpha,
                            const fem::ProblemInstance& instance);

std::vector<std::string> vertex_feature_names();
std::vector<std::string> element_feature_names(fem::ProblemKind kind);
void write_csv(std::ostream& os, const Matrix& m, const std::vector<std::string>& header);

}  // namespace hrmesh::features
