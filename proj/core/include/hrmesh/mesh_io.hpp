#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "hrmesh/mesh.hpp"

namespace hrmesh {

// Text mesh format:
//   N_v N_e
//   x y class component      (N_v lines; class 0 interior, 1 edge, 2 corner)
//   i j k parent             (N_e lines; parent -1 when absent)
// Floats are written with 17 significant digits.
void write_mesh(std::ostream& os, const Mesh& mesh);
Mesh read_mesh(std::istream& is);
void save_mesh(const std::string& path, const Mesh& mesh);
Mesh load_mesh(const std::string& path);

// Field dump: header "FIELD N_v" followed by one value per line.
void write_field(std::ostream& os, std::span<const double> values);
std::vector<double> read_field(std::istream& is);
void save_field(const std::string& path, std::span<const double> values);
std::vector<double> load_field(const std::string& path);

// Rebuilds boundary component lines from the vertex tags and boundary edges.
void rebuild_components(Mesh& mesh);

}  // namespace hrmesh
