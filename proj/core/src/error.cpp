#include "hrmesh/error.hpp"

namespace hrmesh {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::TangledMesh: return "tangled_mesh";
    case ErrorCode::DegenerateElement: return "degenerate_element";
    case ErrorCode::OffBoundary: return "off_boundary";
    case ErrorCode::InfeasibleGeometry: return "infeasible_geometry";
    case ErrorCode::SingularSystem: return "singular_system";
    case ErrorCode::PointOutside: return "point_outside";
    case ErrorCode::WrongProblemKind: return "wrong_problem_kind";
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::MissingLineage: return "missing_lineage";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

}  // namespace hrmesh
