#include <lodom/error.hpp>

namespace lodom {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::empty_input: return "empty input";
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::degenerate_rotation: return "degenerate rotation";
    case ErrorCode::degenerate_correspondences: return "degenerate correspondences";
    case ErrorCode::no_overlap: return "no overlap";
    case ErrorCode::insufficient_points: return "insufficient points";
    case ErrorCode::insufficient_structure: return "insufficient structure";
    case ErrorCode::unorganized_scan: return "unorganized scan";
    case ErrorCode::degenerate_line: return "degenerate line";
    case ErrorCode::degenerate_plane: return "degenerate plane";
    case ErrorCode::underconstrained: return "underconstrained";
    case ErrorCode::insufficient_data: return "insufficient data";
    case ErrorCode::parse_error: return "parse error";
    case ErrorCode::alignment_error: return "alignment error";
    case ErrorCode::validation_error: return "validation error";
    case ErrorCode::schema_error: return "schema error";
    case ErrorCode::io_error: return "I/O error";
  }
  return "unknown error";
}

Error::Error(ErrorCode code, const std::string& message)
: std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace lodom
