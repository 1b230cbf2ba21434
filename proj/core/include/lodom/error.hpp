#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lodom {

/// Failure categories raised by the library. Every throwing operation reports one of these.
enum class ErrorCode {
  empty_input,
  invalid_argument,
  degenerate_rotation,
  degenerate_correspondences,
  no_overlap,
  insufficient_points,
  insufficient_structure,
  unorganized_scan,
  degenerate_line,
  degenerate_plane,
  underconstrained,
  insufficient_data,
  parse_error,
  alignment_error,
  validation_error,
  schema_error,
  io_error,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

private:
  ErrorCode code_;
};

}  // namespace lodom
