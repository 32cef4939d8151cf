#include "pdc/error.hpp"

namespace pdc {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::argument: return "argument_error";
    case ErrorKind::range: return "range_error";
    case ErrorKind::estimation: return "estimation_error";
    case ErrorKind::evaluation: return "evaluation_error";
    case ErrorKind::degenerate_sample: return "degenerate_sample_error";
    case ErrorKind::io: return "io_error";
    case ErrorKind::schema: return "schema_error";
    case ErrorKind::pipeline: return "pipeline_error";
  }
  return "unknown_error";
}

int exit_code(ErrorKind kind) {
  // 1 is reserved for unexpected failures, 2 for usage errors (CLI11).
  switch (kind) {
    case ErrorKind::io: return 3;
    case ErrorKind::schema: return 4;
    case ErrorKind::argument: return 5;
    case ErrorKind::range: return 6;
    case ErrorKind::estimation: return 7;
    case ErrorKind::evaluation: return 8;
    case ErrorKind::degenerate_sample: return 9;
    case ErrorKind::pipeline: return 10;
  }
  return 1;
}

}  // namespace pdc
