#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pdc {

// Error classes surfaced by the library. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  argument,
  range,
  estimation,
  evaluation,
  degenerate_sample,
  io,
  schema,
  pipeline,
};

std::string_view to_string(ErrorKind kind);
int exit_code(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace pdc
