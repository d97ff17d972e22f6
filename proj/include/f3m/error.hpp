#pragma once

#include <stdexcept>
#include <string>

namespace f3m {

enum class ErrorKind {
    InvalidInput,
    InvalidSpec,
    InvalidDegree,
    InvalidState,
    GridTooLarge,
    OutOfCube,
    DegenerateBox,
    OracleTooLarge,
    UndefinedMetric,
    SolverBreakdown,
    Resource,
    Io,
    InternalConsistency,
};

const char* to_string(ErrorKind kind) noexcept;

/// Every library failure surfaces as an f3m::Error carrying its kind, so callers
/// (the CLI in particular) can map failures onto exit codes without parsing text.
class Error : public std::runtime_error {
  public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

  private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace f3m
