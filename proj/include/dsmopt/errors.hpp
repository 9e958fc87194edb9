#pragma once

#include <stdexcept>
#include <string>

namespace dsmopt {

enum class ErrorKind {
  NotPositiveDefinite,
  SingularTriangular,
  SingularMatrix,
  NoConvergence,
  NotHermitian,
  NotPSD,
  EmptyBand,
  ModelDegenerate,
  ParseError,
  DimensionMismatch,
  InfeasibleMask,
  SingularChannel,
  RankDeficient,
  InvalidInput,
  Io,
};

const char* to_string(ErrorKind kind);

// Base of every error raised by the library. The kind is what callers
// (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define DSMOPT_DEFINE_ERROR(Name)                                              \
  class Name : public Error {                                                  \
   public:                                                                     \
    explicit Name(const std::string& what) : Error(ErrorKind::Name, what) {}   \
  };

DSMOPT_DEFINE_ERROR(NotPositiveDefinite)
DSMOPT_DEFINE_ERROR(SingularTriangular)
DSMOPT_DEFINE_ERROR(SingularMatrix)
DSMOPT_DEFINE_ERROR(NoConvergence)
DSMOPT_DEFINE_ERROR(NotHermitian)
DSMOPT_DEFINE_ERROR(NotPSD)
DSMOPT_DEFINE_ERROR(EmptyBand)
DSMOPT_DEFINE_ERROR(ModelDegenerate)
DSMOPT_DEFINE_ERROR(DimensionMismatch)
DSMOPT_DEFINE_ERROR(InfeasibleMask)
DSMOPT_DEFINE_ERROR(SingularChannel)
DSMOPT_DEFINE_ERROR(RankDeficient)
DSMOPT_DEFINE_ERROR(InvalidInput)
DSMOPT_DEFINE_ERROR(Io)

#undef DSMOPT_DEFINE_ERROR

// Parse errors carry the 1-based position of the offending token.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(ErrorKind::ParseError,
              what + (line ? " (line " + std::to_string(line) + ", column " +
                                 std::to_string(column) + ")"
                           : std::string())),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

}  // namespace dsmopt
