#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace trilocal {

enum class ErrorKind {
  NotSymmetric,
  DegeneratePlane,
  InvalidModel,
  OutOfDomain,
  DivisionByZero,
  EmptyDomain,
  InvalidInput,
  SingularDenominator,
  ComplexBranch,
  SolverFailure,
};

inline std::string_view to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::NotSymmetric: return "NotSymmetric";
    case ErrorKind::DegeneratePlane: return "DegeneratePlane";
    case ErrorKind::InvalidModel: return "InvalidModel";
    case ErrorKind::OutOfDomain: return "OutOfDomain";
    case ErrorKind::DivisionByZero: return "DivisionByZero";
    case ErrorKind::EmptyDomain: return "EmptyDomain";
    case ErrorKind::InvalidInput: return "InvalidInput";
    case ErrorKind::SingularDenominator: return "SingularDenominator";
    case ErrorKind::ComplexBranch: return "ComplexBranch";
    case ErrorKind::SolverFailure: return "SolverFailure";
  }
  return "Unknown";
}

/// Library error; `kind()` identifies the contract that was broken.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace trilocal
