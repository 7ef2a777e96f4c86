#pragma once

#include <stdexcept>
#include <string>

namespace vrjp {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DisconnectedGraph : public Error {
 public:
  using Error::Error;
};
class InvalidWeight : public Error {
 public:
  using Error::Error;
};
class DuplicateEdge : public Error {
 public:
  using Error::Error;
};
class InvalidGraph : public Error {
 public:
  using Error::Error;
};
class EnumerationBudgetExceeded : public Error {
 public:
  using Error::Error;
};
class NotInH : public Error {
 public:
  using Error::Error;
};
class NotInO : public Error {
 public:
  using Error::Error;
};
class PreconditionViolation : public Error {
 public:
  using Error::Error;
};
class NonIntegralResult : public Error {
 public:
  using Error::Error;
};
class MaxEvaluationsExceeded : public Error {
 public:
  using Error::Error;
};
class SingularPoint : public Error {
 public:
  using Error::Error;
};
class InsufficientSamples : public Error {
 public:
  using Error::Error;
};
// Raised when two independent evaluations of the same quantity disagree.
class InternalInconsistency : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line, int column)
      : Error(what + " at line " + std::to_string(line) + ", column " +
              std::to_string(column)),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_;
  int column_;
};

class ValidationError : public Error {
 public:
  ValidationError(const std::string& field, const std::string& why)
      : Error("invalid field '" + field + "': " + why), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

}  // namespace vrjp
