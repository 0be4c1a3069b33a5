#pragma once

#include <stdexcept>
#include <string>

namespace blocknas {

/// Broad failure class. Maps one-to-one onto CLI exit codes.
enum class ErrorKind {
  validation,  // malformed input, schema, coverage, consistency, configuration
  transport,   // measurement endpoint unreachable or misbehaving
  infeasible,  // budget or bound cannot be met
};

int exit_code(ErrorKind kind);
const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string tag, const std::string& message)
      : std::runtime_error(message), kind_(kind), tag_(std::move(tag)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable reason, e.g. "coverage" or "bound_exceeded".
  const std::string& tag() const noexcept { return tag_; }

 private:
  ErrorKind kind_;
  std::string tag_;
};

class ParseError : public Error {
 public:
  explicit ParseError(const std::string& m) : Error(ErrorKind::validation, "parse", m) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& m) : Error(ErrorKind::validation, "schema", m) {}
};

class CoverageError : public Error {
 public:
  explicit CoverageError(const std::string& m) : Error(ErrorKind::validation, "coverage", m) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& m)
      : Error(ErrorKind::validation, "consistency", m) {}
};

class ConfigurationError : public Error {
 public:
  explicit ConfigurationError(const std::string& m)
      : Error(ErrorKind::validation, "configuration", m) {}
};

class TransportError : public Error {
 public:
  explicit TransportError(const std::string& m) : Error(ErrorKind::transport, "transport", m) {}
};

class ProtocolError : public Error {
 public:
  explicit ProtocolError(const std::string& m) : Error(ErrorKind::transport, "protocol", m) {}
};

class BoundExceededError : public Error {
 public:
  explicit BoundExceededError(const std::string& m)
      : Error(ErrorKind::infeasible, "bound_exceeded", m) {}
};

class InfeasibleError : public Error {
 public:
  explicit InfeasibleError(const std::string& m) : Error(ErrorKind::infeasible, "infeasible", m) {}
};

}  // namespace blocknas
