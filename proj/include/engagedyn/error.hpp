#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace engagedyn {

/// Broad failure class; the CLI maps it onto its exit code.
enum class ErrorClass { data, numerical };

class Error : public std::runtime_error {
 public:
  Error(ErrorClass cls, const std::string& what) : std::runtime_error(what), cls_(cls) {}
  ErrorClass error_class() const noexcept { return cls_; }

 private:
  ErrorClass cls_;
};

// Bad arguments, malformed files, broken joins.
class InvalidInput : public Error {
 public:
  explicit InvalidInput(const std::string& what) : Error(ErrorClass::data, what) {}
};

class InsufficientData : public Error {
 public:
  explicit InsufficientData(const std::string& what) : Error(ErrorClass::data, what) {}
};

class SchemaError : public Error {
 public:
  SchemaError(std::string file, std::size_t line, std::string column, const std::string& msg)
      : Error(ErrorClass::data, file + ":" + std::to_string(line) + ": column '" + column + "': " + msg),
        file_(std::move(file)),
        line_(line),
        column_(std::move(column)) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }
  const std::string& column() const noexcept { return column_; }

 private:
  std::string file_;
  std::size_t line_;
  std::string column_;
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorClass::numerical, what) {}
};

class SingularDesign : public NumericalError {
 public:
  SingularDesign(long column, const std::string& what) : NumericalError(what), column_(column) {}
  /// Index of the first column found to be linearly dependent on its predecessors.
  long column() const noexcept { return column_; }

 private:
  long column_;
};

/// Iterative solver ran out of sweeps; carries the last iterate.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, Eigen::VectorXd last)
      : NumericalError(what), last_(std::move(last)) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_; }

 private:
  Eigen::VectorXd last_;
};

/// Damping blew past its ceiling; carries the best iterate seen.
class StalledError : public NumericalError {
 public:
  StalledError(const std::string& what, Eigen::VectorXd best, double best_sse)
      : NumericalError(what), best_(std::move(best)), sse_(best_sse) {}
  const Eigen::VectorXd& best() const noexcept { return best_; }
  double best_sse() const noexcept { return sse_; }

 private:
  Eigen::VectorXd best_;
  double sse_;
};

}  // namespace engagedyn
