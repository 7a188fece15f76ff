#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace mmf {

// Root of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text (JSONL record, config file).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  TransportError(const std::string& what, int retries)
      : Error(what + " (after " + std::to_string(retries) + " retries)"), retries_(retries) {}
  int retries() const noexcept { return retries_; }

 private:
  int retries_;
};

// Training data that cannot support a classifier (one class, identical rows).
class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(what + " at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

// A metric whose denominator is zero for the given labels.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// Wraps a failure inside one harness stage.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error("stage '" + stage + "': " + what), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

}  // namespace mmf
