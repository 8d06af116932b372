#ifndef MEDIC_ERRORS_H_
#define MEDIC_ERRORS_H_

#include <stdexcept>
#include <string>

namespace medic {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes or parameter layouts do not conform.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// A forward op produced NaN/Inf. The message names the op.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid model/train/experiment configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed CSV, checkpoint or config text. Carries a 1-based line number
// when one applies (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Out-of-range class label, empty batch, missing domain and similar.
class DataError : public Error {
 public:
  using Error::Error;
};

// The quad sampler could not fill a (domains, classes) cell.
class DataCoverageError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace medic

#endif  // MEDIC_ERRORS_H_
