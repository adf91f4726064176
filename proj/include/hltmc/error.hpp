#pragma once

#include <stdexcept>
#include <string>

namespace hltmc {

// Bad input data: malformed files, inconsistent corpora, invalid models.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A file could not be parsed. Carries the 1-based line number when known.
class ParseError : public DataError {
 public:
  ParseError(const std::string& where, long line, const std::string& what)
      : DataError(where + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + what),
        line_(line) {}

  long line() const noexcept { return line_; }

 private:
  long line_;
};

// Computation became numerically meaningless, e.g. a truncated normal whose
// mass on [0,1] underflows.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hltmc
