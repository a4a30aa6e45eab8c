#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace granorm {

/// Base class for every error the library reports.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent grammar text. Line and column are 1-based; 0 means unknown.
class GrammarError : public Error {
 public:
  GrammarError(const std::string& what, std::size_t line = 0, std::size_t column = 0)
      : Error(line == 0 ? what
                        : "line " + std::to_string(line) + ", column " +
                              std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Action sequence or AST that does not conform to the grammar.
class TransitionError : public Error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  explicit TransitionError(const std::string& what, std::size_t step = npos)
      : Error(step == npos ? what : "step " + std::to_string(step) + ": " + what),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad dataset content, checkpoint content or file I/O.
class DataError : public Error {
 public:
  using Error::Error;
};

class SearchError : public Error {
 public:
  using Error::Error;
};

}  // namespace granorm
