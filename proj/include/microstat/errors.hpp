#ifndef MICROSTAT_ERRORS_HPP
#define MICROSTAT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace microstat {

// Raised for malformed input files and datasets violating their invariants.
// The CLI maps these to exit code 2.
class data_error : public std::runtime_error {
public:
  explicit data_error(const std::string &msg) : std::runtime_error(msg) {}
};

// Raised when parsing fails; carries the 1-based line and column.
class parse_error : public data_error {
public:
  parse_error(const std::string &msg, std::size_t line, std::size_t col)
      : data_error(msg + " (line " + std::to_string(line) + ", column " +
                   std::to_string(col) + ")"),
        line_(line), col_(col) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return col_; }

private:
  std::size_t line_;
  std::size_t col_;
};

// Raised when an algorithm fails numerically (non-convergence treated as
// fatal, quadrature breakdown, ...). The CLI maps these to exit code 3.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string &msg) : std::runtime_error(msg) {}
};

} // namespace microstat

#endif
