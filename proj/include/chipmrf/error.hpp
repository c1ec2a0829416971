#ifndef CHIPMRF_ERROR_HPP
#define CHIPMRF_ERROR_HPP

#include <stdexcept>
#include <string>

namespace chipmrf {

// Every error carries a short machine-readable kind; the CLI prints it verbatim.
class error : public std::runtime_error {
public:
  error(std::string kind, const std::string &msg)
      : std::runtime_error(msg), kind_(std::move(kind)) {}
  const std::string &kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

struct invalid_parameter : error {
  explicit invalid_parameter(const std::string &msg)
      : error("invalid-parameter", msg) {}
};

struct dimension_error : error {
  explicit dimension_error(const std::string &msg)
      : error("dimension", msg) {}
};

struct parse_error : error {
  explicit parse_error(const std::string &msg) : error("parse", msg) {}
  parse_error(const std::string &where, size_t line, const std::string &msg)
      : error("parse", where + ":" + std::to_string(line) + ": " + msg) {}
};

struct fit_failure : error {
  explicit fit_failure(const std::string &msg) : error("fit-failure", msg) {}
};

struct precondition_violation : error {
  explicit precondition_violation(const std::string &msg)
      : error("precondition", msg) {}
};

struct degenerate_input : error {
  explicit degenerate_input(const std::string &msg)
      : error("degenerate-input", msg) {}
};

} // namespace chipmrf

#endif
