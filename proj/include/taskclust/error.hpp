#pragma once

#include <stdexcept>
#include <string>

namespace taskclust {

/// Broad failure class; the CLI maps it onto an exit code.
enum class ErrorKind {
  usage,     ///< bad input, config, or precondition
  numerical, ///< solver divergence or non-finite data
};

/// Exception carrying a stable machine-readable code such as "dim-mismatch".
class Error : public std::runtime_error {
 public:
  Error(std::string code, std::string detail = {}, ErrorKind kind = ErrorKind::usage)
    : std::runtime_error(detail.empty() ? code : code + ": " + detail)
    , code_{std::move(code)}
    , detail_{std::move(detail)}
    , kind_{kind}
  {
  }

  const std::string &code() const noexcept { return code_; }
  const std::string &detail() const noexcept { return detail_; }
  ErrorKind kind() const noexcept { return kind_; }

 private:
  std::string code_;
  std::string detail_;
  ErrorKind kind_;
};

inline Error numerical_error(std::string code, std::string detail = {})
{
  return Error(std::move(code), std::move(detail), ErrorKind::numerical);
}

} // namespace taskclust
