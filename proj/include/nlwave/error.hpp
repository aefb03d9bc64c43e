#pragma once

#include <stdexcept>
#include <string>

namespace nlw {

enum class ErrorKind { Config, Numerical, Internal };

// Stage-tagged failure; the CLI maps kind to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), kind_(kind), stage_(std::move(stage)) {}

  ErrorKind kind() const { return kind_; }
  const std::string& stage() const { return stage_; }

 private:
  ErrorKind kind_;
  std::string stage_;
};

inline Error config_error(const std::string& stage, const std::string& what) {
  return Error(ErrorKind::Config, stage, what);
}
inline Error numerical_error(const std::string& stage, const std::string& what) {
  return Error(ErrorKind::Numerical, stage, what);
}

}  // namespace nlw
