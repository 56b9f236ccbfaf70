#ifndef CTLIMPUTE_ERROR_HPP
#define CTLIMPUTE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace ctlimpute {

/// Broad failure classes; the CLI maps each to a distinct exit status.
enum class ErrorKind {
  usage,      ///< bad configuration or arguments
  data,       ///< malformed or insufficient input data
  numerical,  ///< unreachable constraint, overflow, singular system
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

inline Error usage_error(const std::string& what) {
  return Error(ErrorKind::usage, what);
}
inline Error data_error(const std::string& what) {
  return Error(ErrorKind::data, what);
}
inline Error numerical_error(const std::string& what) {
  return Error(ErrorKind::numerical, what);
}

}  // namespace ctlimpute

#endif  // CTLIMPUTE_ERROR_HPP
