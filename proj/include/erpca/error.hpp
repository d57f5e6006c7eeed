#ifndef ERPCA_ERROR_HPP
#define ERPCA_ERROR_HPP

#include <stdexcept>
#include <string>

namespace erpca {

enum class ErrorCode {
  InvalidParameter,  // value outside a distribution's parameter domain
  InvalidConfig,     // solver / tuning / simulation settings
  Numeric,           // non-finite iterate, failed decomposition
  Shape,             // dimension mismatch
  Parse,             // malformed input file
  Io,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace erpca

#endif  // ERPCA_ERROR_HPP
