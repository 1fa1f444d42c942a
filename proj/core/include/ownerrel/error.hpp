#pragma once

#include <stdexcept>
#include <string>

namespace ownerrel {

enum class ErrorCode {
  kInvalidDimension,
  kInvalidBox,
  kDomain,
  kInvalidParameter,
  kInsufficientData,
  kShape,
  kDegenerateVector,
  kUnsupportedOp,
  kNormalization,
  kLookup,
  kGeneration,
  kPartition,
  kUndefinedLoss,
  kTrainingDiverged,
  kFormat,
  kIo,
  kRender,
};

const char* to_string(ErrorCode code);

// Every module error is an ownerrel::Error carrying a machine-checkable code.
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

}  // namespace ownerrel
