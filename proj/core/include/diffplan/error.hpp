#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace diffplan {

enum class ErrorCode {
  kInvalidArgument,
  kShapeMismatch,
  kNoPath,
  kSolverNotConverged,
  kStepCapExceeded,
  kTrainingDiverged,
  kFileNotFound,
  kFileFormat,
  kConfigValidation,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Malformed binary or text artifact; offset is the byte where parsing stopped
// (the start of the offending line for text formats).
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(ErrorCode::kFileFormat, what + " (at offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

[[noreturn]] inline void throw_invalid(const std::string& what) {
  throw Error(ErrorCode::kInvalidArgument, what);
}

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace diffplan
