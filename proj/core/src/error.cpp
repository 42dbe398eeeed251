#include "diffplan/error.hpp"

namespace diffplan {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "invalid_argument";
    case ErrorCode::kShapeMismatch: return "shape_mismatch";
    case ErrorCode::kNoPath: return "no_path";
    case ErrorCode::kSolverNotConverged: return "solver_not_converged";
    case ErrorCode::kStepCapExceeded: return "step_cap_exceeded";
    case ErrorCode::kTrainingDiverged: return "training_diverged";
    case ErrorCode::kFileNotFound: return "file_not_found";
    case ErrorCode::kFileFormat: return "file_format";
    case ErrorCode::kConfigValidation: return "config_validation";
  }
  return "unknown";
}

}  // namespace diffplan
