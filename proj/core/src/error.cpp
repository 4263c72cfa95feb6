#include "cpikw/error.hpp"

namespace cpikw {

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kInput: return "input";
    case ErrorCategory::kStale: return "stale";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kInternal: return "internal";
  }
  return "internal";
}

int exit_code(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::kConfig: return 2;
    case ErrorCategory::kInput: return 3;
    case ErrorCategory::kStale: return 4;
    case ErrorCategory::kNumeric: return 5;
    case ErrorCategory::kData: return 6;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

}  // namespace cpikw
