#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cpikw {

// Coarse failure classes. The CLI maps each to a distinct exit code and
// prints the category name so callers can parse it.
enum class ErrorCategory {
  kConfig,
  kInput,
  kStale,
  kNumeric,
  kData,
  kInternal,
};

std::string_view category_name(ErrorCategory category);
int exit_code(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory category, const std::string& message) {
  throw Error(category, message);
}

}  // namespace cpikw
