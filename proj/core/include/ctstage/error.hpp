#pragma once

#include <stdexcept>
#include <string>

namespace ctstage {

enum class ErrorCategory { Validation, Persistence, CorruptFile, Numeric };

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorCategory::Validation, what) {}
};

class PersistenceError : public Error {
 public:
  explicit PersistenceError(const std::string& what) : Error(ErrorCategory::Persistence, what) {}
};

class CorruptFileError : public Error {
 public:
  explicit CorruptFileError(const std::string& what) : Error(ErrorCategory::CorruptFile, what) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& what) : Error(ErrorCategory::Numeric, what) {}
};

inline const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Validation: return "validation";
    case ErrorCategory::Persistence: return "io";
    case ErrorCategory::CorruptFile: return "corrupt-file";
    case ErrorCategory::Numeric: return "numeric";
  }
  return "unknown";
}

// Throws ValidationError with `message` unless `condition` holds.
inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace ctstage
