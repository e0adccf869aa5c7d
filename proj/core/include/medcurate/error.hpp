#pragma once

#include <stdexcept>
#include <string>

namespace medcurate {

// Broad failure classes. The CLI maps each to a distinct exit code.
enum class ErrorKind {
  kConfig,      // invalid configuration, manifest, spec or sample data
  kJudge,       // judge service unavailable / exhausted retries
  kCapacity,    // packed bin exceeds capacity
  kIo,          // unreadable / unwritable files
};

// Exception carrying a module-qualified code such as "corpus.duplicate_dataset_id".
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(code + ": " + message),
        kind_(kind),
        code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

}  // namespace medcurate
