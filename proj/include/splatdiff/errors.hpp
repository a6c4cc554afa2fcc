#pragma once

#include <stdexcept>
#include <string>

namespace splatdiff {

// All library failures derive from Error so callers (the CLI in particular)
// can report a single machine-readable line.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

struct FormatError : Error {
  explicit FormatError(const std::string& m) : Error("format", m) {}
};

struct LengthError : Error {
  explicit LengthError(const std::string& m) : Error("length", m) {}
};

struct ValidationError : Error {
  explicit ValidationError(const std::string& m) : Error("validation", m) {}
};

struct PreconditionError : Error {
  explicit PreconditionError(const std::string& m) : Error("precondition", m) {}
};

struct UnsupportedError : Error {
  explicit UnsupportedError(const std::string& m) : Error("unsupported", m) {}
};

struct IoError : Error {
  explicit IoError(const std::string& m) : Error("io", m) {}
};

struct InternalError : Error {
  explicit InternalError(const std::string& m) : Error("internal", m) {}
};

}  // namespace splatdiff
