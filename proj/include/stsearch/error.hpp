#pragma once

#include <stdexcept>
#include <string>

namespace stsearch {

enum class ErrorKind {
  kUsage,        // bad arguments or preconditions
  kData,         // malformed input records, unknown ids, dangling references
  kConvergence,  // iteration limit or divergence
  kFormat,       // bad magic bytes or unsupported version
  kChecksum,
  kTruncated,
};

// Maps onto CLI exit codes: usage 1, data 2, convergence 3. Persistence
// failures get their own codes so corrupted files are distinguishable.
inline int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return 1;
    case ErrorKind::kData: return 2;
    case ErrorKind::kConvergence: return 3;
    case ErrorKind::kFormat: return 4;
    case ErrorKind::kChecksum: return 5;
    case ErrorKind::kTruncated: return 6;
  }
  return 2;
}

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kData: return "data";
    case ErrorKind::kConvergence: return "convergence";
    case ErrorKind::kFormat: return "format";
    case ErrorKind::kChecksum: return "checksum";
    case ErrorKind::kTruncated: return "truncated";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace stsearch
