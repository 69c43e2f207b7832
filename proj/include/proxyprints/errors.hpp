#pragma once

#include <stdexcept>
#include <string>

namespace proxyprints {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Precondition violations: bad dimensions, out-of-range parameters, non-unit
// embeddings, templates too small to match.
struct InvalidArgument : Error {
  explicit InvalidArgument(const std::string& what) : Error(what) {}
};

// Deployment configuration problems: dimension mismatch, inactive key,
// malformed key file or config file.
struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(what) {}
};

// A capture was rejected before entering the pipeline (quality below floor).
struct RejectedCapture : Error {
  explicit RejectedCapture(const std::string& what) : Error(what) {}
};

// Store-level state errors.
struct UnknownUser : Error {
  explicit UnknownUser(const std::string& what) : Error(what) {}
};
struct DuplicateUser : Error {
  explicit DuplicateUser(const std::string& what) : Error(what) {}
};
struct StaleRecord : Error {
  explicit StaleRecord(const std::string& what) : Error(what) {}
};

// Metric computation on degenerate input (single class, empty sets).
struct UndefinedMetric : Error {
  explicit UndefinedMetric(const std::string& what) : Error(what) {}
};

// File I/O failures.
struct IoError : Error {
  explicit IoError(const std::string& what) : Error(what) {}
};

}  // namespace proxyprints
