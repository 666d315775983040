#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace kbound {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, missing API key, illegal method/variant pairing.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed dataset file or record invariant violation.
class DatasetError : public Error {
 public:
  using Error::Error;
};

/// Network failure after retries were exhausted, or a non-retryable HTTP status.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, bool transient)
      : Error(what), transient_(transient) {}
  bool transient() const { return transient_; }

 private:
  bool transient_;
};

/// Request needs a feature (images, logprobs) the endpoint does not offer.
class CapabilityError : public Error {
 public:
  using Error::Error;
};

/// A model reply could not be parsed into the expected structure.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Verbalized reply carried neither "certain" nor "uncertain".
class UnparsedConfidenceError : public ParseError {
 public:
  using ParseError::ParseError;
};

/// LLM judge reply was neither yes nor no after a retry.
class JudgingError : public Error {
 public:
  using Error::Error;
};

/// One or more samples of a batch failed; the whole batch is discarded.
class BatchError : public Error {
 public:
  BatchError(const std::string& what, std::vector<int> failed_indices)
      : Error(what), failed_indices_(std::move(failed_indices)) {}
  const std::vector<int>& failed_indices() const { return failed_indices_; }

 private:
  std::vector<int> failed_indices_;
};

/// Too many records failed; the run was stopped.
class RunAbortedError : public Error {
 public:
  using Error::Error;
};

}  // namespace kbound
