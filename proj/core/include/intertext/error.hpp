#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace intertext {

enum class ErrorCode {
  schema,             // missing column / malformed record
  validation,         // invariant violated by input data
  empty_document,
  configuration,      // bad parameters or missing optional data a mode needs
  transport,          // provider unreachable or failed; retryable
  provider_contract,  // provider answered with something out of contract
  undefined_metric,   // metric has no defined value for the given counts
  not_found,
  conflict,           // resource exists but is in the wrong state
  io,
};

std::string_view to_string(ErrorCode code);

struct FieldIssue {
  std::string field;
  std::string message;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::vector<FieldIssue> fields = {})
      : std::runtime_error(message), code_(code), fields_(std::move(fields)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::vector<FieldIssue>& fields() const noexcept { return fields_; }

 private:
  ErrorCode code_;
  std::vector<FieldIssue> fields_;
};

// Raised when an embedding or classification provider cannot be reached or
// fails mid-batch. Carries the ids of the segments in the failed batch.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, std::vector<std::string> segment_ids, bool retryable = true)
      : Error(ErrorCode::transport, message),
        segment_ids_(std::move(segment_ids)),
        retryable_(retryable) {}

  const std::vector<std::string>& segment_ids() const noexcept { return segment_ids_; }
  bool retryable() const noexcept { return retryable_; }

 private:
  std::vector<std::string> segment_ids_;
  bool retryable_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace intertext
