#include "intertext/error.hpp"

namespace intertext {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::schema: return "schema";
    case ErrorCode::validation: return "validation";
    case ErrorCode::empty_document: return "empty_document";
    case ErrorCode::configuration: return "configuration";
    case ErrorCode::transport: return "transport";
    case ErrorCode::provider_contract: return "provider_contract";
    case ErrorCode::undefined_metric: return "undefined_metric";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace intertext
