#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rtrace {

enum class Errc {
  // domain_model
  DuplicateCodeName,
  EmptyCodebook,
  MalformedDocument,
  UnknownCode,
  // llm_gateway
  BackendUnreachable,
  BackendRejected,
  ScriptExhausted,
  MissingPeerOutput,
  // trace_parser
  MissingThinkBlock,
  MissingDecision,
  // embedding
  EmptyText,
  ProviderUnavailable,
  DimensionMismatch,
  ZeroVector,
  ProviderMismatch,
  EmptyList,
  RaggedDimensions,
  // analytics
  SegmentMismatch,
  EmptyInput,
  LengthMismatch,
  DegenerateInput,
  TooFewSamples,
  ZeroVariance,
  // orchestrator / store
  TurnParseFailure,
  PreconditionFailed,
  CaseNotFound,
  AlreadyResolved,
  InvalidDecision,
  StoreFailure,
};

std::string_view errc_name(Errc code) noexcept;

/// Every failure the library reports carries one of the Errc kinds above.
/// The message names the offending element (code name, file, case id, ...).
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

}  // namespace rtrace
