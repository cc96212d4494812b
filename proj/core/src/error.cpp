#include "rtrace/error.hpp"

namespace rtrace {

std::string_view errc_name(Errc code) noexcept {
  switch (code) {
    case Errc::DuplicateCodeName: return "DuplicateCodeName";
    case Errc::EmptyCodebook: return "EmptyCodebook";
    case Errc::MalformedDocument: return "MalformedDocument";
    case Errc::UnknownCode: return "UnknownCode";
    case Errc::BackendUnreachable: return "BackendUnreachable";
    case Errc::BackendRejected: return "BackendRejected";
    case Errc::ScriptExhausted: return "ScriptExhausted";
    case Errc::MissingPeerOutput: return "MissingPeerOutput";
    case Errc::MissingThinkBlock: return "MissingThinkBlock";
    case Errc::MissingDecision: return "MissingDecision";
    case Errc::EmptyText: return "EmptyText";
    case Errc::ProviderUnavailable: return "ProviderUnavailable";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::ZeroVector: return "ZeroVector";
    case Errc::ProviderMismatch: return "ProviderMismatch";
    case Errc::EmptyList: return "EmptyList";
    case Errc::RaggedDimensions: return "RaggedDimensions";
    case Errc::SegmentMismatch: return "SegmentMismatch";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::DegenerateInput: return "DegenerateInput";
    case Errc::TooFewSamples: return "TooFewSamples";
    case Errc::ZeroVariance: return "ZeroVariance";
    case Errc::TurnParseFailure: return "TurnParseFailure";
    case Errc::PreconditionFailed: return "PreconditionFailed";
    case Errc::CaseNotFound: return "CaseNotFound";
    case Errc::AlreadyResolved: return "AlreadyResolved";
    case Errc::InvalidDecision: return "InvalidDecision";
    case Errc::StoreFailure: return "StoreFailure";
  }
  return "Unknown";
}

}  // namespace rtrace
