#include "amrdia/error.hpp"

namespace amrdia {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnbalancedParens: return "UnbalancedParens";
    case ErrorCode::DuplicateVariable: return "DuplicateVariable";
    case ErrorCode::UnknownVariableReference: return "UnknownVariableReference";
    case ErrorCode::EmptyConcept: return "EmptyConcept";
    case ErrorCode::MissingSlash: return "MissingSlash";
    case ErrorCode::UnexpectedToken: return "UnexpectedToken";
    case ErrorCode::InvariantViolation: return "InvariantViolation";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::NotScalar: return "NotScalar";
    case ErrorCode::MissingGrad: return "MissingGrad";
    case ErrorCode::TokenOutOfVocab: return "TokenOutOfVocab";
    case ErrorCode::SequenceTooLong: return "SequenceTooLong";
    case ErrorCode::RelationIdOutOfRange: return "RelationIdOutOfRange";
    case ErrorCode::EmptyEncoding: return "EmptyEncoding";
    case ErrorCode::PrefixTooLong: return "PrefixTooLong";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::EmptyResponse: return "EmptyResponse";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptChecksum: return "CorruptChecksum";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::NoValidExamples: return "NoValidExamples";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

PenmanError::PenmanError(ErrorCode code, std::size_t offset, const std::string& message)
    : Error(code, message + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

}  // namespace amrdia
