#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace amrdia {

enum class ErrorCode {
  // amr
  UnbalancedParens,
  DuplicateVariable,
  UnknownVariableReference,
  EmptyConcept,
  MissingSlash,
  UnexpectedToken,
  InvariantViolation,
  EmptyInput,
  // numerics
  ShapeMismatch,
  IndexOutOfRange,
  NotScalar,
  MissingGrad,
  // model
  TokenOutOfVocab,
  SequenceTooLong,
  RelationIdOutOfRange,
  EmptyEncoding,
  PrefixTooLong,
  // training
  EmptyBatch,
  EmptyResponse,
  NonFiniteLoss,
  IoFailure,
  VersionMismatch,
  CorruptChecksum,
  // metrics / pipeline
  LengthMismatch,
  FileNotFound,
  NoValidExamples,
  EmptyCorpus,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Parse failure inside a PENMAN string; `offset` is the byte position of the offending token.
class PenmanError : public Error {
 public:
  PenmanError(ErrorCode code, std::size_t offset, const std::string& message);

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace amrdia
