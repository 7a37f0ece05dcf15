#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace lt {

/// Error kinds raised across the library. The CLI maps each kind to an
/// exit code through category().
enum class ErrorKind {
  // data errors
  MalformedLine,
  DuplicateId,
  UnknownClass,
  EmptyClass,
  IneligibleRecord,
  EmptyMask,
  DimensionMismatch,
  InvalidPattern,
  PlacementOutsideSubject,
  PatternLargerThanBase,
  InsufficientSources,
  UndecodableImage,
  LengthMismatch,
  EmptyInput,
  EmptyRows,
  UnknownFormat,
  InvalidArgument,
  Io,
  NotFound,
  // model errors
  EmptyTrainingSet,
  NonBinaryMask,
  UnverifiedAugmentedRecord,
  ModelNotLoaded,
  NoConvLayer,
  EmptySubjectMask,
  PretrainedWeightsMissing,
  // service errors
  PayloadTooLarge,
  InvalidQuestionnaire,
  NotAugmented,
  AlreadyReviewed,
  MissingContent,
  InvalidRange,
  Unauthorized,
};

enum class ErrorCategory { Usage, Data, Model, Service };

std::string_view to_string(ErrorKind kind);
ErrorCategory category(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string detail);

  ErrorKind kind() const noexcept { return kind_; }
  const std::string& detail() const noexcept { return detail_; }
  /// Pipeline stage or image id the error surfaced from; empty at origin.
  const std::string& context() const noexcept { return context_; }

  /// Copy of this error with `ctx` prepended to the context chain.
  Error with_context(std::string_view ctx) const;

 private:
  ErrorKind kind_;
  std::string detail_;
  std::string context_;
};

}  // namespace lt
