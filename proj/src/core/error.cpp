#include "lesion_triage/error.hpp"

namespace lt {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedLine: return "MalformedLine";
    case ErrorKind::DuplicateId: return "DuplicateId";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::EmptyClass: return "EmptyClass";
    case ErrorKind::IneligibleRecord: return "IneligibleRecord";
    case ErrorKind::EmptyMask: return "EmptyMask";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidPattern: return "InvalidPattern";
    case ErrorKind::PlacementOutsideSubject: return "PlacementOutsideSubject";
    case ErrorKind::PatternLargerThanBase: return "PatternLargerThanBase";
    case ErrorKind::InsufficientSources: return "InsufficientSources";
    case ErrorKind::UndecodableImage: return "UndecodableImage";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::EmptyRows: return "EmptyRows";
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::Io: return "Io";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorKind::NonBinaryMask: return "NonBinaryMask";
    case ErrorKind::UnverifiedAugmentedRecord: return "UnverifiedAugmentedRecord";
    case ErrorKind::ModelNotLoaded: return "ModelNotLoaded";
    case ErrorKind::NoConvLayer: return "NoConvLayer";
    case ErrorKind::EmptySubjectMask: return "EmptySubjectMask";
    case ErrorKind::PretrainedWeightsMissing: return "PretrainedWeightsMissing";
    case ErrorKind::PayloadTooLarge: return "PayloadTooLarge";
    case ErrorKind::InvalidQuestionnaire: return "InvalidQuestionnaire";
    case ErrorKind::NotAugmented: return "NotAugmented";
    case ErrorKind::AlreadyReviewed: return "AlreadyReviewed";
    case ErrorKind::MissingContent: return "MissingContent";
    case ErrorKind::InvalidRange: return "InvalidRange";
    case ErrorKind::Unauthorized: return "Unauthorized";
  }
  return "Unknown";
}

ErrorCategory category(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::EmptyTrainingSet:
    case ErrorKind::NonBinaryMask:
    case ErrorKind::UnverifiedAugmentedRecord:
    case ErrorKind::ModelNotLoaded:
    case ErrorKind::NoConvLayer:
    case ErrorKind::EmptySubjectMask:
    case ErrorKind::PretrainedWeightsMissing:
      return ErrorCategory::Model;
    case ErrorKind::PayloadTooLarge:
    case ErrorKind::InvalidQuestionnaire:
    case ErrorKind::NotAugmented:
    case ErrorKind::AlreadyReviewed:
    case ErrorKind::MissingContent:
    case ErrorKind::InvalidRange:
    case ErrorKind::Unauthorized:
      return ErrorCategory::Service;
    default:
      return ErrorCategory::Data;
  }
}

Error::Error(ErrorKind kind, std::string detail)
    : std::runtime_error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      detail_(std::move(detail)) {}

Error Error::with_context(std::string_view ctx) const {
  Error copy(kind_, std::string(ctx) + ": " + detail_);
  copy.context_ = context_.empty() ? std::string(ctx) : std::string(ctx) + "/" + context_;
  return copy;
}

}  // namespace lt
