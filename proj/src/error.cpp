#include "capfuse/error.hpp"

namespace capfuse {

std::string_view errc_name(Errc code) {
  switch (code) {
    case Errc::MalformedRecord: return "MalformedRecord";
    case Errc::DuplicateImageId: return "DuplicateImageId";
    case Errc::MissingFile: return "MissingFile";
    case Errc::TooFewCandidates: return "TooFewCandidates";
    case Errc::DuplicateModelId: return "DuplicateModelId";
    case Errc::SizeMismatch: return "SizeMismatch";
    case Errc::DuplicateId: return "DuplicateId";
    case Errc::DimensionMismatch: return "DimensionMismatch";
    case Errc::NotNormalized: return "NotNormalized";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::BackendUnavailable: return "BackendUnavailable";
    case Errc::MissingScore: return "MissingScore";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::EmptyGroup: return "EmptyGroup";
    case Errc::EmptyCaption: return "EmptyCaption";
    case Errc::BadTemplate: return "BadTemplate";
    case Errc::ClientTimeout: return "ClientTimeout";
    case Errc::ClientRefused: return "ClientRefused";
    case Errc::EmptyResponse: return "EmptyResponse";
    case Errc::EmptyCandidateList: return "EmptyCandidateList";
    case Errc::EmptyReferenceSet: return "EmptyReferenceSet";
    case Errc::EmptyReferences: return "EmptyReferences";
    case Errc::EmptyCorpus: return "EmptyCorpus";
    case Errc::LengthMismatch: return "LengthMismatch";
    case Errc::SetTooSmall: return "SetTooSmall";
    case Errc::EmptySet: return "EmptySet";
    case Errc::TaggerFailure: return "TaggerFailure";
    case Errc::KeyMismatch: return "KeyMismatch";
    case Errc::TooFewOptions: return "TooFewOptions";
    case Errc::UnknownBallot: return "UnknownBallot";
    case Errc::DuplicateVote: return "DuplicateVote";
    case Errc::ClassQuotaExceeded: return "ClassQuotaExceeded";
    case Errc::InvalidChoice: return "InvalidChoice";
    case Errc::UnresolvableKey: return "UnresolvableKey";
    case Errc::RepeatRater: return "RepeatRater";
    case Errc::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

ErrorClass error_class(Errc code) {
  switch (code) {
    case Errc::ConfigError:
    case Errc::BadTemplate:
      return ErrorClass::Config;
    case Errc::BackendUnavailable:
    case Errc::ClientTimeout:
    case Errc::ClientRefused:
    case Errc::EmptyResponse:
    case Errc::TaggerFailure:
      return ErrorClass::Backend;
    default:
      return ErrorClass::Data;
  }
}

Error::Error(Errc code, const std::string& detail)
    : std::runtime_error(std::string(errc_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace capfuse
