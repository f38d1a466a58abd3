#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace capfuse {

enum class Errc {
  // corpus
  MalformedRecord,
  DuplicateImageId,
  MissingFile,
  TooFewCandidates,
  DuplicateModelId,
  SizeMismatch,
  DuplicateId,
  // scorer
  DimensionMismatch,
  NotNormalized,
  OutOfRange,
  BackendUnavailable,
  MissingScore,
  EmptyInput,
  EmptyGroup,
  // fuser
  EmptyCaption,
  BadTemplate,
  ClientTimeout,
  ClientRefused,
  EmptyResponse,
  // metrics
  EmptyCandidateList,
  EmptyReferenceSet,
  EmptyReferences,
  EmptyCorpus,
  LengthMismatch,
  SetTooSmall,
  EmptySet,
  TaggerFailure,
  KeyMismatch,
  // study
  TooFewOptions,
  UnknownBallot,
  DuplicateVote,
  ClassQuotaExceeded,
  InvalidChoice,
  UnresolvableKey,
  RepeatRater,
  // pipeline
  ConfigError,
};

std::string_view errc_name(Errc code);

// Process exit status classes used by the CLI.
enum class ErrorClass { Config = 2, Backend = 3, Data = 4 };

ErrorClass error_class(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail);

  Errc code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  Errc code_;
  std::string detail_;
};

// Fusion client failures keep the rendered prompt for diagnostics.
class FusionError : public Error {
 public:
  FusionError(Errc code, const std::string& detail, std::string prompt)
      : Error(code, detail), prompt_(std::move(prompt)) {}

  const std::string& prompt() const noexcept { return prompt_; }

 private:
  std::string prompt_;
};

}  // namespace capfuse
