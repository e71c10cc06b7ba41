#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace segbias {

enum class ErrorCode {
  InvalidArgument,
  ConfigError,
  IoError,
  ParseError,
  DimensionMismatch,
  ShapeMismatch,
  DegenerateMask,
  AlreadyBiased,
  UnknownGroup,
  AllMaskedOut,
  FoldDegenerate,
  EmptyClass,
  ExpectedZero,
  NoErrors,
  GroupTooSmall,
  MissingCleanMask,
  TooFewPixels,
  UndefinedITA,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure surfaced by the library. Carries the originating module and,
/// where one is involved, the offending sample id.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string module, const std::string& message,
        std::string sample_id = {});

  ErrorCode code() const noexcept { return code_; }
  const std::string& module() const noexcept { return module_; }
  const std::string& sample_id() const noexcept { return sample_id_; }

  /// Errors caused by bad user input rather than by a failing computation.
  bool is_validation() const noexcept;

 private:
  ErrorCode code_;
  std::string module_;
  std::string sample_id_;
};

}  // namespace segbias
