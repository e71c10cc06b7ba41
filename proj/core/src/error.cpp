#include "segbias/error.hpp"

namespace segbias {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::DegenerateMask: return "DegenerateMask";
    case ErrorCode::AlreadyBiased: return "AlreadyBiased";
    case ErrorCode::UnknownGroup: return "UnknownGroup";
    case ErrorCode::AllMaskedOut: return "AllMaskedOut";
    case ErrorCode::FoldDegenerate: return "FoldDegenerate";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::ExpectedZero: return "ExpectedZero";
    case ErrorCode::NoErrors: return "NoErrors";
    case ErrorCode::GroupTooSmall: return "GroupTooSmall";
    case ErrorCode::MissingCleanMask: return "MissingCleanMask";
    case ErrorCode::TooFewPixels: return "TooFewPixels";
    case ErrorCode::UndefinedITA: return "UndefinedITA";
  }
  return "Unknown";
}

namespace {

std::string compose(ErrorCode code, const std::string& module,
                    const std::string& message, const std::string& sample_id) {
  std::string out = module + ": " + std::string(to_string(code)) + ": " + message;
  if (!sample_id.empty()) out += " (sample " + sample_id + ")";
  return out;
}

}  // namespace

Error::Error(ErrorCode code, std::string module, const std::string& message,
             std::string sample_id)
    : std::runtime_error(compose(code, module, message, sample_id)),
      code_(code),
      module_(std::move(module)),
      sample_id_(std::move(sample_id)) {}

bool Error::is_validation() const noexcept {
  return code_ == ErrorCode::InvalidArgument || code_ == ErrorCode::ConfigError ||
         code_ == ErrorCode::ParseError;
}

}  // namespace segbias
