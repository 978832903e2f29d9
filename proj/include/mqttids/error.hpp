#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mqttids {

enum class ErrorKind {
  MissingColumn,
  ParseError,
  EmptyDataset,
  UnknownClass,
  DegenerateClass,
  SchemaMismatch,
  SingleClass,
  RankDeficient,
  InsufficientFeatures,
  InvalidHyperparameter,
  DimensionMismatch,
  VersionMismatch,
  MalformedDocument,
  FoldTooSmall,
  LengthMismatch,
  CodeOutOfRange,
  EmptyMatrix,
  InvalidSpec,
  IoError,
  ConfigError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so that callers (the CLI
// in particular) can map it onto an exit code without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace mqttids
