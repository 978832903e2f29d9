#include "mqttids/error.hpp"

namespace mqttids {

std::string_view to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::MissingColumn: return "MissingColumn";
    case ErrorKind::ParseError: return "ParseError";
    case ErrorKind::EmptyDataset: return "EmptyDataset";
    case ErrorKind::UnknownClass: return "UnknownClass";
    case ErrorKind::DegenerateClass: return "DegenerateClass";
    case ErrorKind::SchemaMismatch: return "SchemaMismatch";
    case ErrorKind::SingleClass: return "SingleClass";
    case ErrorKind::RankDeficient: return "RankDeficient";
    case ErrorKind::InsufficientFeatures: return "InsufficientFeatures";
    case ErrorKind::InvalidHyperparameter: return "InvalidHyperparameter";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::VersionMismatch: return "VersionMismatch";
    case ErrorKind::MalformedDocument: return "MalformedDocument";
    case ErrorKind::FoldTooSmall: return "FoldTooSmall";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::CodeOutOfRange: return "CodeOutOfRange";
    case ErrorKind::EmptyMatrix: return "EmptyMatrix";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace mqttids
