#include "fstore/error.hpp"

namespace fstore {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::DuplicateVersion: return "DuplicateVersion";
    case ErrorKind::UnknownEntity: return "UnknownEntity";
    case ErrorKind::DslParseError: return "DslParseError";
    case ErrorKind::SchemaConflict: return "SchemaConflict";
    case ErrorKind::ImmutableFieldChange: return "ImmutableFieldChange";
    case ErrorKind::NotFound: return "NotFound";
    case ErrorKind::UnknownColumn: return "UnknownColumn";
    case ErrorKind::TypeMismatch: return "TypeMismatch";
    case ErrorKind::SourceUnavailable: return "SourceUnavailable";
    case ErrorKind::SourceSchemaMismatch: return "SourceSchemaMismatch";
    case ErrorKind::TransformOutputSchemaError: return "TransformOutputSchemaError";
    case ErrorKind::UnknownTransformHook: return "UnknownTransformHook";
    case ErrorKind::InvalidRecord: return "InvalidRecord";
    case ErrorKind::StoreIoError: return "StoreIoError";
    case ErrorKind::NoSinkEnabled: return "NoSinkEnabled";
    case ErrorKind::OverlapWithRunningBackfill: return "OverlapWithRunningBackfill";
    case ErrorKind::InvalidState: return "InvalidState";
    case ErrorKind::UnknownFeature: return "UnknownFeature";
    case ErrorKind::EntityMismatch: return "EntityMismatch";
  }
  return "Unknown";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(message), kind_(kind) {}

namespace {

std::string describe_parse_error(int line, int column, const std::vector<std::string>& expected,
                                 const std::string& found) {
  std::string msg = "line " + std::to_string(line) + ", column " + std::to_string(column) +
                    ": expected ";
  if (expected.size() == 1) {
    msg += expected.front();
  } else {
    msg += "one of {";
    for (size_t i = 0; i < expected.size(); ++i) {
      if (i) msg += ", ";
      msg += expected[i];
    }
    msg += "}";
  }
  msg += ", found " + found;
  return msg;
}

}  // namespace

DslParseError::DslParseError(int line, int column, std::vector<std::string> expected,
                             std::string found)
    : Error(ErrorKind::DslParseError, describe_parse_error(line, column, expected, found)),
      line_(line),
      column_(column),
      expected_(std::move(expected)),
      found_(std::move(found)) {}

void raise(ErrorKind kind, const std::string& message) { throw Error(kind, message); }

}  // namespace fstore
