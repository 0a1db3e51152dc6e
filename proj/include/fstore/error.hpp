#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fstore {

enum class ErrorKind {
  InvalidArgument,
  InvalidSpec,
  DuplicateVersion,
  UnknownEntity,
  DslParseError,
  SchemaConflict,
  ImmutableFieldChange,
  NotFound,
  UnknownColumn,
  TypeMismatch,
  SourceUnavailable,
  SourceSchemaMismatch,
  TransformOutputSchemaError,
  UnknownTransformHook,
  InvalidRecord,
  StoreIoError,
  NoSinkEnabled,
  OverlapWithRunningBackfill,
  InvalidState,
  UnknownFeature,
  EntityMismatch,
};

std::string_view to_string(ErrorKind kind);

// All engine failures surface as Error; kind() is the stable, machine-readable part.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class DslParseError : public Error {
 public:
  DslParseError(int line, int column, std::vector<std::string> expected, std::string found);

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }
  const std::string& found() const noexcept { return found_; }

 private:
  int line_;
  int column_;
  std::vector<std::string> expected_;
  std::string found_;
};

[[noreturn]] void raise(ErrorKind kind, const std::string& message);

}  // namespace fstore
