#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace starcube {

// Every failure the library raises carries one of these codes. The names are
// part of the wire contract (HTTP `code` field, CLI messages), so they are
// spelled exactly as clients see them.
enum class ErrorCode {
  // schema
  DuplicateName,
  UnknownReference,
  EmptyHierarchy,
  InvalidDocument,
  // etl
  SourceNotFound,
  EncodingError,
  RaggedRow,
  UnknownMeasureColumn,
  EmptyReferenceSet,
  ConfigError,
  CatalogMismatch,
  NotInitialized,
  // cube
  UnknownCube,
  OrphanFactRow,
  UnknownLevel,
  UnknownMember,
  // query
  UnterminatedBracket,
  IllegalCharacter,
  SyntaxError,
  UnknownRole,
  UnknownHierarchy,
  AmbiguousPath,
  NonUniformSet,
  HierarchyReusedAcrossAxes,
  StaleCube,
  ResultTooLarge,
  // generic
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

struct SourcePosition {
  int line = 1;
  int column = 1;

  friend bool operator==(const SourcePosition&, const SourcePosition&) = default;
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, std::string message,
        std::optional<SourcePosition> position = std::nullopt);

  ErrorCode code() const noexcept { return code_; }
  const std::optional<SourcePosition>& position() const noexcept {
    return position_;
  }

 private:
  ErrorCode code_;
  std::optional<SourcePosition> position_;
};

}  // namespace starcube
