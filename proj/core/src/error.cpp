#include "starcube/error.hpp"

namespace starcube {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::DuplicateName: return "DuplicateName";
    case ErrorCode::UnknownReference: return "UnknownReference";
    case ErrorCode::EmptyHierarchy: return "EmptyHierarchy";
    case ErrorCode::InvalidDocument: return "InvalidDocument";
    case ErrorCode::SourceNotFound: return "SourceNotFound";
    case ErrorCode::EncodingError: return "EncodingError";
    case ErrorCode::RaggedRow: return "RaggedRow";
    case ErrorCode::UnknownMeasureColumn: return "UnknownMeasureColumn";
    case ErrorCode::EmptyReferenceSet: return "EmptyReferenceSet";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::CatalogMismatch: return "CatalogMismatch";
    case ErrorCode::NotInitialized: return "NotInitialized";
    case ErrorCode::UnknownCube: return "UnknownCube";
    case ErrorCode::OrphanFactRow: return "OrphanFactRow";
    case ErrorCode::UnknownLevel: return "UnknownLevel";
    case ErrorCode::UnknownMember: return "UnknownMember";
    case ErrorCode::UnterminatedBracket: return "UnterminatedBracket";
    case ErrorCode::IllegalCharacter: return "IllegalCharacter";
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::UnknownRole: return "UnknownRole";
    case ErrorCode::UnknownHierarchy: return "UnknownHierarchy";
    case ErrorCode::AmbiguousPath: return "AmbiguousPath";
    case ErrorCode::NonUniformSet: return "NonUniformSet";
    case ErrorCode::HierarchyReusedAcrossAxes: return "HierarchyReusedAcrossAxes";
    case ErrorCode::StaleCube: return "StaleCube";
    case ErrorCode::ResultTooLarge: return "ResultTooLarge";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, std::string message,
             std::optional<SourcePosition> position)
    : std::runtime_error(std::move(message)),
      code_(code),
      position_(position) {}

}  // namespace starcube
