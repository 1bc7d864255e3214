#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace egm {

// Every failure raised by the library carries a machine-readable code so the
// HTTP layer and CLI can map it without string matching.
enum class ErrorCode {
  SyntaxError,
  EmptyQuery,
  UnsupportedConstruct,
  AuthError,
  RateLimited,
  MalformedPayload,
  NetworkError,
  AllProvidersFailed,
  SchemaError,
  InvalidArgument,
  EmptyVocabulary,
  MultiwordKeyword,
  NoKeywordsForTopic,
  EmptyCorpus,
  UnknownTopic,
  UnknownDoc,
  DocNotIncluded,
  UnknownAxisId,
  NoFramework,
  SchemaVersionMismatch,
  IntegrityError,
  IoError,
  Conflict,
  UnknownKind,
  NotFound,
  BindError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::SyntaxError: return "SyntaxError";
    case ErrorCode::EmptyQuery: return "EmptyQuery";
    case ErrorCode::UnsupportedConstruct: return "UnsupportedConstruct";
    case ErrorCode::AuthError: return "AuthError";
    case ErrorCode::RateLimited: return "RateLimited";
    case ErrorCode::MalformedPayload: return "MalformedPayload";
    case ErrorCode::NetworkError: return "NetworkError";
    case ErrorCode::AllProvidersFailed: return "AllProvidersFailed";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::EmptyVocabulary: return "EmptyVocabulary";
    case ErrorCode::MultiwordKeyword: return "MultiwordKeyword";
    case ErrorCode::NoKeywordsForTopic: return "NoKeywordsForTopic";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::UnknownTopic: return "UnknownTopic";
    case ErrorCode::UnknownDoc: return "UnknownDoc";
    case ErrorCode::DocNotIncluded: return "DocNotIncluded";
    case ErrorCode::UnknownAxisId: return "UnknownAxisId";
    case ErrorCode::NoFramework: return "NoFramework";
    case ErrorCode::SchemaVersionMismatch: return "SchemaVersionMismatch";
    case ErrorCode::IntegrityError: return "IntegrityError";
    case ErrorCode::IoError: return "IoError";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::UnknownKind: return "UnknownKind";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::BindError: return "BindError";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Query parse failure with the byte offset of the offending token.
class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, const std::string& expected)
      : Error(ErrorCode::SyntaxError,
              "at offset " + std::to_string(offset) + ", expected " + expected),
        offset_(offset),
        expected_(expected) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

// Import/schema failure tied to a 1-based input line.
class SchemaError : public Error {
 public:
  SchemaError(std::size_t line, const std::string& message)
      : Error(ErrorCode::SchemaError, "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace egm
