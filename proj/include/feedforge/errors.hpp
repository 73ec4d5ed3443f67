// Copyright 2026 the feedforge authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace feedforge {

enum class Errc {
  io_error,
  invalid_argument,
  config_error,
  // queue / wal
  oversized_body,
  corrupt_log,
  // ingest
  ambiguous_key,
  too_deep,
  // warehouse
  duplicate_table,
  duplicate_column,
  type_mismatch,
  syntax_error,
  unknown_column,
  unknown_table,
  aggregate_misuse,
  arithmetic_overflow,
  invalid_query,
  // blobstore / features
  not_found,
  integrity_error,
  decode_error,
  encode_error,
  // labeling / dataset
  empty_population,
  missing_feature,
  checksum_mismatch,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::io_error: return "IoError";
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config_error: return "ConfigError";
    case Errc::oversized_body: return "OversizedBody";
    case Errc::corrupt_log: return "CorruptLog";
    case Errc::ambiguous_key: return "AmbiguousKey";
    case Errc::too_deep: return "TooDeep";
    case Errc::duplicate_table: return "DuplicateTable";
    case Errc::duplicate_column: return "DuplicateColumn";
    case Errc::type_mismatch: return "TypeMismatch";
    case Errc::syntax_error: return "SyntaxError";
    case Errc::unknown_column: return "UnknownColumn";
    case Errc::unknown_table: return "UnknownTable";
    case Errc::aggregate_misuse: return "AggregateMisuse";
    case Errc::arithmetic_overflow: return "ArithmeticOverflow";
    case Errc::invalid_query: return "InvalidQuery";
    case Errc::not_found: return "NotFound";
    case Errc::integrity_error: return "IntegrityError";
    case Errc::decode_error: return "DecodeError";
    case Errc::encode_error: return "EncodeError";
    case Errc::empty_population: return "EmptyPopulation";
    case Errc::missing_feature: return "MissingFeature";
    case Errc::checksum_mismatch: return "ChecksumMismatch";
  }
  return "UnknownError";
}

/// Exception carrying a machine-checkable error code and, where it makes
/// sense (parse errors, log corruption, decode failures), a byte offset.
class Error : public std::runtime_error {
 public:
  static constexpr std::size_t npos = static_cast<std::size_t>(-1);

  Error(Errc code, std::string message, std::size_t offset = npos)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message),
        code_(code),
        offset_(offset) {}

  Errc code() const noexcept { return code_; }
  bool has_offset() const noexcept { return offset_ != npos; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  Errc code_;
  std::size_t offset_;
};

[[noreturn]] inline void raise(Errc code, std::string message,
                               std::size_t offset = Error::npos) {
  throw Error(code, std::move(message), offset);
}

}  // namespace feedforge
