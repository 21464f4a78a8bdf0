#pragma once

#include <stdexcept>
#include <string>

namespace alignmap {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Invalid records, bad arguments, broken invariants (CLI exit code 2).
struct ValidationError : Error {
  using Error::Error;
};

/// Missing, unreadable or unwritable files (CLI exit code 2).
struct IoError : Error {
  using Error::Error;
};

/// Endpoint transport failures and contract violations (CLI exit code 3).
struct NetworkError : Error {
  using Error::Error;
};

/// A judge reply that yields no usable score; keeps the raw reply text.
struct ScoreParseError : NetworkError {
  ScoreParseError(const std::string& what, std::string raw_reply)
      : NetworkError(what), raw(std::move(raw_reply)) {}

  std::string raw;
};

}  // namespace alignmap
