#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace trajlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Malformed input text. byte_offset points at the start of the offending line.
struct ParseError : Error {
  ParseError(const std::string& msg, std::size_t offset)
      : Error(msg + " (byte offset " + std::to_string(offset) + ")"),
        byte_offset(offset) {}
  std::size_t byte_offset;
};

// Structurally well-formed text whose node identifiers break the search grammar.
struct GrammarError : Error {
  using Error::Error;
};

// Token budget cannot hold even the prompt plus the root node.
struct GenerationCapacityError : Error {
  using Error::Error;
};

// Precondition violation on an operation's inputs.
struct DomainError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace trajlab
