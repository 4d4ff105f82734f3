#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace aoplab {

inline constexpr const char* kToolVersion = "0.3.0";

/// Base of all toolkit errors. The CLI maps each subclass onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (files, fixtures, tables).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Bad invocation: unknown flags, invalid configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Anything raised while talking to, or validating the output of, a scorer.
class ScorerError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class InvariantError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

class TimeoutError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

/// Raised by phrase_logprob when a token crosses the requested span edge.
class AlignmentError : public ScorerError {
 public:
  using ScorerError::ScorerError;
};

/// Half-open byte range [begin, end).
struct CharSpan {
  std::size_t begin = 0;
  std::size_t end = 0;

  [[nodiscard]] std::size_t size() const { return end - begin; }
  [[nodiscard]] bool contains(const CharSpan& other) const {
    return other.begin >= begin && other.end <= end;
  }
  friend bool operator==(const CharSpan&, const CharSpan&) = default;
};

}  // namespace aoplab
