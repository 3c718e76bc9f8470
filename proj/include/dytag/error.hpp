#pragma once

#include <stdexcept>
#include <string>

namespace dytag {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent dataset files. Message names file and line.
class IngestError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration, detected before any stage runs.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Precondition violated by a caller (unsorted queries, bad fractions, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

class ReplayMissError : public Error {
 public:
  explicit ReplayMissError(std::string digest)
      : Error("replay miss: no transcript record for digest " + digest), digest_(std::move(digest)) {}
  const std::string& digest() const noexcept { return digest_; }

 private:
  std::string digest_;
};

class MockMissError : public Error {
 public:
  using Error::Error;
};

/// Agent output that could not be parsed into the expected shape.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::string raw) : Error(what), raw_(std::move(raw)) {}
  const std::string& raw() const noexcept { return raw_; }

 private:
  std::string raw_;
};

}  // namespace dytag
