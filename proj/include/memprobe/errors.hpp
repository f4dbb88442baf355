#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace memprobe {

/// Base of every error raised by the harness. `category()` is the short tag
/// the CLI prints in front of the message (e.g. "error[parse]: ...").
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
    virtual std::string_view category() const noexcept { return "error"; }
};

class ParseError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "parse"; }
};

class IntegrityError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "integrity"; }
};

class ArgumentError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "argument"; }
};

class NotFoundError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "not-found"; }
};

class IoError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "io"; }
};

class ProviderError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "provider"; }
};

/// Retryable provider failure (connection reset, 5xx, 429).
class TransportError : public ProviderError {
  public:
    using ProviderError::ProviderError;
};

class FixtureMissingError : public ProviderError {
  public:
    explicit FixtureMissingError(std::string digest)
        : ProviderError("no replay fixture for request digest " + digest), digest_(std::move(digest)) {}
    const std::string& digest() const noexcept { return digest_; }
    std::string_view category() const noexcept override { return "fixture-missing"; }

  private:
    std::string digest_;
};

class StructuredOutputError : public ProviderError {
  public:
    using ProviderError::ProviderError;
    std::string_view category() const noexcept override { return "structured-output"; }
};

class StatisticError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "statistic"; }
};

class AlignmentError : public Error {
  public:
    using Error::Error;
    std::string_view category() const noexcept override { return "alignment"; }
};

}  // namespace memprobe
