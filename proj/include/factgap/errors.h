#pragma once

#include <stdexcept>
#include <string>

namespace factgap {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input records or configuration. Maps to CLI exit code 2.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// A caller broke an operation's precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// The backend could not be reached, or kept failing, after all retries.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int attempts)
        : Error(what), attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

/// Non-retryable HTTP status; carries the response body.
class BackendStatusError : public Error {
public:
    BackendStatusError(int status, std::string body)
        : Error("backend returned HTTP " + std::to_string(status) + ": " + body),
          status_(status),
          body_(std::move(body)) {}

    int status() const noexcept { return status_; }
    const std::string& body() const noexcept { return body_; }

private:
    int status_;
    std::string body_;
};

class MalformedResponseError : public Error {
public:
    using Error::Error;
};

}  // namespace factgap
