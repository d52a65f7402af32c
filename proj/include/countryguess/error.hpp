#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace countryguess {

/// Error categories. Each maps to a distinct CLI exit code and HTTP status.
enum class ErrorKind {
    argument,
    validation,
    parse,
    decode,
    shape,
    provider,
    protocol,
    config,
    state,
    not_found,
    remote,
};

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::argument: return "argument";
    case ErrorKind::validation: return "validation";
    case ErrorKind::parse: return "parse";
    case ErrorKind::decode: return "decode";
    case ErrorKind::shape: return "shape";
    case ErrorKind::provider: return "provider";
    case ErrorKind::protocol: return "protocol";
    case ErrorKind::config: return "config";
    case ErrorKind::state: return "state";
    case ErrorKind::not_found: return "not_found";
    case ErrorKind::remote: return "remote";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct ArgumentError : Error {
    explicit ArgumentError(const std::string& m) : Error(ErrorKind::argument, m) {}
};
struct ValidationError : Error {
    explicit ValidationError(const std::string& m) : Error(ErrorKind::validation, m) {}
};
struct ParseError : Error {
    explicit ParseError(const std::string& m) : Error(ErrorKind::parse, m) {}
};
struct DecodeError : Error {
    explicit DecodeError(const std::string& m) : Error(ErrorKind::decode, m) {}
};
struct ShapeError : Error {
    explicit ShapeError(const std::string& m) : Error(ErrorKind::shape, m) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string& m) : Error(ErrorKind::config, m) {}
};
struct StateError : Error {
    explicit StateError(const std::string& m) : Error(ErrorKind::state, m) {}
};
struct NotFoundError : Error {
    explicit NotFoundError(const std::string& m) : Error(ErrorKind::not_found, m) {}
};

/// Provider failure: crash, timeout, or unusable output. Carries a stderr excerpt when one exists.
class ProviderError : public Error {
public:
    ProviderError(const std::string& m, std::string stderr_excerpt = {}, bool timed_out = false)
        : Error(ErrorKind::provider, m), stderr_excerpt_(std::move(stderr_excerpt)), timed_out_(timed_out) {}

    const std::string& stderr_excerpt() const noexcept { return stderr_excerpt_; }
    bool timed_out() const noexcept { return timed_out_; }

protected:
    ProviderError(ErrorKind kind, const std::string& m) : Error(kind, m), timed_out_(false) {}

private:
    std::string stderr_excerpt_;
    bool timed_out_;
};

/// A provider answered, but the answer violates the observation invariants.
struct ProtocolError : ProviderError {
    explicit ProtocolError(const std::string& m) : ProviderError(ErrorKind::protocol, m) {}
};

class RemoteError : public Error {
public:
    RemoteError(const std::string& m, int status) : Error(ErrorKind::remote, m), status_(status) {}
    int status() const noexcept { return status_; }

private:
    int status_;
};

/// CLI exit codes, one per error family.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int usage = 2;
inline constexpr int config = 3;
inline constexpr int decode = 4;
inline constexpr int provider = 5;
inline constexpr int remote = 6;
inline constexpr int data = 7;
inline constexpr int state = 8;
} // namespace exit_code

inline int exit_code_for(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::argument: return exit_code::usage;
    case ErrorKind::config: return exit_code::config;
    case ErrorKind::decode:
    case ErrorKind::shape: return exit_code::decode;
    case ErrorKind::provider:
    case ErrorKind::protocol: return exit_code::provider;
    case ErrorKind::remote: return exit_code::remote;
    case ErrorKind::validation:
    case ErrorKind::parse: return exit_code::data;
    case ErrorKind::state:
    case ErrorKind::not_found: return exit_code::state;
    }
    return exit_code::failure;
}

} // namespace countryguess
