#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace factorgate {

// Base for every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad or inconsistent input data: missing files, malformed headers,
// non-monotone dates, dates absent from a panel.
class DataError : public Error {
public:
    using Error::Error;
};

class InsufficientHistory : public DataError {
public:
    InsufficientHistory(const std::string& what, std::size_t required, std::size_t available)
        : DataError(what), required_(required), available_(available) {}

    std::size_t required() const noexcept { return required_; }
    std::size_t available() const noexcept { return available_; }

private:
    std::size_t required_;
    std::size_t available_;
};

// Formula could not be parsed. offset/length locate the problem in the source.
class ParseError : public Error {
public:
    ParseError(const std::string& message, std::size_t offset, std::size_t length = 0)
        : Error(message + " at offset " + std::to_string(offset)),
          message_(message),
          offset_(offset),
          length_(length) {}

    const std::string& message() const noexcept { return message_; }
    std::size_t offset() const noexcept { return offset_; }
    std::size_t length() const noexcept { return length_; }

private:
    std::string message_;
    std::size_t offset_;
    std::size_t length_;
};

// Invalid configuration or command-line usage.
class ConfigError : public Error {
public:
    using Error::Error;
};

// Text-generation or judge service failed after retries.
class RemoteError : public Error {
public:
    using Error::Error;
};

// Total volume in the execution window is zero.
class NoLiquidity : public Error {
public:
    using Error::Error;
};

}  // namespace factorgate
