// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace fastsae {

enum class ErrorKind { usage, io, format, contract, parse, transport };

/// Base of every exception thrown by the engine; the kind maps onto a CLI exit class.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

struct UsageError : Error {
    explicit UsageError(const std::string& w) : Error(ErrorKind::usage, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string& w) : Error(ErrorKind::io, w) {}
};
struct FormatError : Error {
    explicit FormatError(const std::string& w) : Error(ErrorKind::format, w) {}
};
struct ContractError : Error {
    explicit ContractError(const std::string& w) : Error(ErrorKind::contract, w) {}
};

/// Raised when an LLM reply does not contain a well-formed verdict. Keeps the raw reply.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::string raw)
        : Error(ErrorKind::parse, what), raw_(std::move(raw)) {}
    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

struct TransportError : Error {
    explicit TransportError(const std::string& w) : Error(ErrorKind::transport, w) {}
};

}  // namespace fastsae
