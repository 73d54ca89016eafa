#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfder {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NotGnfError : public Error {
public:
    using Error::Error;
};

class NonBooleanSemiringError : public Error {
public:
    using Error::Error;
};

class UnknownNonterminalError : public Error {
public:
    using Error::Error;
};

class UnknownLetterError : public Error {
public:
    using Error::Error;
};

class UnknownSymbolError : public Error {
public:
    using Error::Error;
};

class UnboundVariableError : public Error {
public:
    using Error::Error;
};

class UnknownVariableError : public Error {
public:
    using Error::Error;
};

class UnguardedError : public Error {
public:
    using Error::Error;
};

class NotClosedError : public Error {
public:
    using Error::Error;
};

class DuplicateBinderError : public Error {
public:
    using Error::Error;
};

class AlphabetMismatchError : public Error {
public:
    using Error::Error;
};

class SemiringMismatchError : public Error {
public:
    using Error::Error;
};

/// Input error with a source position (1-based line and column).
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::size_t column, const std::string& message)
        : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + message),
          line_(line),
          column_(column),
          message_(message) {}

    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }
    const std::string& message() const { return message_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string message_;
};

}  // namespace cfder
