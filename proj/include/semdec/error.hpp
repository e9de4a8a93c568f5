#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace semdec {

/// Base of every exception thrown by the library. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Bad container magic, truncated payload, header/payload disagreement.
class FormatError : public Error {
public:
    using Error::Error;
};

/// Text input that does not follow its grammar. Carries the 1-based line number when known.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class ShapeError : public Error {
public:
    using Error::Error;
};

/// Input that is well-formed but numerically unusable (too few samples, zero variance where it matters).
class DegenerateError : public Error {
public:
    using Error::Error;
};

class SingularSystemError : public Error {
public:
    using Error::Error;
};

class OutOfBoundsError : public Error {
public:
    using Error::Error;
};

class AlignmentError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TaxonomyError : public Error {
public:
    using Error::Error;
};

class MalformedRecordError : public TaxonomyError {
public:
    MalformedRecordError(const std::string& what, std::size_t line)
        : TaxonomyError(what + " (line " + std::to_string(line) + ")"), line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

class DanglingPointerError : public TaxonomyError {
public:
    using TaxonomyError::TaxonomyError;
};

class CycleError : public TaxonomyError {
public:
    using TaxonomyError::TaxonomyError;
};

class UnknownSynsetError : public TaxonomyError {
public:
    using TaxonomyError::TaxonomyError;
};

class NoCommonAncestorError : public TaxonomyError {
public:
    using TaxonomyError::TaxonomyError;
};

} // namespace semdec
