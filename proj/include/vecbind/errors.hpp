#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vecbind {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// --- array construction and indexing ---

class ShapeError : public Error {
public:
    using Error::Error;
};

class IndexError : public Error {
public:
    using Error::Error;
};

/// Element or iteration count exceeds the signed-integer range.
class CapacityError : public Error {
public:
    using Error::Error;
};

// --- declaration parsing ---

class ParseError : public Error {
public:
    ParseError(const std::string& msg, int line, int column)
        : Error(msg + " (line " + std::to_string(line) + ", column " +
                std::to_string(column) + ")"),
          line_(line),
          column_(column) {}

    int line() const { return line_; }
    int column() const { return column_; }

private:
    int line_;
    int column_;
};

/// Declaration uses a construct outside the accepted grammar subset.
class UnsupportedDeclError : public Error {
public:
    using Error::Error;
};

class AnnotationError : public Error {
public:
    using Error::Error;
};

// --- dispatch ---

/// Actual rank of an argument is below the rank its parameter expects.
class RankError : public Error {
public:
    using Error::Error;
};

/// Shape conflict between arguments of a vectored call.
class VectorError : public Error {
public:
    using Error::Error;
};

/// Call does not match the wrapper signature (count or element types).
class UsageError : public Error {
public:
    using Error::Error;
};

// --- execution ---

class RegistrationError : public Error {
public:
    using Error::Error;
};

/// Kernel body failed; carries the first failing iteration.
class KernelError : public Error {
public:
    KernelError(const std::string& msg, std::int64_t iteration)
        : Error(msg + " (iteration " + std::to_string(iteration) + ")"),
          iteration_(iteration) {}

    std::int64_t iteration() const { return iteration_; }

private:
    std::int64_t iteration_;
};

// --- benchmarking ---

class AnalysisError : public Error {
public:
    using Error::Error;
};

class IoError : public Error {
public:
    using Error::Error;
};

}  // namespace vecbind
