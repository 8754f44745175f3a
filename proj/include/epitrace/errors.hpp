#ifndef EPITRACE_ERRORS_HPP
#define EPITRACE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace epitrace {

/// Base of every error the toolkit throws.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input row. `row` is 1-based and counts the header line.
class ParseError : public Error
{
public:
    ParseError(const std::string& source, std::size_t row, const std::string& what)
        : Error(source + ":" + std::to_string(row) + ": " + what), row_(row)
    {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

/// Well-formed input that violates a data invariant (dangling id, self-edge, ...).
class ValidationError : public Error
{
public:
    ValidationError(const std::string& source, std::size_t row, const std::string& what)
        : Error(source + ":" + std::to_string(row) + ": " + what), row_(row)
    {}
    explicit ValidationError(const std::string& what) : Error(what), row_(0) {}
    std::size_t row() const { return row_; }

private:
    std::size_t row_;
};

/// Missing or unreadable input file.
class InputError : public Error
{
public:
    using Error::Error;
};

class UnknownId : public Error
{
public:
    using Error::Error;
};

class DomainError : public Error
{
public:
    using Error::Error;
};

class InvalidInterval : public DomainError
{
public:
    using DomainError::DomainError;
};

class ConfigError : public Error
{
public:
    using Error::Error;
};

class NumericalError : public Error
{
public:
    using Error::Error;
};

class EmptyPosterior : public Error
{
public:
    using Error::Error;
};

class BudgetError : public ConfigError
{
public:
    using ConfigError::ConfigError;
};

class ConditioningTimeout : public Error
{
public:
    using Error::Error;
};

} // namespace epitrace

#endif // EPITRACE_ERRORS_HPP
