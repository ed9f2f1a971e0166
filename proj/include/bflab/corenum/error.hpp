#ifndef BFLAB_CORENUM_ERROR_HPP
#define BFLAB_CORENUM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace bflab {

/// Base of every error thrown by the library.
class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input: scenario fields, CSV files, bad arguments.
class InputError : public Error
{
public:
    using Error::Error;
};

/// A scenario or data file could not be parsed. Carries the offending field
/// (JSON pointer style) and, when known, the 1-based line number.
class ParseError : public InputError
{
public:
    ParseError(std::string field, const std::string& message, int line = 0)
        : InputError(format(field, message, line)), field_(std::move(field)), line_(line)
    {}

    const std::string& field() const noexcept { return field_; }
    int line() const noexcept { return line_; }

private:
    static std::string format(const std::string& field, const std::string& message, int line)
    {
        std::string out = "parse error";
        if (line > 0)
            out += " at line " + std::to_string(line);
        if (!field.empty())
            out += " in field '" + field + "'";
        return out + ": " + message;
    }

    std::string field_;
    int line_;
};

/// Numerical failure: non-convergence, non-finite values, insufficient grids.
class NumericError : public Error
{
public:
    using Error::Error;
};

class ConvergenceError : public NumericError
{
public:
    using NumericError::NumericError;
};

/// A sampling grid does not cover the support of the density it carries.
class GridTooNarrow : public NumericError
{
public:
    using NumericError::NumericError;
};

/// Marginals that cannot belong to a common coupling, or that do not match
/// the joint density they are compared with.
class MarginalMismatch : public InputError
{
public:
    using InputError::InputError;
};

} // namespace bflab

#endif // BFLAB_CORENUM_ERROR_HPP
