#ifndef SCHRO2D_ERRORS_HPP
#define SCHRO2D_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace schro2d {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SingularMatrix : Error {
    using Error::Error;
};
struct Breakdown : Error {
    using Error::Error;
};
struct Diverged : Error {
    using Error::Error;
};
struct BadGeometry : Error {
    using Error::Error;
};
struct ParseError : Error {
    ParseError(std::size_t position, const std::string& what)
        : Error("parse error at position " + std::to_string(position) + ": " + what),
          pos(position) {}
    std::size_t pos;
};
struct EvalError : Error {
    using Error::Error;
};
struct BadConfig : Error {
    using Error::Error;
};
struct DimensionMismatch : Error {
    using Error::Error;
};
struct NotConstantPotential : Error {
    using Error::Error;
};
struct InnerSolveFailed : Error {
    using Error::Error;
};
struct DimensionTooLarge : Error {
    using Error::Error;
};
struct Timeout : Error {
    using Error::Error;
};
struct TopologyMismatch : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

} // namespace schro2d

#endif
