#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gconvex {

/// Base of every error raised by the library. `kind()` is a stable
/// machine-readable tag used in JSON error reports and exit-code mapping.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& what)
        : std::runtime_error(what), kind_(std::move(kind)) {}

    const std::string& kind() const noexcept { return kind_; }

private:
    std::string kind_;
};

/// Input that could not be parsed or validated (CLI exit code 2).
class InputError : public Error {
public:
    using Error::Error;
};

class SyntaxError : public InputError {
public:
    SyntaxError(std::size_t offset, const std::string& msg)
        : InputError("SyntaxError", "syntax error at offset " + std::to_string(offset) + ": " + msg),
          offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

#define GCONVEX_DEFINE_ERROR(Name, Base)                                   \
    class Name : public Base {                                             \
    public:                                                                \
        explicit Name(const std::string& msg) : Base(#Name, msg) {}       \
    }

GCONVEX_DEFINE_ERROR(UnknownVariable, InputError);
GCONVEX_DEFINE_ERROR(DivisionHazard, InputError);
GCONVEX_DEFINE_ERROR(PreconditionFailed, InputError);
GCONVEX_DEFINE_ERROR(InputNotInEpigraph, InputError);
GCONVEX_DEFINE_ERROR(GrowthBoundViolated, InputError);

GCONVEX_DEFINE_ERROR(StabilityViolation, Error);
GCONVEX_DEFINE_ERROR(DomainTooSmall, Error);
GCONVEX_DEFINE_ERROR(NonFiniteSolution, Error);
GCONVEX_DEFINE_ERROR(InterpolationOutOfRange, Error);
GCONVEX_DEFINE_ERROR(RegressionSingular, Error);
GCONVEX_DEFINE_ERROR(PicardDivergence, Error);
GCONVEX_DEFINE_ERROR(DerivativeUnavailable, Error);
GCONVEX_DEFINE_ERROR(GridTooCoarse, Error);
GCONVEX_DEFINE_ERROR(DominationViolated, Error);
GCONVEX_DEFINE_ERROR(HypothesisNotVerified, Error);
GCONVEX_DEFINE_ERROR(InconsistentRoutes, Error);
GCONVEX_DEFINE_ERROR(AxiomViolated, Error);
GCONVEX_DEFINE_ERROR(ContradictionDetected, Error);
GCONVEX_DEFINE_ERROR(InconclusiveClassification, Error);
GCONVEX_DEFINE_ERROR(ViabilityViolated, Error);

#undef GCONVEX_DEFINE_ERROR

} // namespace gconvex
