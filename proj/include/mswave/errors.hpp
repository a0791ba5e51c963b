#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mswave {

/// Base for everything this library throws on purpose. The CLI maps the
/// concrete families below onto distinct exit codes.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// --- configuration / usage ------------------------------------------------

struct ConfigError : Error {
    using Error::Error;
};

/// Malformed data file (CSV/binary). Carries the 1-based line (or byte
/// offset for binary) where parsing stopped.
struct ParseError : Error {
    ParseError(const std::string& msg, std::size_t where)
        : Error(msg + " (at line/offset " + std::to_string(where) + ")"), location(where) {}
    explicit ParseError(const std::string& msg) : Error(msg), location(0) {}
    std::size_t location;
};

struct IoError : Error {
    using Error::Error;
};

// --- Markov switching -------------------------------------------------------

struct AbsorbingStateError : Error {
    using Error::Error;
};
struct InvalidPathError : Error {
    using Error::Error;
};
struct OutOfHorizonError : Error {
    using Error::Error;
};
struct ReducibleChainError : Error {
    using Error::Error;
};

// --- wave solver ------------------------------------------------------------

struct StabilityError : Error {
    using Error::Error;
};

struct DivergenceError : Error {
    DivergenceError(const std::string& msg, std::size_t time_index_)
        : Error(msg + " (time index " + std::to_string(time_index_) + ")"),
          time_index(time_index_) {}
    std::size_t time_index;
};

// --- differencing / segmentation ---------------------------------------------

struct SegmentTooShortError : Error {
    using Error::Error;
};

// --- dictionary ---------------------------------------------------------------

struct TermParseError : Error {
    TermParseError(const std::string& msg, std::size_t position_)
        : Error(msg + " (position " + std::to_string(position_) + ")"), position(position_) {}
    std::size_t position;
};
struct MissingFieldError : Error {
    using Error::Error;
};
struct EmptySegmentError : Error {
    using Error::Error;
};
struct DegenerateColumnError : Error {
    using Error::Error;
};

// --- sparse Bayesian learning ---------------------------------------------------

struct NumericalError : Error {
    using Error::Error;
};

/// Inner weighted-l1 solver ran out of sweeps. Carries the last iterate and
/// the last max coordinate change so callers can inspect how close it got.
struct InnerSolverError : Error {
    InnerSolverError(const std::string& msg, std::vector<double> iterate, double gap_)
        : Error(msg + " (last sweep max change " + std::to_string(gap_) + ")"),
          last_iterate(std::move(iterate)),
          gap(gap_) {}
    std::vector<double> last_iterate;
    double gap;
};

struct NonDecreasingLossError : Error {
    using Error::Error;
};
struct SingularFixedPointError : Error {
    using Error::Error;
};
struct InsufficientSamplesError : Error {
    using Error::Error;
};

// --- segment-wise recovery ---------------------------------------------------

struct BoundUndefinedError : Error {
    using Error::Error;
};
struct TruthAlignmentError : Error {
    using Error::Error;
};

}  // namespace mswave
