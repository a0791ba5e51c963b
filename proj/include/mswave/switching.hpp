#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "mswave/errors.hpp"

namespace mswave::switching {

/// Generator (rate) matrix Q of a continuous-time Markov chain on K >= 2
/// states: off-diagonal entries are jump rates (>= 0), each row sums to zero.
struct GeneratorMatrix {
    Eigen::MatrixXd q;

    int states() const { return static_cast<int>(q.rows()); }

    /// Validates the generator invariants and returns the wrapped matrix.
    /// Throws ConfigError with the offending entry on violation.
    static GeneratorMatrix validated(Eigen::MatrixXd q);
};

/// Piecewise-constant coefficient path: values[i] holds on
/// [jump_times[i], jump_times[i+1]), the last value holds up to and
/// including the horizon. jump_times[0] == 0, strictly increasing, all
/// < horizon; adjacent values differ.
struct MarkovPath {
    std::vector<double> jump_times;
    std::vector<double> values;
    double horizon = 0.0;

    std::size_t intervals() const { return values.size(); }
    double interval_begin(std::size_t k) const { return jump_times[k]; }
    double interval_end(std::size_t k) const {
        return k + 1 < jump_times.size() ? jump_times[k + 1] : horizon;
    }
};

/// Builds a path from explicit jump times and values, validating the
/// MarkovPath invariants. Throws InvalidPathError.
MarkovPath fixed_path(std::vector<double> jump_times, std::vector<double> values, double horizon);

struct SamplePathOptions {
    /// Fixed initial state index; drawn uniformly over states when unset.
    std::optional<int> initial_state;
    /// When false (default), entering a state with zero exit rate throws
    /// AbsorbingStateError; when true the path simply stops jumping.
    bool allow_absorbing = false;
};

/// Samples a coefficient path on [0, horizon] by the direct (Gillespie)
/// method: exponential holding times with rate -q_ii, next state drawn
/// proportionally to the off-diagonal rates. state_values[i] is the
/// coefficient value attached to state i (values must be distinct).
MarkovPath sample_path(const GeneratorMatrix& gen, std::span<const double> state_values,
                       double horizon, std::uint64_t seed, const SamplePathOptions& opt = {});

/// Right-continuous evaluation: value on [jump_k, jump_{k+1}); t == horizon
/// returns the last value. Outside [0, horizon] throws OutOfHorizonError.
double value_at(const MarkovPath& path, double t);

/// Stationary distribution pi of an irreducible generator (pi Q = 0,
/// sum pi = 1, pi > 0). Throws ReducibleChainError when the jump graph is
/// not strongly connected.
Eigen::VectorXd stationary_distribution(const GeneratorMatrix& gen);

/// CSV with header "t_jump,value", one row per jump, plus a trailing row
/// at the horizon repeating the last value.
void write_path_csv(const MarkovPath& path, std::ostream& out);
MarkovPath read_path_csv(std::istream& in);

}  // namespace mswave::switching
