#include "mswave/switching.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

#include "mswave/rng.hpp"

namespace mswave::switching {

namespace {

constexpr double kRowSumTol = 1e-12;

std::string entry_name(int i, int j) {
    return "q(" + std::to_string(i) + "," + std::to_string(j) + ")";
}

}  // namespace

GeneratorMatrix GeneratorMatrix::validated(Eigen::MatrixXd q) {
    if (q.rows() != q.cols())
        throw ConfigError("generator matrix must be square, got " + std::to_string(q.rows()) +
                          "x" + std::to_string(q.cols()));
    const int k = static_cast<int>(q.rows());
    if (k < 2) throw ConfigError("generator matrix needs at least 2 states, got " + std::to_string(k));
    for (int i = 0; i < k; ++i) {
        for (int j = 0; j < k; ++j) {
            if (!std::isfinite(q(i, j)))
                throw ConfigError("generator entry " + entry_name(i, j) + " is not finite");
            if (i != j && q(i, j) < 0.0)
                throw ConfigError("off-diagonal generator entry " + entry_name(i, j) +
                                  " is negative: " + std::to_string(q(i, j)));
        }
        const double row_sum = q.row(i).sum();
        const double scale = q.row(i).cwiseAbs().maxCoeff();
        if (std::abs(row_sum) > kRowSumTol * std::max(1.0, scale))
            throw ConfigError("generator row " + std::to_string(i) +
                              " does not sum to zero (sum = " + std::to_string(row_sum) + ")");
    }
    return GeneratorMatrix{std::move(q)};
}

MarkovPath fixed_path(std::vector<double> jump_times, std::vector<double> values, double horizon) {
    if (jump_times.empty() || jump_times.size() != values.size())
        throw InvalidPathError("path needs matching, non-empty jump_times and values (" +
                               std::to_string(jump_times.size()) + " vs " +
                               std::to_string(values.size()) + ")");
    if (!(horizon > 0.0) || !std::isfinite(horizon))
        throw InvalidPathError("path horizon must be positive and finite");
    if (jump_times.front() != 0.0)
        throw InvalidPathError("first jump time must be 0, got " +
                               std::to_string(jump_times.front()));
    for (std::size_t i = 0; i < jump_times.size(); ++i) {
        if (!std::isfinite(jump_times[i]) || !std::isfinite(values[i]))
            throw InvalidPathError("path entry " + std::to_string(i) + " is not finite");
        if (i > 0 && !(jump_times[i] > jump_times[i - 1]))
            throw InvalidPathError("jump times must be strictly increasing at index " +
                                   std::to_string(i));
        if (i > 0 && values[i] == values[i - 1])
            throw InvalidPathError("adjacent path values must differ at index " +
                                   std::to_string(i));
    }
    if (!(jump_times.back() < horizon))
        throw InvalidPathError("last jump time " + std::to_string(jump_times.back()) +
                               " must lie strictly before the horizon " + std::to_string(horizon));
    return MarkovPath{std::move(jump_times), std::move(values), horizon};
}

MarkovPath sample_path(const GeneratorMatrix& gen, std::span<const double> state_values,
                       double horizon, std::uint64_t seed, const SamplePathOptions& opt) {
    const int k = gen.states();
    if (static_cast<int>(state_values.size()) != k)
        throw ConfigError("need one state value per generator state (" +
                          std::to_string(state_values.size()) + " vs " + std::to_string(k) + ")");
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j)
            if (state_values[i] == state_values[j])
                throw ConfigError("state values must be distinct (states " + std::to_string(i) +
                                  " and " + std::to_string(j) + ")");
    if (!(horizon > 0.0)) throw InvalidPathError("horizon must be positive");

    Rng rng(seed);
    int state = 0;
    if (opt.initial_state) {
        state = *opt.initial_state;
        if (state < 0 || state >= k)
            throw ConfigError("initial state " + std::to_string(state) + " out of range");
    } else {
        state = static_cast<int>(
            std::min<double>(k - 1, std::floor(rng.uniform() * static_cast<double>(k))));
    }

    std::vector<double> jumps{0.0};
    std::vector<double> values{state_values[static_cast<std::size_t>(state)]};
    double t = 0.0;
    std::vector<double> weights(static_cast<std::size_t>(k));
    while (true) {
        const double exit_rate = -gen.q(state, state);
        if (exit_rate <= 0.0) {
            if (!opt.allow_absorbing)
                throw AbsorbingStateError("chain entered absorbing state " +
                                          std::to_string(state) + " at t = " + std::to_string(t));
            break;  // explicitly allowed: the path stops jumping
        }
        t += rng.exponential(exit_rate);
        if (t >= horizon) break;
        for (int j = 0; j < k; ++j)
            weights[static_cast<std::size_t>(j)] = (j == state) ? 0.0 : gen.q(state, j);
        state = static_cast<int>(rng.categorical(weights));
        jumps.push_back(t);
        values.push_back(state_values[static_cast<std::size_t>(state)]);
    }
    return MarkovPath{std::move(jumps), std::move(values), horizon};
}

double value_at(const MarkovPath& path, double t) {
    if (!(t >= 0.0) || !(t <= path.horizon))
        throw OutOfHorizonError("t = " + std::to_string(t) + " outside [0, " +
                                std::to_string(path.horizon) + "]");
    // Last interval whose start is <= t (right-continuous at jumps).
    const auto it = std::upper_bound(path.jump_times.begin(), path.jump_times.end(), t);
    const auto idx = static_cast<std::size_t>(it - path.jump_times.begin()) - 1;
    return path.values[idx];
}

Eigen::VectorXd stationary_distribution(const GeneratorMatrix& gen) {
    const int k = gen.states();

    // Strong connectivity of the jump graph, checked by BFS from each node.
    auto reach_count = [&](const Eigen::MatrixXd& q) {
        int ok = 0;
        for (int s = 0; s < k; ++s) {
            std::vector<char> seen(static_cast<std::size_t>(k), 0);
            std::vector<int> stack{s};
            seen[static_cast<std::size_t>(s)] = 1;
            while (!stack.empty()) {
                const int v = stack.back();
                stack.pop_back();
                for (int j = 0; j < k; ++j) {
                    if (j != v && q(v, j) > 0.0 && !seen[static_cast<std::size_t>(j)]) {
                        seen[static_cast<std::size_t>(j)] = 1;
                        stack.push_back(j);
                    }
                }
            }
            if (std::all_of(seen.begin(), seen.end(), [](char c) { return c != 0; })) ++ok;
        }
        return ok;
    };
    if (reach_count(gen.q) != k || reach_count(gen.q.transpose()) != k)
        throw ReducibleChainError("jump graph is not strongly connected");

    // Solve pi Q = 0 with the normalization row appended: least squares on
    // [Q^T; 1^T] pi = [0; 1].
    Eigen::MatrixXd a(k + 1, k);
    a.topRows(k) = gen.q.transpose();
    a.row(k).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(k + 1);
    b(k) = 1.0;
    Eigen::VectorXd pi = a.colPivHouseholderQr().solve(b);
    for (int i = 0; i < k; ++i)
        if (!(pi(i) > 0.0))
            throw NumericalError("stationary distribution has non-positive mass at state " +
                                 std::to_string(i));
    return pi;
}

void write_path_csv(const MarkovPath& path, std::ostream& out) {
    out << "t_jump,value\n";
    char buf[64];
    auto row = [&](double t, double v) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", t, v);
        out << buf;
    };
    for (std::size_t i = 0; i < path.intervals(); ++i) row(path.jump_times[i], path.values[i]);
    row(path.horizon, path.values.back());
}

MarkovPath read_path_csv(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty path file", 1);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "t_jump,value")
        throw ParseError("expected header 't_jump,value', got '" + line + "'", line_no);

    std::vector<double> times, values;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto comma = line.find(',');
        if (comma == std::string::npos) throw ParseError("missing comma in path row", line_no);
        try {
            std::size_t used = 0;
            const double t = std::stod(line.substr(0, comma), &used);
            if (used != comma) throw std::invalid_argument("trailing junk");
            const std::string vs = line.substr(comma + 1);
            const double v = std::stod(vs, &used);
            if (used != vs.size()) throw std::invalid_argument("trailing junk");
            times.push_back(t);
            values.push_back(v);
        } catch (const std::exception&) {
            throw ParseError("bad numeric field in path row '" + line + "'", line_no);
        }
    }
    if (times.size() < 2) throw ParseError("path file needs at least one jump row plus the horizon row", line_no);

    // Trailing row carries the horizon; its value must repeat the last state.
    const double horizon = times.back();
    if (values[values.size() - 1] != values[values.size() - 2])
        throw ParseError("trailing horizon row must repeat the last value", line_no);
    times.pop_back();
    values.pop_back();
    try {
        return fixed_path(std::move(times), std::move(values), horizon);
    } catch (const InvalidPathError& e) {
        throw ParseError(std::string("invalid path data: ") + e.what(), line_no);
    }
}

}  // namespace mswave::switching
