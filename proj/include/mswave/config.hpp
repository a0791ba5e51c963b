#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "mswave/dsbl.hpp"
#include "mswave/sbl.hpp"
#include "mswave/switching.hpp"

namespace mswave::config {

enum class Family { SineGordon, KleinGordon, Wave2d };

std::string family_name(Family f);

/// Problem-family parameters. Interpretation per family:
///   sine_gordon:  u_tt = m u_xx + sine_coeff sin(omega u) on [0,length],
///                 u(x,0) = amplitude exp(-(x-length/2)^2), u_t(x,0)=0.
///   klein_gordon: u_tt = m u_xx + linear_coeff u + cubic_coeff u^3,
///                 same Gaussian start.
///   wave2d:       u_tt = m lap(u) + f on [0,pi]^2 with the built-in
///                 f = (1+2m) e^{-t} sin x sin y and u(.,0) = sin x sin y,
///                 u_t(.,0) = -sin x sin y.
struct ProblemConfig {
    Family family = Family::SineGordon;
    double length = 10.0;
    double amplitude = 10.0;
    double sine_coeff = -1.0;
    double omega = 1.0;
    double linear_coeff = -1.0;
    double cubic_coeff = -1.0;
};

/// Space counts are interval counts (nodes = intervals + 1). Time stepping
/// is either a fixed per-segment step count or a fixed dt that must divide
/// every segment duration; exactly one of the two is set.
struct GridConfig {
    int space_intervals = 0;        // 1-D families
    int x_intervals = 0;            // wave2d
    int y_intervals = 0;
    int steps_per_segment = 0;      // 0 when dt drives the stepping
    double dt = 0.0;                // 0 when steps_per_segment drives it
};

/// Coefficient path: replayed verbatim when fixed_path is present, sampled
/// from the generator otherwise. Presets carry both so the path can be
/// resampled on request.
struct MarkovConfig {
    std::optional<switching::MarkovPath> fixed_path;
    std::optional<switching::GeneratorMatrix> generator;
    std::vector<double> state_values;
    double horizon = 0.0;
    std::uint64_t seed = 0;
    std::optional<int> initial_state;
};

struct NoiseConfig {
    double eta = 0.0;
    std::uint64_t seed = 0;
};

struct OutputConfig {
    std::string dir = "out";
    bool write_csv = false;           // long-form CSV next to the binary snapshots
    bool heatmap = true;
    std::vector<double> heatmap_times;  // 2-D slice times; empty = 0,T/4,..,T
};

/// Tolerances the reproduction presets promise to meet; kept in the config
/// files (not code) so the policy is auditable next to the data it governs.
struct AcceptancePolicy {
    double max_percent_error = 0.0;
    double distractor_tolerance = 0.0;
};

/// One row of the published reference table bundled with a preset: the
/// interval (or state) it belongs to, the term, and the reference estimate.
struct ReferenceRow {
    std::string group;
    std::string term;
    double value = 0.0;
    double error_pct = 0.0;
};

struct ExperimentConfig {
    std::string name;
    ProblemConfig problem;
    GridConfig grid;
    MarkovConfig markov;
    NoiseConfig noise;
    int smooth_window = 0;
    std::vector<std::string> library;
    bool known_forcing = false;
    sbl::SblConfig sbl;
    std::optional<dsbl::TruthSpec> truth;
    OutputConfig output;
    std::optional<AcceptancePolicy> acceptance;
    std::vector<ReferenceRow> reference;
    std::vector<ReferenceRow> reference_single;  // pooled-model rows, when published
    bool run_single_model = false;

    bool two_d() const { return problem.family == Family::Wave2d; }
};

/// Strict parse: unknown keys, missing required keys, or type mismatches
/// throw ConfigError naming the offending key. `origin` labels messages.
ExperimentConfig parse_config(const std::string& json_text, const std::string& origin = "config");

ExperimentConfig load_config(const std::filesystem::path& path);

/// Built-in preset configs (embedded at build time from configs/*.json).
const std::vector<std::pair<std::string, std::string>>& preset_texts();
std::vector<std::string> preset_names();
ExperimentConfig preset(const std::string& name);

}  // namespace mswave::config
