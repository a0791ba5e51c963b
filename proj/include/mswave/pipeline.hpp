#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mswave/config.hpp"
#include "mswave/dsbl.hpp"
#include "mswave/snapshot.hpp"
#include "mswave/solver.hpp"
#include "mswave/synth.hpp"

namespace mswave::pipeline {

/// Coefficient path per the config: the fixed path when present, otherwise
/// (or when force_sample) sampled from the generator.
switching::MarkovPath resolve_path(const config::ExperimentConfig& cfg, bool force_sample = false);

/// Per-segment step counts for the configured grid on the given path.
std::vector<int> segment_steps(const config::ExperimentConfig& cfg,
                               const switching::MarkovPath& path);

struct SimulateResult {
    switching::MarkovPath path;
    Snapshot clean;
    NoisySnapshot noisy;
};

SimulateResult run_simulate(const config::ExperimentConfig& cfg, bool force_sample_path = false);

struct InferResult {
    std::vector<dsbl::SegmentReport> mixture;
    std::optional<dsbl::ErrorSummary> mixture_summary;  // present when truth is known
    std::optional<dsbl::SegmentReport> single;
    std::vector<dsbl::StateReport> single_states;       // per-state errors of the pooled fit
    std::vector<double> states;                         // distinct path values, ascending
};

/// Derivative fields -> per-segment designs -> segment-wise fits (and the
/// pooled fit when configured or forced). threads = 0 picks automatically.
InferResult run_infer(const config::ExperimentConfig& cfg, const Snapshot& observed,
                      const switching::MarkovPath& path, bool force_single_model = false,
                      int threads = 0);

/// path.csv + clean/noisy snapshots (binary always, CSV when configured).
/// Returns the written file names.
std::vector<std::string> write_simulation_files(const config::ExperimentConfig& cfg,
                                                const SimulateResult& sim,
                                                const std::filesystem::path& out_dir);

/// report.json, report.csv, and (when configured) heat-map CSVs rebuilt
/// from the estimated coefficients against `reference` (the clean field
/// when available, else the observed data). Returns the written file names;
/// appends human-readable notes (e.g. a skipped heat map) to `notes`.
std::vector<std::string> write_infer_files(const config::ExperimentConfig& cfg,
                                           const InferResult& inf,
                                           const switching::MarkovPath& path,
                                           const Snapshot& reference,
                                           const std::filesystem::path& out_dir,
                                           std::vector<std::string>* notes = nullptr);

// Group labels used to line results up with bundled reference tables.
std::string interval_group(double t0, double t1);  // "0.00-1.22"
std::string state_group(double state_value);       // "M=1"

struct ComparisonRow {
    bool single_model = false;
    std::string group;
    std::string term;
    double truth = 0.0;
    double reference = 0.0;
    double ref_error_pct = 0.0;
    double estimate = 0.0;
    double error_pct = 0.0;
};

/// Lines the run's estimates up with the preset's bundled reference rows.
/// Throws TruthAlignmentError when a reference row has no matching estimate.
std::vector<ComparisonRow> compare_to_reference(const config::ExperimentConfig& cfg,
                                                const InferResult& inf);

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out);

}  // namespace mswave::pipeline
