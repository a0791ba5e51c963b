#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mswave/sbl.hpp"
#include "mswave/switching.hpp"

namespace mswave::dsbl {

// ---------------------------------------------------------------------------
// Segment-wise sparse recovery. The coefficient path is piecewise constant,
// so each inter-jump interval yields an independent regression
// u_tt = D(u) theta_k on that segment's interior samples; one SBL fit per
// segment recovers the switching coefficients, and the union of segment
// estimates reconstructs the whole path. A pooled "single model" fit over
// the full horizon is kept as the non-switching baseline.
// ---------------------------------------------------------------------------

/// Known forcing evaluated at a sample: (x, y, t, coefficient value). The
/// y argument is 0 for 1-D data.
using ForcingFn = std::function<double(double, double, double, double)>;

struct SegmentData {
    int index = 0;
    double t_begin = 0.0, t_end = 0.0;
    double state_value = 0.0;  // coefficient value on the interval
    dict::DesignSystem design;
};

/// Pairs derivative blocks with path intervals and builds one DesignSystem
/// per segment. Throws ConfigError when blocks and intervals disagree.
std::vector<SegmentData> segment_data(const synth::DerivativeFields& fields,
                                      const switching::MarkovPath& path,
                                      const dict::TermLibrary& lib,
                                      const ForcingFn* forcing = nullptr);

/// Ground truth for reporting: each entry maps a term label to either a
/// constant coefficient or (when `constant` is empty) the segment's state
/// value. Labels absent from the spec have truth 0.
struct TruthSpec {
    struct Entry {
        std::string label;
        std::optional<double> constant;
    };
    std::vector<Entry> entries;

    bool tracks_state(const std::string& label) const;
    double value(const std::string& label, double state_value) const;
    /// Count of terms with (somewhere) nonzero truth.
    int nonzero_terms() const;
    /// Smallest nonzero |truth| over entries and the given states.
    double theta_min(std::span<const double> states) const;
};

struct TermReport {
    std::string label;
    double estimate = 0.0;
    std::optional<double> truth;
    /// |estimate - truth| / |truth| * 100 when truth != 0.
    std::optional<double> percent_error;
    /// truth == 0: the estimate magnitude itself is the error (flagged).
    bool zero_truth = false;
};

struct SegmentReport {
    int index = 0;
    double t_begin = 0.0, t_end = 0.0;
    double state_value = 0.0;  // NaN for the pooled single-model fit
    std::size_t n_samples = 0;
    std::vector<TermReport> terms;
    sbl::SblResult sbl;       // as solved, on unit-norm columns
    Eigen::VectorXd scales;   // column norms: estimate_j = sbl.theta_j / scales_j
    std::optional<double> bound;  // aggregate error bound when defined
    bool failed = false;
    std::string error;
};

/// One SBL fit per segment, processed concurrently under a small work pool;
/// reports come back in segment order and are bit-identical regardless of
/// scheduling. A failing segment is flagged and the rest continue.
std::vector<SegmentReport> run_dsbl(const std::vector<SegmentData>& segments,
                                    const sbl::SblConfig& cfg, const TruthSpec* truth = nullptr,
                                    int threads = 0);

/// Pooled fit over all segments' samples, ignoring the switching.
SegmentReport run_single_model(const std::vector<SegmentData>& segments,
                               const sbl::SblConfig& cfg, const TruthSpec* truth = nullptr);

/// Inputs of the aggregate recovery bound: d nonzero coefficients per
/// state, K states, smallest nonzero coefficient magnitude, noise level.
struct BoundInputs {
    int d = 1;
    int K = 1;
    double theta_min = 0.0;
    double sigma = 0.0;
};

/// sqrt(d K) * (theta_min^2 - 4 sigma theta_min + 8 sigma^2) / (2 theta_min - 4 sigma);
/// defined only while 2 theta_min - 4 sigma > 0 (else BoundUndefinedError).
double theoretical_error_bound(const BoundInputs& in);

struct StateReport {
    double state_value = 0.0;
    std::size_t n_samples = 0;
    std::vector<TermReport> terms;
};

struct ErrorSummary {
    double max_percent_error = 0.0;
    double mean_percent_error = 0.0;
    double max_zero_truth_magnitude = 0.0;
    std::size_t failed_segments = 0;
    std::vector<StateReport> states;  // sample-weighted per-state aggregation
};

/// Aggregates segment reports: worst/mean percent errors over terms with
/// nonzero truth, worst leak into zero-truth terms, and per-state weighted
/// mean estimates. Throws TruthAlignmentError when a truth label does not
/// exist in the reports.
ErrorSummary error_report(std::span<const SegmentReport> reports, const TruthSpec* truth);

/// Compares one report's estimates against each state's truth (used for the
/// single-model baseline, whose truth differs per state).
std::vector<StateReport> per_state_errors(const SegmentReport& report,
                                          std::span<const double> states,
                                          const TruthSpec& truth);

}  // namespace mswave::dsbl
