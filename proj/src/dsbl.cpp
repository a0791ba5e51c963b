#include "mswave/dsbl.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <set>
#include <thread>

namespace mswave::dsbl {

std::vector<SegmentData> segment_data(const synth::DerivativeFields& fields,
                                      const switching::MarkovPath& path,
                                      const dict::TermLibrary& lib, const ForcingFn* forcing) {
    if (fields.segments.size() != path.intervals())
        throw ConfigError("derivative fields carry " + std::to_string(fields.segments.size()) +
                          " segments but the path has " + std::to_string(path.intervals()) +
                          " intervals");
    std::vector<SegmentData> out;
    out.reserve(fields.segments.size());
    for (std::size_t k = 0; k < fields.segments.size(); ++k) {
        const auto& block = fields.segments[k];
        if (std::abs(block.t_begin - path.interval_begin(k)) > 1e-9 * std::max(1.0, path.horizon))
            throw ConfigError("segment " + std::to_string(k) + " starts at t = " +
                              std::to_string(block.t_begin) + " but the path interval starts at " +
                              std::to_string(path.interval_begin(k)));
        SegmentData seg;
        seg.index = static_cast<int>(k);
        seg.t_begin = block.t_begin;
        seg.t_end = block.t_end;
        seg.state_value = path.values[k];
        if (forcing && *forcing) {
            Eigen::VectorXd f(static_cast<Eigen::Index>(block.n()));
            for (std::size_t s = 0; s < block.n(); ++s) {
                const auto& co = block.coords[s];
                const double xs = fields.x[static_cast<std::size_t>(co.ix)];
                const double ys = fields.two_d ? fields.y[static_cast<std::size_t>(co.iy)] : 0.0;
                const double ts = fields.t[static_cast<std::size_t>(co.jt)];
                f(static_cast<Eigen::Index>(s)) = (*forcing)(xs, ys, ts, seg.state_value);
            }
            seg.design = dict::build_design(block, lib, &f);
        } else {
            seg.design = dict::build_design(block, lib);
        }
        out.push_back(std::move(seg));
    }
    return out;
}

bool TruthSpec::tracks_state(const std::string& label) const {
    for (const auto& e : entries)
        if (e.label == label) return !e.constant.has_value();
    return false;
}

double TruthSpec::value(const std::string& label, double state_value) const {
    for (const auto& e : entries)
        if (e.label == label) return e.constant ? *e.constant : state_value;
    return 0.0;
}

int TruthSpec::nonzero_terms() const {
    int d = 0;
    for (const auto& e : entries)
        if (!e.constant || *e.constant != 0.0) ++d;
    return d;
}

double TruthSpec::theta_min(std::span<const double> states) const {
    double lo = std::numeric_limits<double>::infinity();
    for (const auto& e : entries) {
        if (e.constant) {
            if (*e.constant != 0.0) lo = std::min(lo, std::abs(*e.constant));
        } else {
            for (double s : states)
                if (s != 0.0) lo = std::min(lo, std::abs(s));
        }
    }
    return lo;
}

double theoretical_error_bound(const BoundInputs& in) {
    if (in.d < 1 || in.K < 1) throw ConfigError("bound needs d >= 1 and K >= 1");
    if (!(in.theta_min > 0.0) || !std::isfinite(in.theta_min))
        throw ConfigError("bound needs theta_min > 0");
    if (!(in.sigma >= 0.0) || !std::isfinite(in.sigma)) throw ConfigError("bound needs sigma >= 0");
    const double denom = 2.0 * in.theta_min - 4.0 * in.sigma;
    if (!(denom > 0.0))
        throw BoundUndefinedError("bound undefined: 2*theta_min - 4*sigma = " +
                                  std::to_string(denom) + " is not positive");
    const double num =
        in.theta_min * in.theta_min - 4.0 * in.sigma * in.theta_min + 8.0 * in.sigma * in.sigma;
    return std::sqrt(static_cast<double>(in.d) * static_cast<double>(in.K)) * num / denom;
}

namespace {

std::vector<double> distinct_states(const std::vector<SegmentData>& segments) {
    std::set<double> s;
    for (const auto& seg : segments) s.insert(seg.state_value);
    return {s.begin(), s.end()};
}

TermReport make_term_report(const std::string& label, double estimate, const TruthSpec* truth,
                            double state_value) {
    TermReport tr;
    tr.label = label;
    tr.estimate = estimate;
    if (truth) {
        const double tv = truth->value(label, state_value);
        tr.truth = tv;
        if (tv != 0.0)
            tr.percent_error = std::abs(estimate - tv) / std::abs(tv) * 100.0;
        else
            tr.zero_truth = true;
    }
    return tr;
}

SegmentReport fit_one(const SegmentData& seg, const sbl::SblConfig& cfg, const TruthSpec* truth,
                      const std::vector<double>& states) {
    SegmentReport rep;
    rep.index = seg.index;
    rep.t_begin = seg.t_begin;
    rep.t_end = seg.t_end;
    rep.state_value = seg.state_value;
    rep.n_samples = static_cast<std::size_t>(seg.design.n());
    try {
        auto [scaled, scales] = dict::column_normalize(seg.design);
        rep.sbl = sbl::run_sbl(scaled, cfg);
        rep.scales = std::move(scales);
        rep.terms.reserve(seg.design.labels.size());
        for (std::size_t j = 0; j < seg.design.labels.size(); ++j) {
            const double est =
                rep.sbl.theta(static_cast<Eigen::Index>(j)) / rep.scales(static_cast<Eigen::Index>(j));
            rep.terms.push_back(
                make_term_report(seg.design.labels[j], est, truth, seg.state_value));
        }
        if (truth && !states.empty()) {
            const double tmin = truth->theta_min(states);
            const double sigma = std::sqrt(rep.sbl.sigma2);
            if (std::isfinite(tmin) && 2.0 * tmin - 4.0 * sigma > 0.0)
                rep.bound = theoretical_error_bound(BoundInputs{
                    truth->nonzero_terms(), static_cast<int>(states.size()), tmin, sigma});
        }
    } catch (const Error& e) {
        rep.failed = true;
        rep.error = e.what();
    }
    return rep;
}

}  // namespace

std::vector<SegmentReport> run_dsbl(const std::vector<SegmentData>& segments,
                                    const sbl::SblConfig& cfg, const TruthSpec* truth,
                                    int threads) {
    std::vector<SegmentReport> reports(segments.size());
    if (segments.empty()) return reports;
    const auto states = distinct_states(segments);

    std::size_t pool = threads > 0 ? static_cast<std::size_t>(threads)
                                   : std::max(1u, std::thread::hardware_concurrency());
    pool = std::min(pool, segments.size());

    // Every segment is independent and its fit deterministic, so the reports
    // do not depend on the schedule; only the assembly order matters.
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= segments.size()) return;
            reports[i] = fit_one(segments[i], cfg, truth, states);
        }
    };
    if (pool <= 1) {
        worker();
    } else {
        std::vector<std::thread> crew;
        crew.reserve(pool);
        for (std::size_t i = 0; i < pool; ++i) crew.emplace_back(worker);
        for (auto& th : crew) th.join();
    }
    return reports;
}

SegmentReport run_single_model(const std::vector<SegmentData>& segments,
                               const sbl::SblConfig& cfg, const TruthSpec* truth) {
    if (segments.empty()) throw ConfigError("single-model fit needs at least one segment");
    const auto& labels = segments.front().design.labels;
    Eigen::Index total = 0;
    for (const auto& seg : segments) {
        if (seg.design.labels != labels)
            throw ConfigError("single-model fit needs identical term libraries across segments");
        total += seg.design.n();
    }
    SegmentData pooled;
    pooled.index = -1;
    pooled.t_begin = segments.front().t_begin;
    pooled.t_end = segments.back().t_end;
    pooled.state_value = std::numeric_limits<double>::quiet_NaN();
    pooled.design.labels = labels;
    pooled.design.y.resize(total);
    pooled.design.D.resize(total, static_cast<Eigen::Index>(labels.size()));
    Eigen::Index row = 0;
    for (const auto& seg : segments) {
        pooled.design.y.segment(row, seg.design.n()) = seg.design.y;
        pooled.design.D.middleRows(row, seg.design.n()) = seg.design.D;
        pooled.design.coords.insert(pooled.design.coords.end(), seg.design.coords.begin(),
                                    seg.design.coords.end());
        pooled.design.dropped_rows += seg.design.dropped_rows;
        row += seg.design.n();
    }
    // Truth is per state; a pooled fit compares against constants only.
    TruthSpec constants_only;
    if (truth)
        for (const auto& e : truth->entries)
            if (e.constant) constants_only.entries.push_back(e);
    return fit_one(pooled, cfg, truth ? &constants_only : nullptr, {});
}

ErrorSummary error_report(std::span<const SegmentReport> reports, const TruthSpec* truth) {
    ErrorSummary sum;
    if (truth) {
        // Every truth label must actually appear in the reports.
        for (const auto& e : truth->entries) {
            bool found = false;
            for (const auto& rep : reports) {
                for (const auto& term : rep.terms) found = found || term.label == e.label;
            }
            if (!found && !reports.empty())
                throw TruthAlignmentError("truth label '" + e.label +
                                          "' does not match any dictionary term");
        }
    }
    double percent_sum = 0.0;
    std::size_t percent_count = 0;
    for (const auto& rep : reports) {
        if (rep.failed) {
            ++sum.failed_segments;
            continue;
        }
        for (const auto& term : rep.terms) {
            if (term.percent_error) {
                sum.max_percent_error = std::max(sum.max_percent_error, *term.percent_error);
                percent_sum += *term.percent_error;
                ++percent_count;
            } else if (term.zero_truth) {
                sum.max_zero_truth_magnitude =
                    std::max(sum.max_zero_truth_magnitude, std::abs(term.estimate));
            }
        }
    }
    if (percent_count > 0) sum.mean_percent_error = percent_sum / static_cast<double>(percent_count);

    // Per-state aggregation: sample-weighted mean estimate per term.
    std::set<double> state_set;
    for (const auto& rep : reports)
        if (!rep.failed && std::isfinite(rep.state_value)) state_set.insert(rep.state_value);
    for (double sv : state_set) {
        StateReport st;
        st.state_value = sv;
        std::vector<std::string> labels;
        for (const auto& rep : reports)
            if (!rep.failed && rep.state_value == sv && labels.empty())
                for (const auto& term : rep.terms) labels.push_back(term.label);
        for (const auto& label : labels) {
            double wsum = 0.0, est = 0.0;
            for (const auto& rep : reports) {
                if (rep.failed || rep.state_value != sv) continue;
                for (const auto& term : rep.terms) {
                    if (term.label == label) {
                        est += static_cast<double>(rep.n_samples) * term.estimate;
                        wsum += static_cast<double>(rep.n_samples);
                    }
                }
            }
            if (wsum > 0.0) est /= wsum;
            st.terms.push_back(make_term_report(label, est, truth, sv));
        }
        for (const auto& rep : reports)
            if (!rep.failed && rep.state_value == sv) st.n_samples += rep.n_samples;
        sum.states.push_back(std::move(st));
    }
    return sum;
}

std::vector<StateReport> per_state_errors(const SegmentReport& report,
                                          std::span<const double> states,
                                          const TruthSpec& truth) {
    std::vector<StateReport> out;
    out.reserve(states.size());
    for (double sv : states) {
        StateReport st;
        st.state_value = sv;
        st.n_samples = report.n_samples;
        for (const auto& term : report.terms)
            st.terms.push_back(make_term_report(term.label, term.estimate, &truth, sv));
        out.push_back(std::move(st));
    }
    return out;
}

}  // namespace mswave::dsbl
