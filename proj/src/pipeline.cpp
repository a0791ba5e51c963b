#include "mswave/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mswave/dictionary.hpp"
#include "mswave/io.hpp"

namespace mswave::pipeline {

namespace {

using config::ExperimentConfig;
using config::Family;

double forcing_2d(double x, double y, double t, double m) {
    return (1.0 + 2.0 * m) * std::exp(-t) * std::sin(x) * std::sin(y);
}

solver::WaveProblem1D problem_1d(const ExperimentConfig& cfg) {
    const auto& p = cfg.problem;
    solver::WaveProblem1D prob;
    prob.length = p.length;
    if (p.family == Family::SineGordon)
        prob.nonlinearity = solver::SineTerm{p.sine_coeff, p.omega};
    else
        prob.nonlinearity = solver::CubicTerm{p.linear_coeff, p.cubic_coeff};
    const double a = p.amplitude;
    const double c = p.length / 2.0;
    prob.initial_profile = [a, c](double x) { return a * std::exp(-(x - c) * (x - c)); };
    return prob;  // initial_velocity stays null: starts at rest
}

solver::WaveProblem2D problem_2d() {
    solver::WaveProblem2D prob;
    prob.forcing = forcing_2d;
    prob.initial_profile = [](double x, double y) { return std::sin(x) * std::sin(y); };
    prob.initial_velocity = [](double x, double y) { return -std::sin(x) * std::sin(y); };
    return prob;
}

std::ofstream open_out(const std::filesystem::path& p) {
    std::ofstream f(p);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    return f;
}

void fmt(std::ostream& out, double v, const char* spec = "%.17g") {
    char buf[40];
    std::snprintf(buf, sizeof buf, spec, v);
    out << buf;
}

/// Estimate of one term in a report, 0 when the term is absent.
double estimate_of(const dsbl::SegmentReport& rep, const std::string& label) {
    for (const auto& t : rep.terms)
        if (t.label == label) return t.estimate;
    return 0.0;
}

bool has_term(const dsbl::SegmentReport& rep, const std::string& label) {
    for (const auto& t : rep.terms)
        if (t.label == label) return true;
    return false;
}

}  // namespace

switching::MarkovPath resolve_path(const ExperimentConfig& cfg, bool force_sample) {
    if (!force_sample && cfg.markov.fixed_path) return *cfg.markov.fixed_path;
    if (!cfg.markov.generator)
        throw ConfigError("path sampling requires markov.generator in config '" + cfg.name + "'");
    switching::SamplePathOptions opt;
    opt.initial_state = cfg.markov.initial_state;
    return switching::sample_path(*cfg.markov.generator, cfg.markov.state_values,
                                  cfg.markov.horizon, cfg.markov.seed, opt);
}

std::vector<int> segment_steps(const ExperimentConfig& cfg, const switching::MarkovPath& path) {
    if (cfg.grid.dt != 0.0) return solver::uniform_segment_steps(path, cfg.grid.dt);
    return std::vector<int>(path.intervals(), cfg.grid.steps_per_segment);
}

SimulateResult run_simulate(const ExperimentConfig& cfg, bool force_sample_path) {
    SimulateResult out;
    out.path = resolve_path(cfg, force_sample_path);
    const auto steps = segment_steps(cfg, out.path);
    if (cfg.two_d()) {
        solver::Grid2D grid{cfg.grid.x_intervals, cfg.grid.y_intervals, steps};
        out.clean = solver::solve_wave_2d(problem_2d(), out.path, grid);
    } else {
        solver::Grid1D grid{cfg.grid.space_intervals, steps};
        out.clean = solver::solve_wave_1d(problem_1d(cfg), out.path, grid);
    }
    out.noisy = synth::add_noise(out.clean, cfg.noise.eta, cfg.noise.seed);
    return out;
}

InferResult run_infer(const ExperimentConfig& cfg, const Snapshot& observed,
                      const switching::MarkovPath& path, bool force_single_model, int threads) {
    const auto lib = dict::TermLibrary::from_strings(cfg.library);
    auto sel = dict::required_fields(lib);
    sel.utt = true;
    const auto fields = synth::compute_fields(observed, sel, cfg.smooth_window);

    const dsbl::ForcingFn forcing = forcing_2d;
    const dsbl::ForcingFn* fptr = cfg.known_forcing ? &forcing : nullptr;
    const auto segs = dsbl::segment_data(fields, path, lib, fptr);
    const dsbl::TruthSpec* truth = cfg.truth ? &*cfg.truth : nullptr;

    InferResult out;
    out.mixture = dsbl::run_dsbl(segs, cfg.sbl, truth, threads);
    if (truth) out.mixture_summary = dsbl::error_report(out.mixture, truth);
    std::set<double> st(path.values.begin(), path.values.end());
    out.states.assign(st.begin(), st.end());
    if (cfg.run_single_model || force_single_model) {
        out.single = dsbl::run_single_model(segs, cfg.sbl, truth);
        if (truth && !out.single->failed)
            out.single_states = dsbl::per_state_errors(*out.single, out.states, *truth);
    }
    return out;
}

std::vector<std::string> write_simulation_files(const ExperimentConfig& cfg,
                                                const SimulateResult& sim,
                                                const std::filesystem::path& out_dir) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    auto emit = [&](const std::string& name) { written.push_back(name); };

    io::save_path_csv(sim.path, out_dir / "path.csv");
    emit("path.csv");
    io::FieldMeta clean_meta{"u", 0.0, 0};
    io::FieldMeta noisy_meta{"u_noisy", sim.noisy.eta, sim.noisy.seed};
    io::save_snapshot_bin(sim.clean, out_dir / "clean.bin", clean_meta);
    emit("clean.bin");
    io::save_snapshot_bin(sim.noisy.data, out_dir / "noisy.bin", noisy_meta);
    emit("noisy.bin");
    if (cfg.output.write_csv) {
        io::save_snapshot_csv(sim.clean, out_dir / "clean.csv", clean_meta);
        emit("clean.csv");
        io::save_snapshot_csv(sim.noisy.data, out_dir / "noisy.csv", noisy_meta);
        emit("noisy.csv");
    }
    return written;
}

namespace {

using nlohmann::json;

json term_json(const dsbl::TermReport& t) {
    json j{{"term", t.label}, {"estimate", t.estimate}, {"zero_truth", t.zero_truth}};
    if (t.truth) j["truth"] = *t.truth;
    if (t.percent_error) j["percent_error"] = *t.percent_error;
    return j;
}

json segment_json(const dsbl::SegmentReport& s, bool pooled) {
    json j;
    if (!pooled) {
        j["index"] = s.index;
        j["state"] = s.state_value;
        j["group"] = interval_group(s.t_begin, s.t_end);
    }
    j["t_begin"] = s.t_begin;
    j["t_end"] = s.t_end;
    j["n_samples"] = s.n_samples;
    j["failed"] = s.failed;
    if (s.failed) {
        j["error"] = s.error;
        return j;
    }
    json terms = json::array();
    for (const auto& t : s.terms) terms.push_back(term_json(t));
    j["terms"] = std::move(terms);
    j["converged"] = s.sbl.converged;
    j["iterations"] = s.sbl.iterations;
    j["sigma2"] = s.sbl.sigma2;
    j["kkt"] = s.sbl.kkt;
    j["loss_trace"] = s.sbl.loss_trace;
    if (s.bound) j["error_bound"] = *s.bound;
    return j;
}

json states_json(const std::vector<dsbl::StateReport>& states) {
    json arr = json::array();
    for (const auto& st : states) {
        json terms = json::array();
        for (const auto& t : st.terms) terms.push_back(term_json(t));
        arr.push_back(json{{"state", st.state_value},
                           {"n_samples", st.n_samples},
                           {"terms", std::move(terms)}});
    }
    return arr;
}

void write_report_json(const ExperimentConfig& cfg, const InferResult& inf, std::ostream& out) {
    json mixture;
    json segs = json::array();
    for (const auto& s : inf.mixture) segs.push_back(segment_json(s, false));
    mixture["segments"] = std::move(segs);
    if (inf.mixture_summary) {
        const auto& su = *inf.mixture_summary;
        mixture["summary"] = json{{"max_percent_error", su.max_percent_error},
                                  {"mean_percent_error", su.mean_percent_error},
                                  {"max_zero_truth_magnitude", su.max_zero_truth_magnitude},
                                  {"failed_segments", su.failed_segments},
                                  {"states", states_json(su.states)}};
    }
    json root{{"name", cfg.name},
              {"family", config::family_name(cfg.problem.family)},
              {"mixture", std::move(mixture)}};
    if (inf.single) {
        json single = segment_json(*inf.single, true);
        if (!inf.single_states.empty()) single["states"] = states_json(inf.single_states);
        root["single"] = std::move(single);
    }
    out << root.dump(2) << '\n';
}

void write_report_csv(const InferResult& inf, std::ostream& out) {
    out << "model,segment,group,t_begin,t_end,state,term,estimate,truth,percent_error,zero_truth\n";
    auto row = [&out](const char* model, int segment, const std::string& group, double t0,
                      double t1, double state, const dsbl::TermReport& t) {
        out << model << ',' << segment << ',' << group << ',';
        fmt(out, t0);
        out << ',';
        fmt(out, t1);
        out << ',';
        if (std::isfinite(state)) fmt(out, state);
        out << ',' << t.label << ',';
        fmt(out, t.estimate);
        out << ',';
        if (t.truth) fmt(out, *t.truth);
        out << ',';
        if (t.percent_error) fmt(out, *t.percent_error);
        out << ',' << (t.zero_truth ? 1 : 0) << '\n';
    };
    for (const auto& s : inf.mixture) {
        if (s.failed) continue;
        for (const auto& t : s.terms)
            row("mixture", s.index, interval_group(s.t_begin, s.t_end), s.t_begin, s.t_end,
                s.state_value, t);
    }
    if (inf.single && !inf.single->failed) {
        const auto& s = *inf.single;
        for (const auto& t : s.terms)
            row("single", -1, "pooled", s.t_begin, s.t_end, s.state_value, t);
    }
}

/// Rebuilds the field from per-segment estimated coefficients on the
/// config's grid. `estimates` supplies one report per path interval (the
/// same report repeated for the pooled model).
Snapshot rebuild_field(const ExperimentConfig& cfg, const switching::MarkovPath& path,
                       const std::vector<const dsbl::SegmentReport*>& estimates) {
    const auto steps = segment_steps(cfg, path);
    if (cfg.two_d()) {
        std::vector<solver::SegmentPlan2D> plan(path.intervals());
        for (std::size_t k = 0; k < path.intervals(); ++k) {
            const double m_true = path.values[k];
            plan[k].speed2 = estimate_of(*estimates[k], "lap(u)");
            plan[k].forcing = [m_true](double x, double y, double t) {
                return forcing_2d(x, y, t, m_true);
            };
            plan[k].t0 = path.interval_begin(k);
            plan[k].t1 = path.interval_end(k);
            plan[k].steps = steps[k];
        }
        const auto prob = problem_2d();
        return solver::march_wave_2d(cfg.grid.x_intervals, cfg.grid.y_intervals,
                                     prob.initial_profile, prob.initial_velocity, plan);
    }
    const auto prob = problem_1d(cfg);
    std::vector<solver::SegmentPlan1D> plan(path.intervals());
    for (std::size_t k = 0; k < path.intervals(); ++k) {
        const auto& rep = *estimates[k];
        plan[k].speed2 = estimate_of(rep, "u_xx");
        if (cfg.problem.family == Family::SineGordon)
            plan[k].f = solver::SineTerm{estimate_of(rep, "sin(u)"), cfg.problem.omega};
        else
            plan[k].f = solver::CubicTerm{estimate_of(rep, "u"), estimate_of(rep, "u^3")};
        plan[k].t0 = path.interval_begin(k);
        plan[k].t1 = path.interval_end(k);
        plan[k].steps = steps[k];
    }
    return solver::march_wave_1d(cfg.problem.length, cfg.grid.space_intervals,
                                 prob.initial_profile, prob.initial_velocity, plan);
}

/// Time indices to emit for a 2-D heat map: nearest node to each requested
/// slice time (default 0, T/4, T/2, 3T/4, T), deduplicated.
std::vector<std::size_t> slice_indices(const ExperimentConfig& cfg, const Snapshot& snap) {
    std::vector<double> wanted = cfg.output.heatmap_times;
    if (wanted.empty()) {
        const double T = snap.t.back();
        wanted = {0.0, T / 4, T / 2, 3 * T / 4, T};
    }
    std::set<std::size_t> idx;
    for (double tt : wanted) {
        std::size_t best = 0;
        for (std::size_t j = 1; j < snap.nt(); ++j)
            if (std::abs(snap.t[j] - tt) < std::abs(snap.t[best] - tt)) best = j;
        idx.insert(best);
    }
    return {idx.begin(), idx.end()};
}

void write_heatmap_csv(const Snapshot& data, const Snapshot& model,
                       const std::vector<std::size_t>& time_indices, std::ostream& out) {
    const bool two_d = data.two_d();
    out << (two_d ? "x,y,t,u_data,u_model,abs_err" : "x,t,u_data,u_model,abs_err") << '\n';
    for (std::size_t j : time_indices) {
        for (std::size_t iy = 0; iy < data.ny(); ++iy) {
            for (std::size_t ix = 0; ix < data.nx(); ++ix) {
                const auto row = static_cast<Eigen::Index>(data.space_index(ix, iy));
                const auto col = static_cast<Eigen::Index>(j);
                const double ud = data.u(row, col);
                const double um = model.u(row, col);
                fmt(out, data.x[ix], "%.8g");
                if (two_d) {
                    out << ',';
                    fmt(out, data.y[iy], "%.8g");
                }
                out << ',';
                fmt(out, data.t[j], "%.8g");
                out << ',';
                fmt(out, ud, "%.8g");
                out << ',';
                fmt(out, um, "%.8g");
                out << ',';
                fmt(out, std::abs(ud - um), "%.8g");
                out << '\n';
            }
        }
    }
}

/// Heat map for one model (mixture or pooled). Throws on rebuild problems;
/// the caller downgrades that to a note.
void emit_heatmap(const ExperimentConfig& cfg, const switching::MarkovPath& path,
                  const std::vector<const dsbl::SegmentReport*>& estimates,
                  const Snapshot& reference, const std::filesystem::path& file) {
    const Snapshot model = rebuild_field(cfg, path, estimates);
    if (model.u.rows() != reference.u.rows() || model.u.cols() != reference.u.cols())
        throw NumericalError(
            "rebuilt field shape does not match the data (config grid vs data grid)");
    std::vector<std::size_t> times;
    if (reference.two_d()) {
        times = slice_indices(cfg, reference);
    } else {
        times.resize(reference.nt());
        for (std::size_t j = 0; j < times.size(); ++j) times[j] = j;
    }
    auto f = open_out(file);
    write_heatmap_csv(reference, model, times, f);
}

}  // namespace

std::vector<std::string> write_infer_files(const ExperimentConfig& cfg, const InferResult& inf,
                                           const switching::MarkovPath& path,
                                           const Snapshot& reference,
                                           const std::filesystem::path& out_dir,
                                           std::vector<std::string>* notes) {
    std::filesystem::create_directories(out_dir);
    std::vector<std::string> written;
    auto note = [notes](const std::string& s) {
        if (notes) notes->push_back(s);
    };

    {
        auto f = open_out(out_dir / "report.json");
        write_report_json(cfg, inf, f);
        written.push_back("report.json");
    }
    {
        auto f = open_out(out_dir / "report.csv");
        write_report_csv(inf, f);
        written.push_back("report.csv");
    }

    if (cfg.output.heatmap) {
        bool any_failed = false;
        for (const auto& s : inf.mixture) any_failed = any_failed || s.failed;
        if (any_failed) {
            note("heat map skipped: at least one segment fit failed");
        } else if (inf.mixture.size() != path.intervals()) {
            note("heat map skipped: segment count does not match the path");
        } else {
            std::vector<const dsbl::SegmentReport*> est;
            for (const auto& s : inf.mixture) est.push_back(&s);
            try {
                emit_heatmap(cfg, path, est, reference, out_dir / "heatmap_mixture.csv");
                written.push_back("heatmap_mixture.csv");
            } catch (const Error& e) {
                note(std::string("mixture heat map skipped: ") + e.what());
            }
        }
        if (inf.single && !inf.single->failed && inf.mixture.size() == path.intervals()) {
            std::vector<const dsbl::SegmentReport*> est(path.intervals(), &*inf.single);
            try {
                emit_heatmap(cfg, path, est, reference, out_dir / "heatmap_single.csv");
                written.push_back("heatmap_single.csv");
            } catch (const Error& e) {
                note(std::string("single-model heat map skipped: ") + e.what());
            }
        }
    }
    return written;
}

std::string interval_group(double t0, double t1) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.2f-%.2f", t0, t1);
    return buf;
}

std::string state_group(double state_value) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "M=%g", state_value);
    return buf;
}

std::vector<ComparisonRow> compare_to_reference(const ExperimentConfig& cfg,
                                                const InferResult& inf) {
    if (!cfg.truth)
        throw ConfigError("reference comparison requires truth coefficients in the config");

    std::map<std::pair<std::string, std::string>, const dsbl::TermReport*> mixture_lookup;
    for (const auto& s : inf.mixture) {
        if (s.failed) continue;
        const std::string g = interval_group(s.t_begin, s.t_end);
        for (const auto& t : s.terms) mixture_lookup[{g, t.label}] = &t;
    }
    if (inf.mixture_summary)
        for (const auto& st : inf.mixture_summary->states) {
            const std::string g = state_group(st.state_value);
            for (const auto& t : st.terms) mixture_lookup[{g, t.label}] = &t;
        }
    std::map<std::pair<std::string, std::string>, const dsbl::TermReport*> single_lookup;
    for (const auto& st : inf.single_states) {
        const std::string g = state_group(st.state_value);
        for (const auto& t : st.terms) single_lookup[{g, t.label}] = &t;
    }

    std::vector<ComparisonRow> rows;
    auto build = [&](const config::ReferenceRow& ref, bool single, const auto& lookup) {
        const auto it = lookup.find({ref.group, ref.term});
        if (it == lookup.end())
            throw TruthAlignmentError("reference row (" + ref.group + ", " + ref.term +
                                      ") has no matching estimate");
        const dsbl::TermReport& t = *it->second;
        ComparisonRow row;
        row.single_model = single;
        row.group = ref.group;
        row.term = ref.term;
        row.truth = t.truth.value_or(0.0);
        row.reference = ref.value;
        row.ref_error_pct = ref.error_pct;
        row.estimate = t.estimate;
        row.error_pct = t.percent_error.value_or(std::numeric_limits<double>::quiet_NaN());
        rows.push_back(std::move(row));
    };
    for (const auto& ref : cfg.reference) build(ref, false, mixture_lookup);
    if (!cfg.reference_single.empty()) {
        if (single_lookup.empty())
            throw TruthAlignmentError(
                "the config bundles single-model reference rows but the pooled fit was not run");
        for (const auto& ref : cfg.reference_single) build(ref, true, single_lookup);
    }
    return rows;
}

void write_comparison_csv(std::span<const ComparisonRow> rows, std::ostream& out) {
    out << "model,group,term,truth,reference,ref_error_pct,estimate,error_pct\n";
    for (const auto& r : rows) {
        out << (r.single_model ? "single" : "mixture") << ',' << r.group << ',' << r.term << ',';
        fmt(out, r.truth, "%.6g");
        out << ',';
        fmt(out, r.reference, "%.6g");
        out << ',';
        fmt(out, r.ref_error_pct, "%.4g");
        out << ',';
        fmt(out, r.estimate, "%.6g");
        out << ',';
        fmt(out, r.error_pct, "%.4g");
        out << '\n';
    }
}

}  // namespace mswave::pipeline
