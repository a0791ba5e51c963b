// mswave: simulate nonlinear waves with Markov-switching coefficients and
// recover the switching coefficients from noisy snapshots.
//
// Exit codes: 0 success; 2 usage or config error; 3 data-file parse error;
// 4 stability (CFL) violation; 5 solution divergence; 6 inference failure;
// 7 file I/O failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mswave/config.hpp"
#include "mswave/io.hpp"
#include "mswave/pipeline.hpp"

namespace {

using namespace mswave;

int exit_code_for(const Error& e) {
    if (dynamic_cast<const ParseError*>(&e)) return 3;
    if (dynamic_cast<const StabilityError*>(&e)) return 4;
    if (dynamic_cast<const DivergenceError*>(&e)) return 5;
    if (dynamic_cast<const IoError*>(&e)) return 7;
    if (dynamic_cast<const ConfigError*>(&e) || dynamic_cast<const TermParseError*>(&e) ||
        dynamic_cast<const InvalidPathError*>(&e) || dynamic_cast<const ReducibleChainError*>(&e) ||
        dynamic_cast<const AbsorbingStateError*>(&e) ||
        dynamic_cast<const OutOfHorizonError*>(&e))
        return 2;
    return 6;  // inference/numerical family
}

struct CommonOpts {
    std::string config_path;
    std::string case_name;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<double> eta;
    int threads = 0;
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_overrides = true) {
    cmd->add_option("--config", o.config_path, "experiment config JSON file");
    cmd->add_option("--case", o.case_name,
                    "built-in preset: sg, kg, kg_fast, wave2d, wave2d_fast");
    cmd->add_option("--out", o.out_dir,
                    "output directory (overrides the config and MSWAVE_OUT_DIR)");
    if (with_overrides) {
        cmd->add_option("--seed", o.seed,
                        "override the noise seed (and the path seed when sampling)");
        cmd->add_option("--noise", o.eta, "override the noise level eta");
    }
}

config::ExperimentConfig resolve_config(const CommonOpts& o) {
    if (!o.config_path.empty() && !o.case_name.empty())
        throw ConfigError("use --config or --case, not both");
    config::ExperimentConfig cfg;
    if (!o.config_path.empty())
        cfg = config::load_config(o.config_path);
    else if (!o.case_name.empty())
        cfg = config::preset(o.case_name);
    else
        throw ConfigError("one of --config or --case is required");
    if (o.seed) {
        cfg.noise.seed = *o.seed;
        cfg.markov.seed = *o.seed;
    }
    if (o.eta) {
        if (*o.eta < 0) throw ConfigError("--noise must be non-negative");
        cfg.noise.eta = *o.eta;
    }
    if (const char* env = std::getenv("MSWAVE_OUT_DIR"); env && *env) cfg.output.dir = env;
    if (!o.out_dir.empty()) cfg.output.dir = o.out_dir;
    return cfg;
}

double max_cfl(const config::ExperimentConfig& cfg, const switching::MarkovPath& path,
               const std::vector<int>& steps) {
    double inv2 = 0.0;
    if (cfg.two_d()) {
        const double pi = 3.14159265358979323846;
        const double dx = pi / cfg.grid.x_intervals;
        const double dy = pi / cfg.grid.y_intervals;
        inv2 = 1.0 / (dx * dx) + 1.0 / (dy * dy);
    } else {
        const double dx = cfg.problem.length / cfg.grid.space_intervals;
        inv2 = 1.0 / (dx * dx);
    }
    double worst = 0.0;
    for (std::size_t k = 0; k < path.intervals(); ++k) {
        const double dt = (path.interval_end(k) - path.interval_begin(k)) / steps[k];
        worst = std::max(worst, std::sqrt(path.values[k]) * dt * std::sqrt(inv2));
    }
    return worst;
}

std::string join_args(int argc, char** argv) {
    std::string s;
    for (int i = 0; i < argc; ++i) {
        if (i) s += ' ';
        s += argv[i];
    }
    return s;
}

/// Timestamps live here and only here; report files stay byte-deterministic.
void write_run_log(const std::filesystem::path& dir, const std::string& command,
                   double elapsed_s, const std::vector<std::string>& notes) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    std::ofstream log(dir / "run.log", std::ios::app);
    if (!log) return;  // the log is best-effort
    const std::time_t now = std::time(nullptr);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    log << stamp << " | " << command << " | " << std::fixed << elapsed_s << "s\n";
    for (const auto& n : notes) log << "  note: " << n << '\n';
}

int cmd_simulate(const CommonOpts& o, bool sample_path, const std::string& command) {
    const auto start = std::chrono::steady_clock::now();
    auto cfg = resolve_config(o);
    auto sim = pipeline::run_simulate(cfg, sample_path);
    const auto files = pipeline::write_simulation_files(cfg, sim, cfg.output.dir);

    const auto steps = pipeline::segment_steps(cfg, sim.path);
    std::printf("config %s (%s)\n", cfg.name.c_str(),
                config::family_name(cfg.problem.family).c_str());
    if (cfg.two_d())
        std::printf("grid: %zu x %zu x %zu nodes (%d x %d space intervals)\n", sim.clean.nx(),
                    sim.clean.ny(), sim.clean.nt(), cfg.grid.x_intervals, cfg.grid.y_intervals);
    else
        std::printf("grid: %zu x %zu nodes (%d x %zu intervals), dx=%g\n", sim.clean.nx(),
                    sim.clean.nt(), cfg.grid.space_intervals, sim.clean.nt() - 1,
                    cfg.problem.length / cfg.grid.space_intervals);
    std::printf("segments: %zu, max CFL: %.3f\n", sim.path.intervals(),
                max_cfl(cfg, sim.path, steps));
    std::printf("noise: eta=%g seed=%llu\n", cfg.noise.eta,
                static_cast<unsigned long long>(cfg.noise.seed));
    for (const auto& f : files) std::printf("wrote %s/%s\n", cfg.output.dir.c_str(), f.c_str());

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_log(cfg.output.dir, command, elapsed, {});
    return 0;
}

void print_infer_summary(const pipeline::InferResult& inf) {
    std::printf("%-8s %-12s %-10s %14s %14s %10s\n", "segment", "interval", "term", "estimate",
                "truth", "err%");
    for (const auto& s : inf.mixture) {
        const std::string group = pipeline::interval_group(s.t_begin, s.t_end);
        if (s.failed) {
            std::printf("%-8d %-12s FAILED: %s\n", s.index, group.c_str(), s.error.c_str());
            continue;
        }
        for (const auto& t : s.terms) {
            if (t.zero_truth && t.estimate == 0.0) continue;  // pruned distractors stay quiet
            std::printf("%-8d %-12s %-10s %14.6g", s.index, group.c_str(), t.label.c_str(),
                        t.estimate);
            if (t.truth)
                std::printf(" %14.6g", *t.truth);
            else
                std::printf(" %14s", "");
            if (t.percent_error)
                std::printf(" %9.3f%%", *t.percent_error);
            std::printf("\n");
        }
    }
    if (inf.single && !inf.single->failed) {
        for (const auto& t : inf.single->terms) {
            if (t.zero_truth && t.estimate == 0.0) continue;
            std::printf("%-8s %-12s %-10s %14.6g\n", "single", "pooled", t.label.c_str(),
                        t.estimate);
        }
    } else if (inf.single) {
        std::printf("single   pooled       FAILED: %s\n", inf.single->error.c_str());
    }
    if (inf.mixture_summary) {
        const auto& su = *inf.mixture_summary;
        std::printf("mixture: max err %.3f%%, mean err %.3f%%, worst zero-truth leak %g\n",
                    su.max_percent_error, su.mean_percent_error, su.max_zero_truth_magnitude);
    }
}

int cmd_infer(const CommonOpts& o, bool single_model, const std::string& command) {
    const auto start = std::chrono::steady_clock::now();
    auto cfg = resolve_config(o);
    const std::filesystem::path dir = cfg.output.dir;

    const auto path = io::load_path_csv(dir / "path.csv");
    const Snapshot observed = io::load_snapshot_bin(dir / "noisy.bin");
    auto inf = pipeline::run_infer(cfg, observed, path, single_model, o.threads);

    Snapshot clean;
    const Snapshot* reference = &observed;
    if (std::filesystem::exists(dir / "clean.bin")) {
        clean = io::load_snapshot_bin(dir / "clean.bin");
        reference = &clean;
    }
    std::vector<std::string> notes;
    const auto files = pipeline::write_infer_files(cfg, inf, path, *reference, dir, &notes);

    print_infer_summary(inf);
    for (const auto& n : notes) std::printf("note: %s\n", n.c_str());
    for (const auto& f : files) std::printf("wrote %s/%s\n", dir.string().c_str(), f.c_str());

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_log(dir, command, elapsed, notes);

    std::size_t failed = 0;
    for (const auto& s : inf.mixture) failed += s.failed ? 1 : 0;
    if (!inf.mixture.empty() && failed == inf.mixture.size()) {
        std::fprintf(stderr, "error: all %zu segment fits failed\n", failed);
        return 6;
    }
    return 0;
}

int cmd_reproduce(const std::string& case_name, bool full, std::string out_override,
                  const std::string& command) {
    const auto start = std::chrono::steady_clock::now();
    std::string preset_name;
    if (case_name == "case1")
        preset_name = "sg";
    else if (case_name == "case2")
        preset_name = full ? "kg" : "kg_fast";
    else if (case_name == "case3")
        preset_name = full ? "wave2d" : "wave2d_fast";
    else
        throw ConfigError("unknown case '" + case_name + "' (expected case1, case2, or case3)");

    auto cfg = config::preset(preset_name);
    if (const char* env = std::getenv("MSWAVE_OUT_DIR"); env && *env) cfg.output.dir = env;
    if (!out_override.empty()) cfg.output.dir = out_override;
    const std::filesystem::path dir = cfg.output.dir;

    std::printf("reproducing %s with preset %s\n", case_name.c_str(), preset_name.c_str());
    auto sim = pipeline::run_simulate(cfg);
    auto files = pipeline::write_simulation_files(cfg, sim, dir);
    auto inf = pipeline::run_infer(cfg, sim.noisy.data, sim.path, false);

    std::vector<std::string> notes;
    const auto more = pipeline::write_infer_files(cfg, inf, sim.path, sim.clean, dir, &notes);
    files.insert(files.end(), more.begin(), more.end());

    const auto rows = pipeline::compare_to_reference(cfg, inf);
    {
        std::ofstream f(dir / "comparison.csv");
        if (!f) throw IoError("cannot open '" + (dir / "comparison.csv").string() + "' for writing");
        pipeline::write_comparison_csv(rows, f);
        files.push_back("comparison.csv");
    }

    std::printf("%-8s %-10s %-8s %10s %11s %11s %9s\n", "model", "group", "term", "truth",
                "reference", "estimate", "err%");
    for (const auto& r : rows)
        std::printf("%-8s %-10s %-8s %10.4g %11.4f %11.4f %8.3f%%\n",
                    r.single_model ? "single" : "mixture", r.group.c_str(), r.term.c_str(),
                    r.truth, r.reference, r.estimate, r.error_pct);
    if (inf.mixture_summary && cfg.acceptance) {
        const auto& su = *inf.mixture_summary;
        const auto& pol = *cfg.acceptance;
        const bool ok = su.max_percent_error <= pol.max_percent_error &&
                        su.max_zero_truth_magnitude <= pol.distractor_tolerance &&
                        su.failed_segments == 0;
        std::printf("policy: max err %.3f%% (limit %g%%), zero-truth leak %g (limit %g) -> %s\n",
                    su.max_percent_error, pol.max_percent_error, su.max_zero_truth_magnitude,
                    pol.distractor_tolerance, ok ? "OK" : "EXCEEDED");
    }
    for (const auto& n : notes) std::printf("note: %s\n", n.c_str());
    for (const auto& f : files) std::printf("wrote %s/%s\n", dir.string().c_str(), f.c_str());

    const double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    write_run_log(dir, command, elapsed, notes);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{
        "mswave: nonlinear wave equations with Markov-switching coefficients -- "
        "simulation and sparse Bayesian coefficient recovery"};
    app.require_subcommand(1);

    CommonOpts sim_opts, infer_opts;
    bool sample_path = false, single_model = false, full = false;
    std::string repro_case, repro_out;

    auto* sim = app.add_subcommand("simulate",
                                   "solve the configured problem; write clean and noisy "
                                   "snapshots plus the coefficient path");
    add_common(sim, sim_opts);
    sim->add_flag("--sample-path", sample_path,
                  "sample the coefficient path from the generator instead of replaying the "
                  "fixed path");

    auto* inf = app.add_subcommand("infer",
                                   "recover coefficients from the snapshots a previous "
                                   "simulate wrote to the output directory");
    add_common(inf, infer_opts);
    inf->add_flag("--single-model", single_model,
                  "also fit one pooled model over the whole horizon");
    inf->add_option("--threads", infer_opts.threads, "worker threads for per-segment fits")
        ->check(CLI::NonNegativeNumber);

    auto* rep = app.add_subcommand(
        "reproduce", "run a bundled case end to end and compare against its reference table");
    rep->add_option("case", repro_case, "case1, case2, or case3")->required();
    rep->add_flag("--full", full, "use the full-resolution preset variant");
    rep->add_option("--out", repro_out, "output directory override");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    const std::string command = join_args(argc, argv);
    try {
        if (sim->parsed()) return cmd_simulate(sim_opts, sample_path, command);
        if (inf->parsed()) return cmd_infer(infer_opts, single_model, command);
        return cmd_reproduce(repro_case, full, repro_out, command);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
}
