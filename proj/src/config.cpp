#include "mswave/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "mswave/dictionary.hpp"

namespace mswave::config {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& origin, const std::string& msg) {
    throw ConfigError(origin + ": " + msg);
}

/// Strict-object view: unknown keys are rejected, lookups are typed and
/// produce messages naming the full key path.
class Obj {
public:
    Obj(const json& j, std::string where, const std::string& origin)
        : j_(j), where_(std::move(where)), origin_(origin) {
        if (!j_.is_object()) fail(origin_, where_ + " must be an object");
    }

    void allow(std::initializer_list<const char*> keys) const {
        std::set<std::string> ok(keys.begin(), keys.end());
        for (const auto& item : j_.items())
            if (!ok.count(item.key()))
                fail(origin_, "unknown key '" + item.key() + "' in " + where_);
    }

    bool has(const char* k) const { return j_.contains(k); }

    const json& req(const char* k) const {
        if (!j_.contains(k)) fail(origin_, where_ + " requires key '" + k + "'");
        return j_.at(k);
    }

    std::string path(const char* k) const { return where_ + "." + k; }

    double num(const char* k) const { return as_num(req(k), path(k)); }
    double num(const char* k, double dflt) const {
        return has(k) ? as_num(j_.at(k), path(k)) : dflt;
    }
    int integer(const char* k, int dflt) const {
        if (!has(k)) return dflt;
        const json& v = j_.at(k);
        if (!v.is_number_integer()) fail(origin_, path(k) + " must be an integer");
        return v.get<int>();
    }
    std::uint64_t uns(const char* k, std::uint64_t dflt) const {
        if (!has(k)) return dflt;
        const json& v = j_.at(k);
        if (!v.is_number_unsigned()) fail(origin_, path(k) + " must be a non-negative integer");
        return v.get<std::uint64_t>();
    }
    bool boolean(const char* k, bool dflt) const {
        if (!has(k)) return dflt;
        const json& v = j_.at(k);
        if (!v.is_boolean()) fail(origin_, path(k) + " must be true or false");
        return v.get<bool>();
    }
    std::string str(const char* k) const {
        const json& v = req(k);
        if (!v.is_string()) fail(origin_, path(k) + " must be a string");
        return v.get<std::string>();
    }
    std::string str(const char* k, const std::string& dflt) const {
        return has(k) ? str(k) : dflt;
    }
    std::vector<double> num_array(const char* k) const {
        const json& v = req(k);
        if (!v.is_array()) fail(origin_, path(k) + " must be an array of numbers");
        std::vector<double> out;
        out.reserve(v.size());
        for (const auto& e : v) out.push_back(as_num(e, path(k)));
        return out;
    }

    const json& raw() const { return j_; }
    const std::string& where() const { return where_; }
    const std::string& origin() const { return origin_; }

private:
    double as_num(const json& v, const std::string& p) const {
        if (!v.is_number()) fail(origin_, p + " must be a number");
        return v.get<double>();
    }

    const json& j_;
    std::string where_;
    const std::string& origin_;
};

Family parse_family(const std::string& s, const std::string& origin) {
    if (s == "sine_gordon") return Family::SineGordon;
    if (s == "klein_gordon") return Family::KleinGordon;
    if (s == "wave2d") return Family::Wave2d;
    fail(origin, "family must be one of sine_gordon, klein_gordon, wave2d (got '" + s + "')");
}

ProblemConfig parse_problem(const json& j, Family family, const std::string& origin) {
    ProblemConfig p;
    p.family = family;
    if (j.is_null()) return p;
    Obj o(j, "problem", origin);
    switch (family) {
        case Family::SineGordon:
            o.allow({"length", "amplitude", "sine_coeff", "omega"});
            p.length = o.num("length", p.length);
            p.amplitude = o.num("amplitude", p.amplitude);
            p.sine_coeff = o.num("sine_coeff", p.sine_coeff);
            p.omega = o.num("omega", p.omega);
            break;
        case Family::KleinGordon:
            o.allow({"length", "amplitude", "linear_coeff", "cubic_coeff"});
            p.length = o.num("length", p.length);
            p.amplitude = o.num("amplitude", p.amplitude);
            p.linear_coeff = o.num("linear_coeff", p.linear_coeff);
            p.cubic_coeff = o.num("cubic_coeff", p.cubic_coeff);
            break;
        case Family::Wave2d:
            o.allow({});  // the 2-D problem is fully built in
            break;
    }
    if (p.length <= 0) fail(origin, "problem.length must be positive");
    return p;
}

GridConfig parse_grid(const json& j, Family family, const std::string& origin) {
    Obj o(j, "grid", origin);
    GridConfig g;
    if (family == Family::Wave2d) {
        o.allow({"x_intervals", "y_intervals", "steps_per_segment", "dt"});
        g.x_intervals = o.integer("x_intervals", 0);
        g.y_intervals = o.integer("y_intervals", 0);
        if (g.x_intervals < 2 || g.y_intervals < 2)
            fail(origin, "grid.x_intervals and grid.y_intervals must be at least 2");
    } else {
        o.allow({"space_intervals", "steps_per_segment", "dt"});
        g.space_intervals = o.integer("space_intervals", 0);
        if (g.space_intervals < 2) fail(origin, "grid.space_intervals must be at least 2");
    }
    g.steps_per_segment = o.integer("steps_per_segment", 0);
    g.dt = o.num("dt", 0.0);
    const bool by_steps = g.steps_per_segment != 0;
    const bool by_dt = g.dt != 0.0;
    if (by_steps == by_dt)
        fail(origin, "grid must set exactly one of steps_per_segment and dt");
    if (by_steps && g.steps_per_segment < 2)
        fail(origin, "grid.steps_per_segment must be at least 2");
    if (by_dt && g.dt <= 0) fail(origin, "grid.dt must be positive");
    return g;
}

MarkovConfig parse_markov(const json& j, const std::string& origin) {
    Obj o(j, "markov", origin);
    o.allow({"fixed_path", "generator", "state_values", "horizon", "seed", "initial_state"});
    MarkovConfig m;
    if (o.has("fixed_path")) {
        Obj fp(o.req("fixed_path"), "markov.fixed_path", origin);
        fp.allow({"jump_times", "values", "horizon"});
        m.fixed_path = switching::fixed_path(fp.num_array("jump_times"), fp.num_array("values"),
                                             fp.num("horizon"));
    }
    if (o.has("generator")) {
        const json& rows = o.req("generator");
        if (!rows.is_array() || rows.empty())
            fail(origin, "markov.generator must be an array of rows");
        const auto k = rows.size();
        Eigen::MatrixXd q(k, k);
        for (std::size_t r = 0; r < k; ++r) {
            const json& row = rows[r];
            if (!row.is_array() || row.size() != k)
                fail(origin, "markov.generator must be square (row " + std::to_string(r) + ")");
            for (std::size_t c = 0; c < k; ++c) {
                if (!row[c].is_number()) fail(origin, "markov.generator entries must be numbers");
                q(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    row[c].get<double>();
            }
        }
        m.generator = switching::GeneratorMatrix::validated(std::move(q));
        m.state_values = o.num_array("state_values");
        if (m.state_values.size() != k)
            fail(origin, "markov.state_values must list one value per generator state");
    } else {
        for (const char* k : {"state_values", "initial_state"})
            if (o.has(k))
                fail(origin, std::string("markov.") + k + " requires markov.generator");
    }
    if (!m.fixed_path && !m.generator)
        fail(origin, "markov requires fixed_path or generator");
    m.horizon = o.num("horizon", m.fixed_path ? m.fixed_path->horizon : 0.0);
    if (m.horizon <= 0) fail(origin, "markov.horizon must be positive");
    if (m.fixed_path && m.fixed_path->horizon != m.horizon)
        fail(origin, "markov.horizon disagrees with markov.fixed_path.horizon");
    m.seed = o.uns("seed", 0);
    if (o.has("initial_state")) {
        const int s = o.integer("initial_state", 0);
        if (s < 0 || s >= static_cast<int>(m.state_values.size()))
            fail(origin, "markov.initial_state out of range");
        m.initial_state = s;
    }
    return m;
}

sbl::SblConfig parse_sbl(const json& j, const std::string& origin) {
    sbl::SblConfig c;
    if (j.is_null()) return c;
    Obj o(j, "sbl", origin);
    o.allow({"sigma2", "tol", "max_iter", "gamma_floor", "inner_tol", "inner_max_sweeps"});
    if (o.has("sigma2")) {
        const double s2 = o.num("sigma2");
        if (s2 <= 0) fail(origin, "sbl.sigma2 must be positive");
        c.sigma2 = s2;
    }
    c.tol = o.num("tol", c.tol);
    c.max_iter = o.integer("max_iter", c.max_iter);
    c.gamma_floor = o.num("gamma_floor", c.gamma_floor);
    c.inner_tol = o.num("inner_tol", c.inner_tol);
    c.inner_max_sweeps = o.integer("inner_max_sweeps", c.inner_max_sweeps);
    if (c.tol <= 0 || c.inner_tol <= 0) fail(origin, "sbl tolerances must be positive");
    if (c.max_iter < 1 || c.inner_max_sweeps < 1)
        fail(origin, "sbl iteration budgets must be at least 1");
    if (c.gamma_floor < 0) fail(origin, "sbl.gamma_floor must be non-negative");
    return c;
}

dsbl::TruthSpec parse_truth(const json& j, const std::vector<std::string>& library,
                            const std::string& origin) {
    if (!j.is_object()) fail(origin, "truth must be an object mapping term -> value");
    std::set<std::string> lib_labels;
    for (const auto& s : library) lib_labels.insert(dict::parse_term(s).label);
    dsbl::TruthSpec spec;
    for (const auto& item : j.items()) {
        const std::string label = dict::parse_term(item.key()).label;
        if (!lib_labels.count(label))
            fail(origin, "truth term '" + item.key() + "' is not in the library");
        dsbl::TruthSpec::Entry e;
        e.label = label;
        if (item.value().is_string()) {
            if (item.value().get<std::string>() != "markov")
                fail(origin, "truth values are numbers or the string \"markov\"");
        } else if (item.value().is_number()) {
            e.constant = item.value().get<double>();
        } else {
            fail(origin, "truth values are numbers or the string \"markov\"");
        }
        spec.entries.push_back(std::move(e));
    }
    if (spec.entries.empty()) fail(origin, "truth must name at least one term");
    return spec;
}

OutputConfig parse_output(const json& j, const std::string& origin) {
    OutputConfig out;
    if (j.is_null()) return out;
    Obj o(j, "output", origin);
    o.allow({"dir", "write_csv", "heatmap", "heatmap_times"});
    out.dir = o.str("dir", out.dir);
    if (out.dir.empty()) fail(origin, "output.dir must not be empty");
    out.write_csv = o.boolean("write_csv", out.write_csv);
    out.heatmap = o.boolean("heatmap", out.heatmap);
    if (o.has("heatmap_times")) {
        out.heatmap_times = o.num_array("heatmap_times");
        for (double t : out.heatmap_times)
            if (t < 0) fail(origin, "output.heatmap_times must be non-negative");
    }
    return out;
}

std::vector<ReferenceRow> parse_reference(const json& j, const char* key,
                                          const std::string& origin) {
    if (!j.is_array()) fail(origin, std::string(key) + " must be an array of rows");
    std::vector<ReferenceRow> rows;
    rows.reserve(j.size());
    for (const auto& e : j) {
        Obj o(e, std::string(key) + " row", origin);
        o.allow({"group", "term", "value", "error_pct"});
        ReferenceRow r;
        r.group = o.str("group");
        r.term = dict::parse_term(o.str("term")).label;
        r.value = o.num("value");
        r.error_pct = o.num("error_pct");
        rows.push_back(std::move(r));
    }
    return rows;
}

}  // namespace

std::string family_name(Family f) {
    switch (f) {
        case Family::SineGordon: return "sine_gordon";
        case Family::KleinGordon: return "klein_gordon";
        case Family::Wave2d: return "wave2d";
    }
    return "?";
}

ExperimentConfig parse_config(const std::string& json_text, const std::string& origin) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::parse_error& e) {
        fail(origin, std::string("not valid JSON: ") + e.what());
    }
    Obj root(j, "config", origin);
    root.allow({"name", "family", "notes", "problem", "grid", "markov", "noise", "derivatives",
                "library", "known_forcing", "sbl", "truth", "output", "acceptance", "reference",
                "reference_single", "run_single_model"});

    ExperimentConfig cfg;
    cfg.name = root.str("name");
    if (cfg.name.empty()) fail(origin, "name must not be empty");
    cfg.problem.family = parse_family(root.str("family"), origin);
    cfg.problem = parse_problem(root.has("problem") ? root.req("problem") : json(),
                                cfg.problem.family, origin);
    cfg.grid = parse_grid(root.req("grid"), cfg.problem.family, origin);
    cfg.markov = parse_markov(root.req("markov"), origin);

    if (root.has("noise")) {
        Obj o(root.req("noise"), "noise", origin);
        o.allow({"eta", "seed"});
        cfg.noise.eta = o.num("eta", 0.0);
        cfg.noise.seed = o.uns("seed", 0);
        if (cfg.noise.eta < 0) fail(origin, "noise.eta must be non-negative");
    }
    if (root.has("derivatives")) {
        Obj o(root.req("derivatives"), "derivatives", origin);
        o.allow({"smooth_window"});
        cfg.smooth_window = o.integer("smooth_window", 0);
        if (cfg.smooth_window != 0 && (cfg.smooth_window < 3 || cfg.smooth_window % 2 == 0))
            fail(origin, "derivatives.smooth_window must be 0 or an odd number >= 3");
    }

    {
        const json& lib = root.req("library");
        if (!lib.is_array() || lib.empty())
            fail(origin, "library must be a non-empty array of term strings");
        for (const auto& e : lib) {
            if (!e.is_string()) fail(origin, "library entries must be strings");
            cfg.library.push_back(e.get<std::string>());
        }
        dict::TermLibrary::from_strings(cfg.library);  // validates labels and duplicates
    }

    cfg.known_forcing = root.boolean("known_forcing", false);
    if (cfg.known_forcing && cfg.problem.family != Family::Wave2d)
        fail(origin, "known_forcing is only available for family wave2d");

    cfg.sbl = parse_sbl(root.has("sbl") ? root.req("sbl") : json(), origin);
    if (root.has("truth")) cfg.truth = parse_truth(root.req("truth"), cfg.library, origin);
    cfg.output = parse_output(root.has("output") ? root.req("output") : json(), origin);

    if (root.has("acceptance")) {
        Obj o(root.req("acceptance"), "acceptance", origin);
        o.allow({"max_percent_error", "distractor_tolerance"});
        AcceptancePolicy p;
        p.max_percent_error = o.num("max_percent_error");
        p.distractor_tolerance = o.num("distractor_tolerance");
        if (p.max_percent_error <= 0) fail(origin, "acceptance.max_percent_error must be positive");
        if (p.distractor_tolerance < 0)
            fail(origin, "acceptance.distractor_tolerance must be non-negative");
        cfg.acceptance = p;
    }
    if (root.has("reference"))
        cfg.reference = parse_reference(root.req("reference"), "reference", origin);
    if (root.has("reference_single"))
        cfg.reference_single =
            parse_reference(root.req("reference_single"), "reference_single", origin);
    cfg.run_single_model = root.boolean("run_single_model", false);

    // Cross-checks that need more than one section.
    if (cfg.problem.family == Family::Wave2d && cfg.grid.space_intervals != 0)
        fail(origin, "grid.space_intervals does not apply to family wave2d");
    for (double t : cfg.output.heatmap_times)
        if (t > cfg.markov.horizon)
            fail(origin, "output.heatmap_times must lie within the horizon");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config '" + path.string() + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_config(ss.str(), path.string());
}

std::vector<std::string> preset_names() {
    std::vector<std::string> names;
    for (const auto& [name, text] : preset_texts()) names.push_back(name);
    return names;
}

ExperimentConfig preset(const std::string& name) {
    for (const auto& [preset_name, text] : preset_texts())
        if (preset_name == name) return parse_config(text, "preset " + name);
    std::string available;
    for (const auto& n : preset_names()) available += (available.empty() ? "" : ", ") + n;
    throw ConfigError("unknown preset '" + name + "' (available: " + available + ")");
}

}  // namespace mswave::config
