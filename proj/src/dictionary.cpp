#include "mswave/dictionary.hpp"

#include <algorithm>
#include <cmath>

namespace mswave::dict {

namespace {

struct FactorSpec {
    const char* token;
    Factor factor;
};

// Longest-match table; "u_xx" must be tried before "u_x", "u^2"/"u^3"
// before "u", etc.
constexpr FactorSpec kFactors[] = {
    {"sin(u)", Factor::SinU}, {"lap(u)", Factor::Lap}, {"u_xx", Factor::Uxx},
    {"u_yy", Factor::Uyy},    {"u_x", Factor::Ux},     {"u_y", Factor::Uy},
    {"u^2", Factor::U2},      {"u^3", Factor::U3},     {"1", Factor::One},
    {"u", Factor::U},
};

const char* canonical(Factor f) {
    for (const auto& spec : kFactors)
        if (spec.factor == f) return spec.token;
    return "?";
}

}  // namespace

Term parse_term(std::string_view spec) {
    Term term;
    std::size_t pos = 0;
    const auto skip_spaces = [&] {
        while (pos < spec.size() && spec[pos] == ' ') ++pos;
    };
    skip_spaces();
    if (pos == spec.size()) throw TermParseError("empty term", pos);
    bool expect_factor = true;
    while (pos < spec.size()) {
        if (expect_factor) {
            const std::string_view rest = spec.substr(pos);
            const FactorSpec* hit = nullptr;
            for (const auto& f : kFactors) {
                const std::string_view tok(f.token);
                if (rest.substr(0, tok.size()) == tok) {
                    hit = &f;
                    break;
                }
            }
            if (!hit) throw TermParseError("unknown factor in term '" + std::string(spec) + "'", pos);
            term.factors.push_back(hit->factor);
            pos += std::string_view(hit->token).size();
            expect_factor = false;
        } else {
            skip_spaces();
            if (pos == spec.size()) break;
            if (spec[pos] != '*')
                throw TermParseError("expected '*' between factors in '" + std::string(spec) + "'",
                                     pos);
            ++pos;
            skip_spaces();
            expect_factor = true;
        }
    }
    if (expect_factor) throw TermParseError("term ends after '*'", pos);
    if (term.factors.size() > 1 &&
        std::any_of(term.factors.begin(), term.factors.end(),
                    [](Factor f) { return f == Factor::One; }))
        throw TermParseError("'1' is only valid as a complete term", 0);

    for (std::size_t i = 0; i < term.factors.size(); ++i) {
        if (i) term.label += '*';
        term.label += canonical(term.factors[i]);
    }
    return term;
}

TermLibrary TermLibrary::from_strings(std::span<const std::string> specs) {
    TermLibrary lib;
    lib.terms.reserve(specs.size());
    for (const auto& s : specs) {
        Term t = parse_term(s);
        for (const auto& existing : lib.terms)
            if (existing.label == t.label)
                throw ConfigError("duplicate term '" + t.label + "' in library");
        lib.terms.push_back(std::move(t));
    }
    if (lib.terms.empty()) throw ConfigError("term library is empty");
    return lib;
}

std::vector<std::string> TermLibrary::labels() const {
    std::vector<std::string> out;
    out.reserve(terms.size());
    for (const auto& t : terms) out.push_back(t.label);
    return out;
}

FieldSelection required_fields(const TermLibrary& lib) {
    FieldSelection sel;
    for (const auto& t : lib.terms) {
        for (Factor f : t.factors) {
            switch (f) {
                case Factor::Ux: sel.ux = true; break;
                case Factor::Uxx: sel.uxx = true; break;
                case Factor::Uy: sel.uy = true; break;
                case Factor::Uyy: sel.uyy = true; break;
                case Factor::Lap: sel.lap = true; break;
                default: break;  // 1, u, u^2, u^3, sin(u) only need u
            }
        }
    }
    return sel;
}

namespace {

const Eigen::VectorXd* field_for(const SegmentFieldBlock& block, Factor f) {
    switch (f) {
        case Factor::Ux: return &block.u_x;
        case Factor::Uxx: return &block.u_xx;
        case Factor::Uy: return &block.u_y;
        case Factor::Uyy: return &block.u_yy;
        case Factor::Lap: return &block.lap;
        default: return nullptr;  // derived from u
    }
}

}  // namespace

DesignSystem build_design(const SegmentFieldBlock& block, const TermLibrary& lib,
                          const Eigen::VectorXd* known_forcing) {
    const auto n_raw = static_cast<Eigen::Index>(block.n());
    const auto m = static_cast<Eigen::Index>(lib.terms.size());
    if (block.u_tt.size() != n_raw)
        throw MissingFieldError("block lacks the second time derivative needed for the target");
    if (known_forcing && known_forcing->size() != n_raw)
        throw ConfigError("known forcing has " + std::to_string(known_forcing->size()) +
                          " entries for " + std::to_string(n_raw) + " samples");

    Eigen::MatrixXd d_raw(n_raw, m);
    for (Eigen::Index j = 0; j < m; ++j) {
        const Term& term = lib.terms[static_cast<std::size_t>(j)];
        Eigen::ArrayXd col = Eigen::ArrayXd::Ones(n_raw);
        for (Factor f : term.factors) {
            switch (f) {
                case Factor::One: break;
                case Factor::U: col *= block.u.array(); break;
                case Factor::U2: col *= block.u.array().square(); break;
                case Factor::U3: col *= block.u.array().cube(); break;
                case Factor::SinU: col *= block.u.array().sin(); break;
                default: {
                    const Eigen::VectorXd* field = field_for(block, f);
                    if (!field || field->size() != n_raw)
                        throw MissingFieldError("term '" + term.label +
                                                "' needs a derivative field the block does not carry");
                    col *= field->array();
                }
            }
        }
        d_raw.col(j) = col.matrix();
    }
    Eigen::VectorXd y_raw = block.u_tt;
    if (known_forcing) y_raw -= *known_forcing;

    // Drop rows with any non-finite entry (target or any column).
    std::vector<Eigen::Index> keep;
    keep.reserve(static_cast<std::size_t>(n_raw));
    for (Eigen::Index i = 0; i < n_raw; ++i) {
        bool ok = std::isfinite(y_raw(i));
        for (Eigen::Index j = 0; ok && j < m; ++j) ok = std::isfinite(d_raw(i, j));
        if (ok) keep.push_back(i);
    }

    DesignSystem sys;
    sys.labels = lib.labels();
    sys.dropped_rows = static_cast<std::size_t>(n_raw) - keep.size();
    if (keep.empty())
        throw EmptySegmentError("segment " + std::to_string(block.segment) +
                                " has no usable samples");
    sys.y.resize(static_cast<Eigen::Index>(keep.size()));
    sys.D.resize(static_cast<Eigen::Index>(keep.size()), m);
    sys.coords.reserve(keep.size());
    for (std::size_t r = 0; r < keep.size(); ++r) {
        sys.y(static_cast<Eigen::Index>(r)) = y_raw(keep[r]);
        sys.D.row(static_cast<Eigen::Index>(r)) = d_raw.row(keep[r]);
        sys.coords.push_back(block.coords[static_cast<std::size_t>(keep[r])]);
    }
    for (Eigen::Index j = 0; j < m; ++j)
        if ((sys.D.col(j).array() == 0.0).all())
            throw DegenerateColumnError("term '" + sys.labels[static_cast<std::size_t>(j)] +
                                        "' evaluates to the zero column on segment " +
                                        std::to_string(block.segment));
    return sys;
}

std::pair<DesignSystem, Eigen::VectorXd> column_normalize(const DesignSystem& sys) {
    DesignSystem out = sys;
    Eigen::VectorXd scales(sys.m());
    for (Eigen::Index j = 0; j < sys.m(); ++j) {
        const double s = sys.D.col(j).norm();
        if (!(s > 0.0) || !std::isfinite(s))
            throw DegenerateColumnError("column '" + sys.labels[static_cast<std::size_t>(j)] +
                                        "' cannot be normalized");
        scales(j) = s;
        out.D.col(j) /= s;
    }
    return {std::move(out), std::move(scales)};
}

}  // namespace mswave::dict
