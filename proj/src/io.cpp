#include "mswave/io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

static_assert(std::endian::native == std::endian::little,
              "binary snapshot container assumes a little-endian host");

namespace mswave::io {

namespace {

void fmt(std::ostream& out, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    out << buf;
}

double parse_double(const std::string& field, std::size_t line_no) {
    try {
        std::size_t used = 0;
        const double v = std::stod(field, &used);
        if (used != field.size()) throw std::invalid_argument("trailing junk");
        return v;
    } catch (const std::exception&) {
        throw ParseError("bad numeric field '" + field + "'", line_no);
    }
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

void check_snapshot(const Snapshot& s) {
    const auto ns = static_cast<Eigen::Index>(s.nx() * s.ny());
    if (s.u.rows() != ns || s.u.cols() != static_cast<Eigen::Index>(s.nt()))
        throw ConfigError("snapshot value matrix does not match its axes");
    if (s.segment_starts.empty() || s.segment_starts.front() != 0)
        throw ConfigError("snapshot segment starts must begin at index 0");
    for (std::size_t k = 1; k < s.segment_starts.size(); ++k)
        if (s.segment_starts[k] <= s.segment_starts[k - 1] || s.segment_starts[k] >= s.nt())
            throw ConfigError("snapshot segment starts must be increasing and inside the time axis");
}

}  // namespace

void write_snapshot_csv(const Snapshot& s, std::ostream& out, const FieldMeta& meta) {
    check_snapshot(s);
    out << "# mswave snapshot v1\n";
    out << "# field=" << meta.field << " eta=";
    fmt(out, meta.eta);
    out << " seed=" << meta.seed << "\n";
    out << "# segments=";
    for (std::size_t k = 0; k < s.segment_starts.size(); ++k)
        out << (k ? "," : "") << s.segment_starts[k];
    out << "\n";
    out << (s.two_d() ? "x,y,t,u" : "x,t,u") << "\n";
    for (std::size_t j = 0; j < s.nt(); ++j) {
        for (std::size_t iy = 0; iy < s.ny(); ++iy) {
            for (std::size_t ix = 0; ix < s.nx(); ++ix) {
                fmt(out, s.x[ix]);
                if (s.two_d()) {
                    out << ',';
                    fmt(out, s.y[iy]);
                }
                out << ',';
                fmt(out, s.t[j]);
                out << ',';
                fmt(out, s.u(static_cast<Eigen::Index>(s.space_index(ix, iy)),
                             static_cast<Eigen::Index>(j)));
                out << '\n';
            }
        }
    }
}

Snapshot read_snapshot_csv(std::istream& in, FieldMeta* meta) {
    std::string line;
    std::size_t line_no = 0;
    FieldMeta m;
    std::vector<std::size_t> segments;
    bool saw_header = false;
    bool two_d = false;

    // Meta/comment lines until the column header.
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ls(line.substr(1));
            std::string tok;
            while (ls >> tok) {
                if (tok.rfind("field=", 0) == 0) m.field = tok.substr(6);
                else if (tok.rfind("eta=", 0) == 0) m.eta = parse_double(tok.substr(4), line_no);
                else if (tok.rfind("seed=", 0) == 0)
                    m.seed = std::strtoull(tok.substr(5).c_str(), nullptr, 10);
                else if (tok.rfind("segments=", 0) == 0) {
                    for (const auto& f : split_csv(tok.substr(9)))
                        segments.push_back(
                            static_cast<std::size_t>(std::strtoull(f.c_str(), nullptr, 10)));
                }
            }
            continue;
        }
        if (line == "x,t,u") {
            two_d = false;
            saw_header = true;
        } else if (line == "x,y,t,u") {
            two_d = true;
            saw_header = true;
        } else {
            throw ParseError("expected snapshot header 'x,t,u' or 'x,y,t,u', got '" + line + "'",
                             line_no);
        }
        break;
    }
    if (!saw_header) throw ParseError("snapshot file has no column header", line_no);

    struct Row {
        double x, y, t, u;
    };
    std::vector<Row> rows;
    std::map<double, std::size_t> xs, ys, ts;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        const std::size_t expect = two_d ? 4 : 3;
        if (fields.size() != expect)
            throw ParseError("expected " + std::to_string(expect) + " columns", line_no);
        Row r{};
        std::size_t f = 0;
        r.x = parse_double(fields[f++], line_no);
        r.y = two_d ? parse_double(fields[f++], line_no) : 0.0;
        r.t = parse_double(fields[f++], line_no);
        r.u = parse_double(fields[f++], line_no);
        xs.emplace(r.x, 0);
        if (two_d) ys.emplace(r.y, 0);
        ts.emplace(r.t, 0);
        rows.push_back(r);
    }
    if (rows.empty()) throw ParseError("snapshot file has no data rows", line_no);

    Snapshot s;
    auto index_axis = [](std::map<double, std::size_t>& m_, std::vector<double>& axis) {
        axis.reserve(m_.size());
        std::size_t i = 0;
        for (auto& [v, idx] : m_) {
            idx = i++;
            axis.push_back(v);
        }
    };
    index_axis(xs, s.x);
    if (two_d) index_axis(ys, s.y);
    index_axis(ts, s.t);

    const std::size_t expected = s.nx() * s.ny() * s.nt();
    if (rows.size() != expected)
        throw ParseError("snapshot rows (" + std::to_string(rows.size()) +
                             ") do not fill the " + std::to_string(s.nx()) + "x" +
                             std::to_string(s.ny()) + "x" + std::to_string(s.nt()) + " grid",
                         line_no);
    s.u.setConstant(static_cast<Eigen::Index>(s.nx() * s.ny()),
                    static_cast<Eigen::Index>(s.nt()),
                    std::numeric_limits<double>::quiet_NaN());
    for (const auto& r : rows) {
        const auto ix = xs.at(r.x);
        const auto iy = two_d ? ys.at(r.y) : 0;
        const auto jt = ts.at(r.t);
        auto& cell = s.u(static_cast<Eigen::Index>(s.space_index(ix, iy)),
                         static_cast<Eigen::Index>(jt));
        if (!std::isnan(cell)) throw ParseError("duplicate sample in snapshot file", line_no);
        cell = r.u;
    }
    s.segment_starts = segments.empty() ? std::vector<std::size_t>{0} : std::move(segments);
    check_snapshot(s);
    if (meta) *meta = m;
    return s;
}

namespace {

constexpr char kMagic[8] = {'M', 'S', 'W', 'S', 'N', 'A', 'P', '1'};

template <class T>
void put(std::ostream& out, const T& v) {
    out.write(reinterpret_cast<const char*>(&v), sizeof v);
}
template <class T>
T get(std::istream& in, std::size_t& offset) {
    T v{};
    in.read(reinterpret_cast<char*>(&v), sizeof v);
    if (!in) throw ParseError("binary snapshot truncated", offset);
    offset += sizeof v;
    return v;
}

}  // namespace

void write_snapshot_bin(const Snapshot& s, std::ostream& out, const FieldMeta& meta) {
    check_snapshot(s);
    out.write(kMagic, sizeof kMagic);
    put<std::uint32_t>(out, 1);  // version
    put<std::uint32_t>(out, s.two_d() ? 2 : 1);
    put<std::uint64_t>(out, s.nx());
    put<std::uint64_t>(out, s.two_d() ? s.ny() : 0);
    put<std::uint64_t>(out, s.nt());
    put<std::uint64_t>(out, s.n_segments());
    put<double>(out, meta.eta);
    put<std::uint64_t>(out, meta.seed);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(meta.field.size()));
    out.write(meta.field.data(), static_cast<std::streamsize>(meta.field.size()));
    auto put_axis = [&out](const std::vector<double>& axis) {
        out.write(reinterpret_cast<const char*>(axis.data()),
                  static_cast<std::streamsize>(axis.size() * sizeof(double)));
    };
    put_axis(s.x);
    if (s.two_d()) put_axis(s.y);
    put_axis(s.t);
    for (std::size_t seg : s.segment_starts) put<std::uint64_t>(out, seg);
    out.write(reinterpret_cast<const char*>(s.u.data()),
              static_cast<std::streamsize>(static_cast<std::size_t>(s.u.size()) * sizeof(double)));
}

Snapshot read_snapshot_bin(std::istream& in, FieldMeta* meta) {
    std::size_t off = 0;
    char magic[8];
    in.read(magic, sizeof magic);
    if (!in || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw ParseError("not a binary snapshot (bad magic)", 0);
    off += 8;
    const auto version = get<std::uint32_t>(in, off);
    if (version != 1) throw ParseError("unsupported snapshot version " + std::to_string(version), off);
    const auto dims = get<std::uint32_t>(in, off);
    if (dims != 1 && dims != 2) throw ParseError("bad space dimension count", off);
    const auto nx = get<std::uint64_t>(in, off);
    const auto ny = get<std::uint64_t>(in, off);
    const auto nt = get<std::uint64_t>(in, off);
    const auto nseg = get<std::uint64_t>(in, off);
    if (nx < 1 || nt < 1 || nseg < 1 || (dims == 2) != (ny >= 1))
        throw ParseError("inconsistent snapshot dimensions", off);
    constexpr std::uint64_t kSane = 1ull << 32;
    if (nx > kSane || ny > kSane || nt > kSane || nseg > kSane)
        throw ParseError("snapshot dimensions out of range", off);

    FieldMeta m;
    m.eta = get<double>(in, off);
    m.seed = get<std::uint64_t>(in, off);
    const auto field_len = get<std::uint32_t>(in, off);
    if (field_len > 256) throw ParseError("field tag too long", off);
    m.field.resize(field_len);
    in.read(m.field.data(), field_len);
    if (!in) throw ParseError("binary snapshot truncated", off);
    off += field_len;

    Snapshot s;
    auto get_axis = [&](std::vector<double>& axis, std::uint64_t count) {
        axis.resize(count);
        in.read(reinterpret_cast<char*>(axis.data()),
                static_cast<std::streamsize>(count * sizeof(double)));
        if (!in) throw ParseError("binary snapshot truncated", off);
        off += count * sizeof(double);
    };
    get_axis(s.x, nx);
    if (dims == 2) get_axis(s.y, ny);
    get_axis(s.t, nt);
    s.segment_starts.resize(nseg);
    for (auto& seg : s.segment_starts)
        seg = static_cast<std::size_t>(get<std::uint64_t>(in, off));
    const std::size_t ns = static_cast<std::size_t>(nx) * (dims == 2 ? ny : 1);
    s.u.resize(static_cast<Eigen::Index>(ns), static_cast<Eigen::Index>(nt));
    in.read(reinterpret_cast<char*>(s.u.data()),
            static_cast<std::streamsize>(ns * nt * sizeof(double)));
    if (!in) throw ParseError("binary snapshot truncated", off);
    check_snapshot(s);
    if (meta) *meta = m;
    return s;
}

namespace {

std::ofstream open_out(const std::filesystem::path& p, std::ios::openmode mode) {
    std::ofstream f(p, mode);
    if (!f) throw IoError("cannot open '" + p.string() + "' for writing");
    return f;
}
std::ifstream open_in(const std::filesystem::path& p, std::ios::openmode mode) {
    std::ifstream f(p, mode);
    if (!f) throw IoError("cannot open '" + p.string() + "' for reading");
    return f;
}

}  // namespace

void save_snapshot_csv(const Snapshot& s, const std::filesystem::path& p, const FieldMeta& m) {
    auto f = open_out(p, std::ios::out);
    write_snapshot_csv(s, f, m);
}
Snapshot load_snapshot_csv(const std::filesystem::path& p, FieldMeta* meta) {
    auto f = open_in(p, std::ios::in);
    return read_snapshot_csv(f, meta);
}
void save_snapshot_bin(const Snapshot& s, const std::filesystem::path& p, const FieldMeta& m) {
    auto f = open_out(p, std::ios::out | std::ios::binary);
    write_snapshot_bin(s, f, m);
}
Snapshot load_snapshot_bin(const std::filesystem::path& p, FieldMeta* meta) {
    auto f = open_in(p, std::ios::in | std::ios::binary);
    return read_snapshot_bin(f, meta);
}

void save_path_csv(const switching::MarkovPath& path, const std::filesystem::path& p) {
    auto f = open_out(p, std::ios::out);
    switching::write_path_csv(path, f);
}
switching::MarkovPath load_path_csv(const std::filesystem::path& p) {
    auto f = open_in(p, std::ios::in);
    return switching::read_path_csv(f);
}

void write_design_csv(const dict::DesignSystem& sys, const synth::DerivativeFields& fields,
                      std::ostream& out) {
    out << (fields.two_d ? "x,y,t,target" : "x,t,target");
    for (const auto& label : sys.labels) out << ',' << label;
    out << '\n';
    for (Eigen::Index i = 0; i < sys.n(); ++i) {
        const auto& co = sys.coords[static_cast<std::size_t>(i)];
        fmt(out, fields.x[static_cast<std::size_t>(co.ix)]);
        if (fields.two_d) {
            out << ',';
            fmt(out, fields.y[static_cast<std::size_t>(co.iy)]);
        }
        out << ',';
        fmt(out, fields.t[static_cast<std::size_t>(co.jt)]);
        out << ',';
        fmt(out, sys.y(i));
        for (Eigen::Index j = 0; j < sys.m(); ++j) {
            out << ',';
            fmt(out, sys.D(i, j));
        }
        out << '\n';
    }
}

void write_fields_csv(const synth::DerivativeFields& fields, std::ostream& out) {
    out << (fields.two_d ? "field,x,y,t,value" : "field,x,t,value") << '\n';
    auto emit = [&](const char* name, const Eigen::VectorXd& v,
                    const synth::SegmentFieldBlock& seg) {
        if (v.size() == 0) return;
        for (Eigen::Index i = 0; i < v.size(); ++i) {
            const auto& co = seg.coords[static_cast<std::size_t>(i)];
            out << name << ',';
            fmt(out, fields.x[static_cast<std::size_t>(co.ix)]);
            if (fields.two_d) {
                out << ',';
                fmt(out, fields.y[static_cast<std::size_t>(co.iy)]);
            }
            out << ',';
            fmt(out, fields.t[static_cast<std::size_t>(co.jt)]);
            out << ',';
            fmt(out, v(i));
            out << '\n';
        }
    };
    for (const auto& seg : fields.segments) {
        emit("u", seg.u, seg);
        emit("u_tt", seg.u_tt, seg);
        emit("u_x", seg.u_x, seg);
        emit("u_xx", seg.u_xx, seg);
        emit("u_y", seg.u_y, seg);
        emit("u_yy", seg.u_yy, seg);
        emit("lap(u)", seg.lap, seg);
    }
}

}  // namespace mswave::io
