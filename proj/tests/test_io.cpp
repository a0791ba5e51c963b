#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "mswave/dictionary.hpp"
#include "mswave/errors.hpp"
#include "mswave/io.hpp"
#include "mswave/synth.hpp"

using namespace mswave;
namespace fs = std::filesystem;

namespace {

Snapshot sample_1d() {
    Snapshot s;
    s.x = {0.0, 0.5, 1.0};
    s.t = {0.0, 0.1, 0.2, 0.3, 0.4};
    s.segment_starts = {0, 2};
    s.u.resize(3, 5);
    double v = 0.0;
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 3; ++i) s.u(i, j) = std::sin(v += 0.7) * 1e3 + 1.0 / 3.0;
    s.u(0, 0) = 0.0;
    return s;
}

Snapshot sample_2d() {
    Snapshot s;
    s.x = {0.0, 1.0};
    s.y = {0.0, 0.5, 1.0};
    s.t = {0.0, 0.25, 0.5};
    s.segment_starts = {0, 1};
    s.u.resize(6, 3);
    for (int j = 0; j < 3; ++j)
        for (int i = 0; i < 6; ++i) s.u(i, j) = std::cos(0.3 * i + 1.7 * j) / 7.0;
    return s;
}

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() /
               ("mswave_io_test_" + std::to_string(static_cast<unsigned>(std::rand())));
        fs::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

}  // namespace

TEST_CASE("CSV snapshot round trip is bit exact (1-D)", "[io]") {
    const Snapshot s = sample_1d();
    io::FieldMeta meta{"noisy", 0.01, 12345};
    std::stringstream ss;
    io::write_snapshot_csv(s, ss, meta);
    io::FieldMeta got_meta;
    const Snapshot r = io::read_snapshot_csv(ss, &got_meta);
    REQUIRE(r.x == s.x);
    REQUIRE(r.y.empty());
    REQUIRE(r.t == s.t);
    REQUIRE(r.segment_starts == s.segment_starts);
    REQUIRE(r.u == s.u);
    REQUIRE(got_meta.field == "noisy");
    REQUIRE(got_meta.eta == 0.01);
    REQUIRE(got_meta.seed == 12345);
}

TEST_CASE("CSV snapshot round trip is bit exact (2-D)", "[io]") {
    const Snapshot s = sample_2d();
    std::stringstream ss;
    io::write_snapshot_csv(s, ss);
    const Snapshot r = io::read_snapshot_csv(ss);
    REQUIRE(r.x == s.x);
    REQUIRE(r.y == s.y);
    REQUIRE(r.t == s.t);
    REQUIRE(r.segment_starts == s.segment_starts);
    REQUIRE(r.u == s.u);
}

TEST_CASE("binary snapshot round trip is bit exact", "[io]") {
    for (const Snapshot& s : {sample_1d(), sample_2d()}) {
        io::FieldMeta meta{"u", 0.0, 7};
        std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
        io::write_snapshot_bin(s, ss, meta);
        io::FieldMeta got_meta;
        const Snapshot r = io::read_snapshot_bin(ss, &got_meta);
        REQUIRE(r.x == s.x);
        REQUIRE(r.y == s.y);
        REQUIRE(r.t == s.t);
        REQUIRE(r.segment_starts == s.segment_starts);
        REQUIRE(r.u == s.u);
        REQUIRE(got_meta.field == "u");
        REQUIRE(got_meta.seed == 7);
    }
}

TEST_CASE("binary reader rejects corruption", "[io]") {
    const Snapshot s = sample_1d();
    std::stringstream ss(std::ios::in | std::ios::out | std::ios::binary);
    io::write_snapshot_bin(s, ss);
    const std::string blob = ss.str();

    SECTION("bad magic") {
        std::string bad = blob;
        bad[0] = 'X';
        std::stringstream in(bad, std::ios::in | std::ios::binary);
        REQUIRE_THROWS_AS(io::read_snapshot_bin(in), ParseError);
    }
    SECTION("truncated") {
        std::stringstream in(blob.substr(0, blob.size() / 2),
                             std::ios::in | std::ios::binary);
        try {
            io::read_snapshot_bin(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(e.location > 0);  // byte offset where it ran dry
        }
    }
    SECTION("bad version") {
        std::string bad = blob;
        bad[8] = 99;  // version field follows the 8-byte magic
        std::stringstream in(bad, std::ios::in | std::ios::binary);
        REQUIRE_THROWS_AS(io::read_snapshot_bin(in), ParseError);
    }
}

TEST_CASE("CSV reader validates the sample table", "[io]") {
    SECTION("bad header") {
        std::stringstream in("# mswave snapshot v1\nwat,t,u\n");
        REQUIRE_THROWS_AS(io::read_snapshot_csv(in), ParseError);
    }
    SECTION("duplicate sample") {
        std::stringstream in(
            "x,t,u\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n0,0,9\n");
        REQUIRE_THROWS_AS(io::read_snapshot_csv(in), ParseError);
    }
    SECTION("incomplete tensor grid") {
        std::stringstream in("x,t,u\n0,0,1\n1,0,2\n0,1,3\n");
        REQUIRE_THROWS_AS(io::read_snapshot_csv(in), ParseError);
    }
    SECTION("non-numeric value with line number") {
        std::stringstream in("x,t,u\n0,0,1\n1,0,oops\n");
        try {
            io::read_snapshot_csv(in);
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            REQUIRE(e.location == 3);
        }
    }
    SECTION("empty input") {
        std::stringstream in("");
        REQUIRE_THROWS_AS(io::read_snapshot_csv(in), ParseError);
    }
    SECTION("segments default to a single span") {
        std::stringstream in("x,t,u\n0,0,1\n1,0,2\n0,1,3\n1,1,4\n");
        const Snapshot r = io::read_snapshot_csv(in);
        REQUIRE(r.segment_starts == std::vector<std::size_t>{0});
        REQUIRE(r.nx() == 2);
        REQUIRE(r.nt() == 2);
    }
}

TEST_CASE("file helpers name the offending path in IoError", "[io]") {
    const Snapshot s = sample_1d();
    const fs::path missing = "/nonexistent_dir_zzz/f.csv";
    try {
        io::save_snapshot_csv(s, missing);
        FAIL("expected IoError");
    } catch (const IoError& e) {
        REQUIRE(std::string(e.what()).find("nonexistent_dir_zzz") != std::string::npos);
    }
    REQUIRE_THROWS_AS(io::load_snapshot_csv(missing), IoError);
    REQUIRE_THROWS_AS(io::load_snapshot_bin(missing), IoError);
    REQUIRE_THROWS_AS(io::load_path_csv(missing), IoError);
}

TEST_CASE("file round trips through disk", "[io]") {
    TempDir tmp;
    const Snapshot s = sample_2d();
    const io::FieldMeta meta{"clean", 0.0, 0};

    const fs::path csvp = tmp.path / "snap.csv";
    io::save_snapshot_csv(s, csvp, meta);
    const Snapshot rc = io::load_snapshot_csv(csvp);
    REQUIRE(rc.u == s.u);

    const fs::path binp = tmp.path / "snap.bin";
    io::save_snapshot_bin(s, binp, meta);
    const Snapshot rb = io::load_snapshot_bin(binp);
    REQUIRE(rb.u == s.u);
    REQUIRE(rb.y == s.y);

    const auto path = switching::fixed_path({0.0, 1.0}, {2.0, 1.0}, 3.0);
    const fs::path pp = tmp.path / "path.csv";
    io::save_path_csv(path, pp);
    const auto rp = io::load_path_csv(pp);
    REQUIRE(rp.jump_times == path.jump_times);
    REQUIRE(rp.values == path.values);
    REQUIRE(rp.horizon == path.horizon);
}

TEST_CASE("design CSV lists coordinates, target and columns", "[io]") {
    // tiny snapshot -> fields -> design -> CSV; check header and row count
    Snapshot s;
    s.x = {0.0, 0.25, 0.5, 0.75, 1.0};
    s.t = {0.0, 0.1, 0.2, 0.3, 0.4};
    s.u.resize(5, 5);
    for (int j = 0; j < 5; ++j)
        for (int i = 0; i < 5; ++i) s.u(i, j) = 1.0 + 0.1 * i + 0.01 * j + 0.001 * i * j;
    synth::FieldSelection sel;
    sel.utt = sel.uxx = true;
    const auto fields = synth::compute_fields(s, sel);
    const auto lib = dict::TermLibrary::from_strings(std::vector<std::string>{"u_xx", "u"});
    const auto sys = dict::build_design(fields.segments[0], lib);

    std::stringstream out;
    io::write_design_csv(sys, fields, out);
    std::string line;
    REQUIRE(std::getline(out, line));
    REQUIRE(line == "x,t,target,u_xx,u");
    std::size_t rows = 0;
    while (std::getline(out, line))
        if (!line.empty()) ++rows;
    REQUIRE(rows == static_cast<std::size_t>(sys.n()));
}

TEST_CASE("fields CSV emits one row per field and sample", "[io]") {
    Snapshot s;
    s.x = {0.0, 0.5, 1.0, 1.5, 2.0};
    s.t = {0.0, 0.1, 0.2, 0.3};
    s.u = Eigen::MatrixXd::Ones(5, 4);
    synth::FieldSelection sel;
    sel.utt = sel.ux = true;
    const auto fields = synth::compute_fields(s, sel);
    std::stringstream out;
    io::write_fields_csv(fields, out);
    std::string line;
    REQUIRE(std::getline(out, line));
    REQUIRE(line == "field,x,t,value");
    std::size_t u_rows = 0, utt_rows = 0, ux_rows = 0;
    while (std::getline(out, line)) {
        if (line.rfind("u,", 0) == 0) ++u_rows;
        if (line.rfind("u_tt,", 0) == 0) ++utt_rows;
        if (line.rfind("u_x,", 0) == 0) ++ux_rows;
    }
    const std::size_t n = fields.segments[0].n();
    REQUIRE(u_rows == n);
    REQUIRE(utt_rows == n);
    REQUIRE(ux_rows == n);
}
