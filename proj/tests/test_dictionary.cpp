#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>

#include "mswave/dictionary.hpp"
#include "mswave/errors.hpp"

using namespace mswave;
using dict::Factor;
using dict::TermLibrary;

namespace {

/// Hand-built 1-D block with known field values, two time levels worth of
/// samples; enough structure to check products and the target column.
synth::SegmentFieldBlock toy_block() {
    synth::SegmentFieldBlock blk;
    blk.segment = 0;
    blk.t_begin = 0.0;
    blk.t_end = 1.0;
    blk.dt = 0.1;
    const int n = 6;
    blk.u.resize(n);
    blk.u << 0.5, -1.0, 2.0, 0.25, -0.5, 1.5;
    blk.u_tt.resize(n);
    blk.u_tt << 1.0, 2.0, -1.0, 0.5, 0.0, -2.0;
    blk.u_x.resize(n);
    blk.u_x << 0.1, 0.2, 0.3, -0.1, -0.2, -0.3;
    blk.u_xx.resize(n);
    blk.u_xx << 2.0, -2.0, 1.0, -1.0, 0.5, -0.5;
    blk.coords.resize(n);
    for (int k = 0; k < n; ++k) blk.coords[static_cast<std::size_t>(k)] = {k + 1, 0, 1};
    return blk;
}

}  // namespace

TEST_CASE("parse_term canonicalizes factors and products", "[dictionary]") {
    REQUIRE(dict::parse_term("u_xx").label == "u_xx");
    REQUIRE(dict::parse_term("sin(u)").label == "sin(u)");
    REQUIRE(dict::parse_term("1").label == "1");
    REQUIRE(dict::parse_term("u^2").label == "u^2");
    REQUIRE(dict::parse_term("u^3").label == "u^3");
    REQUIRE(dict::parse_term("lap(u)").label == "lap(u)");
    REQUIRE(dict::parse_term(" u * u_x ").label == "u*u_x");
    REQUIRE(dict::parse_term("u^2*u_xx").label == "u^2*u_xx");
    const dict::Term t = dict::parse_term("u * u_x");
    REQUIRE(t.factors == std::vector<Factor>{Factor::U, Factor::Ux});
}

TEST_CASE("parse_term rejects malformed specs with positions", "[dictionary]") {
    REQUIRE_THROWS_AS(dict::parse_term(""), TermParseError);
    REQUIRE_THROWS_AS(dict::parse_term("u^4"), TermParseError);
    REQUIRE_THROWS_AS(dict::parse_term("cos(u)"), TermParseError);
    REQUIRE_THROWS_AS(dict::parse_term("u**u"), TermParseError);
    REQUIRE_THROWS_AS(dict::parse_term("u*"), TermParseError);
    REQUIRE_THROWS_AS(dict::parse_term("1*u"), TermParseError);  // 1 only standalone
    REQUIRE_THROWS_AS(dict::parse_term("u*1"), TermParseError);
    try {
        dict::parse_term("u*bogus");
        FAIL("expected TermParseError");
    } catch (const TermParseError& e) {
        REQUIRE(e.position == 2);  // 0-based offset of the bad factor
    }
}

TEST_CASE("library construction and duplicate rejection", "[dictionary]") {
    const std::vector<std::string> specs{"u_xx", "sin(u)", "1", "u", "u_x", "u^2"};
    const TermLibrary lib = TermLibrary::from_strings(specs);
    REQUIRE(lib.labels() == specs);

    const std::vector<std::string> dup{"u_xx", "u_xx"};
    REQUIRE_THROWS_AS(TermLibrary::from_strings(dup), ConfigError);
    // same canonical term spelled differently is still a duplicate
    const std::vector<std::string> dup2{"u *u_x", "u* u_x"};
    REQUIRE_THROWS_AS(TermLibrary::from_strings(dup2), ConfigError);
    REQUIRE_THROWS_AS(TermLibrary::from_strings(std::vector<std::string>{}), ConfigError);
}

TEST_CASE("required_fields reflects the factors used", "[dictionary]") {
    const TermLibrary lib1 = TermLibrary::from_strings(
        std::vector<std::string>{"u_xx", "sin(u)", "1", "u"});
    const synth::FieldSelection s1 = dict::required_fields(lib1);
    REQUIRE(s1.uxx);
    REQUIRE_FALSE(s1.ux);
    REQUIRE_FALSE(s1.uy);
    REQUIRE_FALSE(s1.lap);

    const TermLibrary lib2 =
        TermLibrary::from_strings(std::vector<std::string>{"lap(u)", "u_y", "u_yy"});
    const synth::FieldSelection s2 = dict::required_fields(lib2);
    REQUIRE(s2.lap);
    REQUIRE(s2.uy);
    REQUIRE(s2.uyy);
    REQUIRE_FALSE(s2.uxx);
}

TEST_CASE("build_design evaluates factor products", "[dictionary]") {
    const auto blk = toy_block();
    const TermLibrary lib = TermLibrary::from_strings(
        std::vector<std::string>{"u_xx", "u", "u^2", "u^3", "sin(u)", "1", "u*u_x"});
    const dict::DesignSystem sys = dict::build_design(blk, lib);
    REQUIRE(sys.n() == 6);
    REQUIRE(sys.m() == 7);
    REQUIRE(sys.labels == lib.labels());
    REQUIRE(sys.dropped_rows == 0);
    for (int k = 0; k < 6; ++k) {
        REQUIRE(sys.y(k) == blk.u_tt(k));
        REQUIRE(sys.D(k, 0) == blk.u_xx(k));
        REQUIRE(sys.D(k, 1) == blk.u(k));
        REQUIRE_THAT(sys.D(k, 2), Catch::Matchers::WithinAbs(blk.u(k) * blk.u(k), 1e-15));
        REQUIRE_THAT(sys.D(k, 3),
                     Catch::Matchers::WithinAbs(blk.u(k) * blk.u(k) * blk.u(k), 1e-15));
        REQUIRE_THAT(sys.D(k, 4), Catch::Matchers::WithinAbs(std::sin(blk.u(k)), 1e-15));
        REQUIRE(sys.D(k, 5) == 1.0);
        REQUIRE_THAT(sys.D(k, 6), Catch::Matchers::WithinAbs(blk.u(k) * blk.u_x(k), 1e-15));
    }
}

TEST_CASE("known forcing is subtracted from the target", "[dictionary]") {
    const auto blk = toy_block();
    const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"u_xx"});
    Eigen::VectorXd forcing(6);
    forcing << 0.5, 0.5, 0.5, 0.5, 0.5, 0.5;
    const dict::DesignSystem sys = dict::build_design(blk, lib, &forcing);
    for (int k = 0; k < 6; ++k) REQUIRE(sys.y(k) == blk.u_tt(k) - 0.5);

    Eigen::VectorXd wrong_size(3);
    wrong_size.setZero();
    REQUIRE_THROWS_AS(dict::build_design(blk, lib, &wrong_size), ConfigError);
}

TEST_CASE("non-finite rows are dropped and counted", "[dictionary]") {
    auto blk = toy_block();
    blk.u_tt(2) = std::nan("");
    blk.u_xx(4) = std::numeric_limits<double>::infinity();
    const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"u_xx", "u"});
    const dict::DesignSystem sys = dict::build_design(blk, lib);
    REQUIRE(sys.n() == 4);
    REQUIRE(sys.dropped_rows == 2);
    REQUIRE(sys.coords.size() == 4);
    // surviving rows keep their original coordinates
    for (const auto& c : sys.coords) REQUIRE(c.ix != 3);  // coords[2].ix == 3 dropped
}

TEST_CASE("degenerate and missing columns raise", "[dictionary]") {
    auto blk = toy_block();
    SECTION("zero column") {
        blk.u.setZero();  // u column identically zero
        const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"u_xx", "u"});
        REQUIRE_THROWS_AS(dict::build_design(blk, lib), DegenerateColumnError);
    }
    SECTION("missing field") {
        const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"lap(u)"});
        REQUIRE_THROWS_AS(dict::build_design(blk, lib), MissingFieldError);
    }
    SECTION("missing target") {
        blk.u_tt.resize(0);
        const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"u_xx"});
        REQUIRE_THROWS_AS(dict::build_design(blk, lib), MissingFieldError);
    }
    SECTION("all rows dropped") {
        blk.u_tt.setConstant(std::nan(""));
        const TermLibrary lib = TermLibrary::from_strings(std::vector<std::string>{"u_xx"});
        REQUIRE_THROWS_AS(dict::build_design(blk, lib), EmptySegmentError);
    }
}

TEST_CASE("column_normalize produces unit columns and invertible scales", "[dictionary]") {
    const auto blk = toy_block();
    const TermLibrary lib = TermLibrary::from_strings(
        std::vector<std::string>{"u_xx", "u", "sin(u)", "1"});
    const dict::DesignSystem sys = dict::build_design(blk, lib);
    const auto [scaled, s] = dict::column_normalize(sys);
    REQUIRE(s.size() == sys.m());
    for (Eigen::Index j = 0; j < scaled.m(); ++j) {
        REQUIRE_THAT(scaled.D.col(j).norm(), Catch::Matchers::WithinAbs(1.0, 1e-12));
        REQUIRE_THAT(s(j), Catch::Matchers::WithinAbs(sys.D.col(j).norm(), 1e-12));
    }
    REQUIRE(scaled.y == sys.y);

    // Least-squares estimates transform as beta_original = beta_scaled / s.
    const Eigen::VectorXd beta_orig = sys.D.colPivHouseholderQr().solve(sys.y);
    const Eigen::VectorXd beta_scaled = scaled.D.colPivHouseholderQr().solve(scaled.y);
    for (Eigen::Index j = 0; j < sys.m(); ++j)
        REQUIRE_THAT(beta_scaled(j) / s(j), Catch::Matchers::WithinAbs(beta_orig(j), 1e-9));
}
