#pragma once

#include <Eigen/Dense>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mswave/synth.hpp"

namespace mswave::dict {

using synth::DerivativeFields;
using synth::FieldSelection;
using synth::SampleCoord;
using synth::SegmentFieldBlock;

/// One multiplicative factor of a candidate term.
enum class Factor { One, U, U2, U3, SinU, Ux, Uxx, Uy, Uyy, Lap };

/// Candidate right-hand-side term: a product of factors, e.g. u^2 * u_xx.
/// The label is the canonical spelling ("u^2*u_xx").
struct Term {
    std::vector<Factor> factors;
    std::string label;
};

/// Grammar: factors "1", "u", "u^2", "u^3", "sin(u)", "u_x", "u_xx", "u_y",
/// "u_yy", "lap(u)" joined by "*" (spaces around "*" allowed). "1" is only
/// valid as a complete term. Throws TermParseError with the offending
/// position.
Term parse_term(std::string_view spec);

struct TermLibrary {
    std::vector<Term> terms;
    static TermLibrary from_strings(std::span<const std::string> specs);
    std::vector<std::string> labels() const;
};

/// Fields the library's factors need from compute_fields (u itself is
/// always available).
FieldSelection required_fields(const TermLibrary& lib);

/// Regression system of one segment: y = target column (u_tt, minus the
/// known forcing when one is supplied), D = one column per term evaluated
/// on the block's samples. Rows with non-finite entries are dropped and
/// counted.
struct DesignSystem {
    Eigen::VectorXd y;
    Eigen::MatrixXd D;
    std::vector<std::string> labels;
    std::vector<SampleCoord> coords;
    std::size_t dropped_rows = 0;

    Eigen::Index n() const { return D.rows(); }
    Eigen::Index m() const { return D.cols(); }
};

/// known_forcing, when non-null, must have one entry per block sample (the
/// pre-drop count). Throws MissingFieldError when a factor needs a field
/// the block does not carry, EmptySegmentError when no finite rows remain,
/// DegenerateColumnError when a column is identically zero.
DesignSystem build_design(const SegmentFieldBlock& block, const TermLibrary& lib,
                          const Eigen::VectorXd* known_forcing = nullptr);

/// Rescales every column to unit Euclidean norm; returns the scales s
/// (s_j = ||D_j||). A coefficient beta on the scaled column corresponds to
/// beta / s_j on the original one.
std::pair<DesignSystem, Eigen::VectorXd> column_normalize(const DesignSystem& sys);

}  // namespace mswave::dict
