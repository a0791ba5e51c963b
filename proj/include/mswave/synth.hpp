#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mswave/snapshot.hpp"

namespace mswave::synth {

/// Multiplicative Gaussian measurement noise: y = u + xi with
/// xi ~ N(0, (eta*|u|)^2) independently per sample; samples with
/// |u| < 1e-12 stay exactly clean. Draw order is the storage order
/// (time level by time level, space index ascending), so a seed pins the
/// whole field bit-for-bit.
NoisySnapshot add_noise(const Snapshot& clean, double eta, std::uint64_t seed);

struct FieldSelection {
    bool utt = false;
    bool ux = false;
    bool uxx = false;
    bool uy = false;
    bool uyy = false;
    bool lap = false;
};

struct SampleCoord {
    int ix = 0;
    int iy = 0;  // 0 in 1-D
    int jt = 0;  // global time index
};

/// Finite-difference fields of one segment, evaluated on interior samples
/// only: spatial indices 1..n-2 per axis, time indices strictly inside the
/// segment's node range. Central stencils never cross a segment boundary,
/// so they never mix time steps or coefficient regimes. Sample order:
/// time index outermost, then y, then x.
struct SegmentFieldBlock {
    int segment = 0;
    double t_begin = 0.0, t_end = 0.0;
    double dt = 0.0;
    Eigen::VectorXd u, u_tt, u_x, u_xx, u_y, u_yy, lap;  // empty unless selected (u always set)
    std::vector<SampleCoord> coords;

    std::size_t n() const { return coords.size(); }
};

struct DerivativeFields {
    bool two_d = false;
    std::vector<double> x, y, t;  // axes copied from the snapshot
    std::vector<SegmentFieldBlock> segments;
};

/// Central second differences in time and space on interior samples.
/// smooth_window > 1 (odd) first applies a segment-local moving average
/// along the time axis. Throws SegmentTooShortError when a segment has
/// fewer than 3 time levels or an axis has fewer than 3 nodes.
DerivativeFields compute_fields(const Snapshot& data, const FieldSelection& which,
                                int smooth_window = 0);
inline DerivativeFields compute_fields(const NoisySnapshot& data, const FieldSelection& which,
                                       int smooth_window = 0) {
    return compute_fields(data.data, which, smooth_window);
}

/// u_tt on interior samples, one vector per segment.
std::vector<Eigen::VectorXd> second_time_derivative(const Snapshot& data);
inline std::vector<Eigen::VectorXd> second_time_derivative(const NoisySnapshot& data) {
    return second_time_derivative(data.data);
}

/// Spatial derivatives only (no u_tt).
DerivativeFields spatial_derivatives(const Snapshot& data, const FieldSelection& which);
inline DerivativeFields spatial_derivatives(const NoisySnapshot& data,
                                            const FieldSelection& which) {
    return spatial_derivatives(data.data, which);
}

}  // namespace mswave::synth
