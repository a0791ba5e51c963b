#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "mswave/errors.hpp"

namespace mswave {

/// Space-time field sampled on a tensor grid. Spatial points are flattened
/// row-major with x fastest (index ix + nx*iy); each matrix column is one
/// time level. 1-D data leaves the y axis empty.
///
/// The time axis is split into contiguous segments (one per coefficient
/// interval). segment_starts[k] is the time index of segment k's first node;
/// that node is shared with segment k-1 (it is the previous segment's last
/// node), so segment k spans time indices [segment_starts[k], last_k] with
/// last_k = segment_starts[k+1] (or nt-1 for the final segment).
struct Snapshot {
    std::vector<double> x;
    std::vector<double> y;  // empty in 1-D
    std::vector<double> t;
    std::vector<std::size_t> segment_starts{0};
    Eigen::MatrixXd u;  // (nx*ny) rows, nt columns

    bool two_d() const { return !y.empty(); }
    std::size_t nx() const { return x.size(); }
    std::size_t ny() const { return y.empty() ? 1 : y.size(); }
    std::size_t nt() const { return t.size(); }
    std::size_t n_segments() const { return segment_starts.size(); }

    std::size_t space_index(std::size_t ix, std::size_t iy) const { return ix + nx() * iy; }

    /// Inclusive [first, last] time-node range of segment k.
    std::pair<std::size_t, std::size_t> segment_node_range(std::size_t k) const {
        if (k >= segment_starts.size())
            throw ConfigError("segment index " + std::to_string(k) + " out of range");
        const std::size_t first = segment_starts[k];
        const std::size_t last = (k + 1 < segment_starts.size()) ? segment_starts[k + 1] : nt() - 1;
        return {first, last};
    }
};

/// Noisy observation of a Snapshot: same axes, values u + xi with
/// xi ~ N(0, (eta*|u|)^2) drawn independently per sample.
struct NoisySnapshot {
    Snapshot data;
    double eta = 0.0;
    std::uint64_t seed = 0;
};

}  // namespace mswave
