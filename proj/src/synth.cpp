#include "mswave/synth.hpp"

#include <cmath>
#include <string>

#include "mswave/rng.hpp"

namespace mswave::synth {

namespace {

constexpr double kCleanThreshold = 1e-12;  // |u| below this gets zero noise std
constexpr double kAxisTol = 1e-9;          // relative non-uniformity allowed per axis

double uniform_spacing(const std::vector<double>& axis, const char* name) {
    if (axis.size() < 3)
        throw SegmentTooShortError(std::string(name) + " axis has fewer than 3 nodes");
    const double h = axis[1] - axis[0];
    if (!(h > 0.0)) throw ConfigError(std::string(name) + " axis is not increasing");
    for (std::size_t i = 2; i < axis.size(); ++i)
        if (std::abs((axis[i] - axis[i - 1]) - h) > kAxisTol * std::max(1.0, std::abs(h)))
            throw ConfigError(std::string(name) + " axis spacing is not uniform near index " +
                              std::to_string(i));
    return h;
}

}  // namespace

NoisySnapshot add_noise(const Snapshot& clean, double eta, std::uint64_t seed) {
    if (eta < 0.0) throw ConfigError("noise level eta must be non-negative");
    NoisySnapshot out{clean, eta, seed};
    Rng rng(seed);
    auto& u = out.data.u;
    // One draw per sample in storage order, regardless of magnitude, so the
    // stream stays aligned with reference implementations.
    for (Eigen::Index j = 0; j < u.cols(); ++j) {
        for (Eigen::Index i = 0; i < u.rows(); ++i) {
            const double z = rng.normal();
            const double mag = std::abs(u(i, j));
            const double sd = (mag < kCleanThreshold) ? 0.0 : eta * mag;
            u(i, j) += sd * z;
        }
    }
    return out;
}

DerivativeFields compute_fields(const Snapshot& data, const FieldSelection& which,
                                int smooth_window) {
    const bool two_d = data.two_d();
    if (!two_d && (which.uy || which.uyy || which.lap))
        throw ConfigError("y-derivatives and lap(u) require 2-D data");
    if (smooth_window < 0 || (smooth_window > 1 && smooth_window % 2 == 0))
        throw ConfigError("smooth_window must be 0 (off) or an odd width");

    const double dx = uniform_spacing(data.x, "x");
    const double dy = two_d ? uniform_spacing(data.y, "y") : 0.0;
    const int nx = static_cast<int>(data.nx());
    const int ny = static_cast<int>(data.ny());

    DerivativeFields out;
    out.two_d = two_d;
    out.x = data.x;
    out.y = data.y;
    out.t = data.t;
    out.segments.reserve(data.n_segments());

    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_2dx = 1.0 / (2.0 * dx);
    const double inv_dy2 = two_d ? 1.0 / (dy * dy) : 0.0;
    const double inv_2dy = two_d ? 1.0 / (2.0 * dy) : 0.0;

    for (std::size_t k = 0; k < data.n_segments(); ++k) {
        const auto [first, last] = data.segment_node_range(k);
        const auto count = last - first + 1;
        if (count < 3)
            throw SegmentTooShortError("segment " + std::to_string(k) + " starting at t = " +
                                       std::to_string(data.t[first]) + " has only " +
                                       std::to_string(count) + " time levels; need 3");
        const double dt = data.t[first + 1] - data.t[first];
        if (!(dt > 0.0)) throw ConfigError("time axis is not increasing in segment " + std::to_string(k));
        for (std::size_t j = first + 1; j <= last; ++j)
            if (std::abs((data.t[j] - data.t[j - 1]) - dt) > kAxisTol * std::max(1.0, dt))
                throw ConfigError("time spacing is not uniform inside segment " + std::to_string(k));

        // Work on a copy of the segment's levels; optional moving average
        // along time (segment-local, clipped at the segment ends).
        Eigen::MatrixXd block = data.u.middleCols(static_cast<Eigen::Index>(first),
                                                  static_cast<Eigen::Index>(count));
        if (smooth_window > 1) {
            const int hw = smooth_window / 2;
            Eigen::MatrixXd smoothed(block.rows(), block.cols());
            for (Eigen::Index j = 0; j < block.cols(); ++j) {
                const Eigen::Index lo = std::max<Eigen::Index>(0, j - hw);
                const Eigen::Index hi = std::min<Eigen::Index>(block.cols() - 1, j + hw);
                smoothed.col(j) =
                    block.middleCols(lo, hi - lo + 1).rowwise().mean();
            }
            block = std::move(smoothed);
        }

        SegmentFieldBlock seg;
        seg.segment = static_cast<int>(k);
        seg.t_begin = data.t[first];
        seg.t_end = data.t[last];
        seg.dt = dt;

        const int jt_lo = static_cast<int>(first) + 1;
        const int jt_hi = static_cast<int>(last) - 1;
        const int iy_lo = two_d ? 1 : 0;
        const int iy_hi = two_d ? ny - 2 : 0;
        const std::size_t n = static_cast<std::size_t>(jt_hi - jt_lo + 1) *
                              static_cast<std::size_t>(iy_hi - iy_lo + 1) *
                              static_cast<std::size_t>(nx - 2);
        seg.coords.reserve(n);
        seg.u.resize(static_cast<Eigen::Index>(n));
        auto maybe_resize = [n](Eigen::VectorXd& v, bool on) {
            if (on) v.resize(static_cast<Eigen::Index>(n));
        };
        maybe_resize(seg.u_tt, which.utt);
        maybe_resize(seg.u_x, which.ux);
        maybe_resize(seg.u_xx, which.uxx);
        maybe_resize(seg.u_y, which.uy);
        maybe_resize(seg.u_yy, which.uyy);
        maybe_resize(seg.lap, which.lap);

        const double inv_dt2 = 1.0 / (dt * dt);
        std::size_t s = 0;
        for (int jt = jt_lo; jt <= jt_hi; ++jt) {
            const Eigen::Index jl = jt - static_cast<int>(first);  // local column
            const double* c0 = block.col(jl).data();
            const double* cm = block.col(jl - 1).data();
            const double* cp = block.col(jl + 1).data();
            for (int iy = iy_lo; iy <= iy_hi; ++iy) {
                for (int ix = 1; ix <= nx - 2; ++ix) {
                    const int c = ix + nx * iy;
                    const double uc = c0[c];
                    seg.u(static_cast<Eigen::Index>(s)) = uc;
                    if (which.utt)
                        seg.u_tt(static_cast<Eigen::Index>(s)) =
                            (cp[c] - 2.0 * uc + cm[c]) * inv_dt2;
                    double d2x = 0.0, d2y = 0.0;
                    if (which.uxx || which.lap)
                        d2x = (c0[c + 1] - 2.0 * uc + c0[c - 1]) * inv_dx2;
                    if (which.ux)
                        seg.u_x(static_cast<Eigen::Index>(s)) = (c0[c + 1] - c0[c - 1]) * inv_2dx;
                    if (which.uxx) seg.u_xx(static_cast<Eigen::Index>(s)) = d2x;
                    if (two_d) {
                        if (which.uyy || which.lap)
                            d2y = (c0[c + nx] - 2.0 * uc + c0[c - nx]) * inv_dy2;
                        if (which.uy)
                            seg.u_y(static_cast<Eigen::Index>(s)) =
                                (c0[c + nx] - c0[c - nx]) * inv_2dy;
                        if (which.uyy) seg.u_yy(static_cast<Eigen::Index>(s)) = d2y;
                        if (which.lap) seg.lap(static_cast<Eigen::Index>(s)) = d2x + d2y;
                    }
                    seg.coords.push_back(SampleCoord{ix, iy, jt});
                    ++s;
                }
            }
        }
        out.segments.push_back(std::move(seg));
    }
    return out;
}

std::vector<Eigen::VectorXd> second_time_derivative(const Snapshot& data) {
    FieldSelection sel;
    sel.utt = true;
    auto fields = compute_fields(data, sel);
    std::vector<Eigen::VectorXd> out;
    out.reserve(fields.segments.size());
    for (auto& seg : fields.segments) out.push_back(std::move(seg.u_tt));
    return out;
}

DerivativeFields spatial_derivatives(const Snapshot& data, const FieldSelection& which) {
    FieldSelection sel = which;
    sel.utt = false;
    return compute_fields(data, sel);
}

}  // namespace mswave::synth
