#pragma once

#include <functional>
#include <span>
#include <variant>
#include <vector>

#include "mswave/snapshot.hpp"
#include "mswave/switching.hpp"

namespace mswave::solver {

using switching::MarkovPath;

// ---------------------------------------------------------------------------
// Explicit leapfrog for  u_tt = m(t) * (u_xx [+ u_yy]) + f(u) [+ F(x,y,t)]
// on a rectangle with homogeneous Dirichlet walls. m(t) is piecewise
// constant along a MarkovPath; the march restarts at every jump with the
// new coefficient, carrying the last computed level bit-for-bit and the
// discrete velocity, so u and u_t stay continuous across jumps.
//
// Scheme (per segment, uniform step dt):
//   u^{n+1} = 2 u^n - u^{n-1} + dt^2 [ m * Lap_h u^n + f(u^n) + F(t_n) ]
// first step from rest data (g, h) by the Taylor expansion
//   u^1 = u^0 + dt*h + dt^2/2 * [ m * Lap_h u^0 + f(u^0) + F(0) ].
// Stability: sqrt(m) * dt * sqrt(1/dx^2 (+ 1/dy^2)) <= 1 per segment.
// ---------------------------------------------------------------------------

/// f(u) = coeff * sin(omega * u)
struct SineTerm {
    double coeff = -1.0;
    double omega = 1.0;
};
/// f(u) = linear * u + cubic * u^3
struct CubicTerm {
    double linear = -1.0;
    double cubic = -1.0;
};
using Nonlinearity = std::variant<std::monostate, SineTerm, CubicTerm>;

double eval_nonlinearity(const Nonlinearity& f, double u);

struct WaveProblem1D {
    double length = 1.0;
    Nonlinearity nonlinearity{};  // monostate = linear wave equation
    std::function<double(double)> initial_profile;   // g(x); Dirichlet-compatible
    std::function<double(double)> initial_velocity;  // h(x); null = at rest
};

/// 2-D problems live on the fixed square [0,pi]^2 and carry a forcing term
/// F(x, y, t, m) that may depend on the current coefficient value.
struct WaveProblem2D {
    std::function<double(double, double, double, double)> forcing;  // (x,y,t,m)
    std::function<double(double, double)> initial_profile;
    std::function<double(double, double)> initial_velocity;
};

/// Spatial resolution plus per-segment time step counts. Segment k of the
/// path is marched with dt_k = (segment length) / steps_per_segment[k];
/// steps_per_segment.size() must equal the path's interval count.
struct Grid1D {
    int space_intervals = 0;
    std::vector<int> steps_per_segment;
};
struct Grid2D {
    int x_intervals = 0;
    int y_intervals = 0;
    std::vector<int> steps_per_segment;
};

/// Step counts for a globally uniform dt: every segment length must be an
/// integer multiple of dt (within 1e-9 relative), else ConfigError.
std::vector<int> uniform_segment_steps(const MarkovPath& path, double dt);

Snapshot solve_wave_1d(const WaveProblem1D& problem, const MarkovPath& path, const Grid1D& grid);
Snapshot solve_wave_2d(const WaveProblem2D& problem, const MarkovPath& path, const Grid2D& grid);

// Chained-segment march cores. solve_wave_* wrap these; they are exposed so
// a field can be rebuilt from *estimated* per-segment coefficients too.
struct SegmentPlan1D {
    double speed2 = 1.0;  // coefficient multiplying u_xx
    Nonlinearity f{};
    double t0 = 0.0, t1 = 0.0;
    int steps = 0;
};
struct SegmentPlan2D {
    double speed2 = 1.0;
    std::function<double(double, double, double)> forcing;  // (x,y,t), may be null
    double t0 = 0.0, t1 = 0.0;
    int steps = 0;
};

Snapshot march_wave_1d(double length, int space_intervals,
                       const std::function<double(double)>& g,
                       const std::function<double(double)>& h,
                       std::span<const SegmentPlan1D> plan);
Snapshot march_wave_2d(int x_intervals, int y_intervals,
                       const std::function<double(double, double)>& g,
                       const std::function<double(double, double)>& h,
                       std::span<const SegmentPlan2D> plan);

/// Closed-form reference for the forced 2-D benchmark: u = e^{-t} sin x sin y.
double exact_wave2d(double x, double y, double t);
/// Same field evaluated on another snapshot's axes.
Snapshot exact_solution_2d(const Snapshot& grid_like);

}  // namespace mswave::solver
