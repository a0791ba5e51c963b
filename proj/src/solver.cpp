#include "mswave/solver.hpp"

#include <cmath>
#include <string>

namespace mswave::solver {

namespace {

constexpr double kDirichletTol = 1e-9;   // |g| allowed at the walls
constexpr double kBlowupGuard = 1e12;    // magnitude treated as divergence
constexpr double kSameDtTol = 1e-12;     // relative dt match for literal restarts

// Local view of a Nonlinearity so the hot loop is a plain switch.
struct NonlinOp {
    enum Kind { None, Sine, Cubic } kind = None;
    double a = 0.0, b = 0.0;

    explicit NonlinOp(const Nonlinearity& f) {
        if (const auto* s = std::get_if<SineTerm>(&f)) {
            kind = Sine;
            a = s->coeff;
            b = s->omega;
        } else if (const auto* c = std::get_if<CubicTerm>(&f)) {
            kind = Cubic;
            a = c->linear;
            b = c->cubic;
        }
    }
    double operator()(double u) const {
        switch (kind) {
            case Sine: return a * std::sin(b * u);
            case Cubic: return a * u + b * u * u * u;
            default: return 0.0;
        }
    }
};

void check_level_finite(const Eigen::VectorXd& level, std::size_t time_index) {
    for (Eigen::Index i = 0; i < level.size(); ++i) {
        const double v = level(i);
        if (!std::isfinite(v) || std::abs(v) > kBlowupGuard)
            throw DivergenceError("solution diverged", time_index);
    }
}

template <class Plan>
void validate_plan(std::span<const Plan> plan) {
    if (plan.empty()) throw ConfigError("march plan has no segments");
    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& p = plan[k];
        if (p.steps < 1)
            throw ConfigError("segment " + std::to_string(k) + " has " +
                              std::to_string(p.steps) + " steps; need at least 1");
        if (!(p.t1 > p.t0))
            throw ConfigError("segment " + std::to_string(k) + " has non-positive length");
        if (!(p.speed2 > 0.0))
            throw ConfigError("segment " + std::to_string(k) + " wave coefficient must be positive, got " +
                              std::to_string(p.speed2));
        if (k > 0 && plan[k - 1].t1 != p.t0)
            throw ConfigError("march plan segments are not contiguous at index " +
                              std::to_string(k));
    }
}

void check_cfl(double speed2, double dt, double inv_h2_sum, std::size_t segment) {
    const double number = std::sqrt(speed2) * dt * std::sqrt(inv_h2_sum);
    if (number > 1.0 + 1e-12)
        throw StabilityError("CFL violated on segment " + std::to_string(segment) +
                             ": sqrt(m)*dt*sqrt(sum 1/h^2) = " + std::to_string(number));
}

}  // namespace

double eval_nonlinearity(const Nonlinearity& f, double u) { return NonlinOp(f)(u); }

std::vector<int> uniform_segment_steps(const MarkovPath& path, double dt) {
    if (!(dt > 0.0)) throw ConfigError("time step must be positive");
    std::vector<int> steps;
    steps.reserve(path.intervals());
    for (std::size_t k = 0; k < path.intervals(); ++k) {
        const double len = path.interval_end(k) - path.interval_begin(k);
        const double ratio = len / dt;
        const double rounded = std::round(ratio);
        if (rounded < 1.0 || std::abs(ratio - rounded) > 1e-9 * std::max(1.0, ratio))
            throw ConfigError("segment " + std::to_string(k) + " length " + std::to_string(len) +
                              " is not an integer multiple of dt = " + std::to_string(dt));
        steps.push_back(static_cast<int>(rounded));
    }
    return steps;
}

Snapshot march_wave_1d(double length, int space_intervals,
                       const std::function<double(double)>& g,
                       const std::function<double(double)>& h,
                       std::span<const SegmentPlan1D> plan) {
    if (!(length > 0.0)) throw ConfigError("domain length must be positive");
    if (space_intervals < 2) throw ConfigError("need at least 2 space intervals");
    if (!g) throw ConfigError("initial profile is required");
    validate_plan(plan);

    const int nx = space_intervals + 1;
    const double dx = length / space_intervals;
    const double inv_dx2 = 1.0 / (dx * dx);

    std::size_t nt = 1;
    for (const auto& p : plan) nt += static_cast<std::size_t>(p.steps);

    Snapshot s;
    s.x.resize(static_cast<std::size_t>(nx));
    for (int i = 0; i < nx; ++i) s.x[static_cast<std::size_t>(i)] = (i == space_intervals) ? length : i * dx;
    s.t.reserve(nt);
    s.u.resize(nx, static_cast<Eigen::Index>(nt));
    s.segment_starts.clear();

    Eigen::VectorXd curr(nx), next(nx);
    for (int i = 0; i < nx; ++i) curr(i) = g(s.x[static_cast<std::size_t>(i)]);
    if (std::abs(curr(0)) > kDirichletTol || std::abs(curr(nx - 1)) > kDirichletTol)
        throw ConfigError("initial profile is not Dirichlet-compatible: |g| at a wall exceeds 1e-9");
    curr(0) = 0.0;
    curr(nx - 1) = 0.0;

    Eigen::VectorXd vel(nx);
    if (h) {
        for (int i = 0; i < nx; ++i) vel(i) = h(s.x[static_cast<std::size_t>(i)]);
    } else {
        vel.setZero();
    }

    s.u.col(0) = curr;
    s.t.push_back(plan[0].t0);

    std::size_t col = 1;    // next column to write
    double prev_dt = 0.0;   // dt of the segment already marched

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& p = plan[k];
        const double dt = (p.t1 - p.t0) / p.steps;
        check_cfl(p.speed2, dt, inv_dx2, k);
        const NonlinOp f(p.f);
        const double lam = p.speed2 * dt * dt * inv_dx2;
        const double dt2 = dt * dt;

        s.segment_starts.push_back(col - 1);

        int j0 = 1;  // first step index still to take within this segment
        const bool same_dt = k > 0 && std::abs(dt - prev_dt) <= kSameDtTol * dt;
        if (k == 0 || !same_dt) {
            if (k > 0) {
                // Reconstruct the velocity at the segment start from the
                // previous segment's levels (second order when possible).
                const auto last = static_cast<Eigen::Index>(col - 1);
                if (plan[k - 1].steps >= 2)
                    vel = (3.0 * s.u.col(last) - 4.0 * s.u.col(last - 1) + s.u.col(last - 2)) /
                          (2.0 * prev_dt);
                else
                    vel = (s.u.col(last) - s.u.col(last - 1)) / prev_dt;
                curr = s.u.col(last);
            }
            // Taylor first step from (curr, vel).
            next(0) = 0.0;
            next(nx - 1) = 0.0;
            for (int i = 1; i < nx - 1; ++i) {
                const double lap = curr(i + 1) - 2.0 * curr(i) + curr(i - 1);
                next(i) = curr(i) + dt * vel(i) + 0.5 * (lam * lap + dt2 * f(curr(i)));
            }
            check_level_finite(next, col);
            s.u.col(static_cast<Eigen::Index>(col)) = next;
            s.t.push_back(p.steps == 1 ? p.t1 : p.t0 + dt);
            ++col;
            j0 = 2;
        }
        // Leapfrog for the remaining steps; previous two levels live in s.u.
        for (int j = j0; j <= p.steps; ++j) {
            const auto c1 = static_cast<Eigen::Index>(col - 1);
            const auto c2 = static_cast<Eigen::Index>(col - 2);
            const double* u1 = s.u.col(c1).data();
            const double* u2 = s.u.col(c2).data();
            next(0) = 0.0;
            next(nx - 1) = 0.0;
            for (int i = 1; i < nx - 1; ++i) {
                const double lap = u1[i + 1] - 2.0 * u1[i] + u1[i - 1];
                next(i) = 2.0 * u1[i] - u2[i] + lam * lap + dt2 * f(u1[i]);
            }
            check_level_finite(next, col);
            s.u.col(static_cast<Eigen::Index>(col)) = next;
            s.t.push_back(j == p.steps ? p.t1 : p.t0 + j * dt);
            ++col;
        }
        prev_dt = dt;
    }
    return s;
}

Snapshot march_wave_2d(int x_intervals, int y_intervals,
                       const std::function<double(double, double)>& g,
                       const std::function<double(double, double)>& h,
                       std::span<const SegmentPlan2D> plan) {
    if (x_intervals < 2 || y_intervals < 2) throw ConfigError("need at least 2 intervals per axis");
    if (!g) throw ConfigError("initial profile is required");
    validate_plan(plan);

    const int nx = x_intervals + 1;
    const int ny = y_intervals + 1;
    const int ns = nx * ny;
    const double dx = M_PI / x_intervals;
    const double dy = M_PI / y_intervals;
    const double inv_dx2 = 1.0 / (dx * dx);
    const double inv_dy2 = 1.0 / (dy * dy);

    std::size_t nt = 1;
    for (const auto& p : plan) nt += static_cast<std::size_t>(p.steps);

    Snapshot s;
    s.x.resize(static_cast<std::size_t>(nx));
    s.y.resize(static_cast<std::size_t>(ny));
    for (int i = 0; i < nx; ++i) s.x[static_cast<std::size_t>(i)] = (i == x_intervals) ? M_PI : i * dx;
    for (int i = 0; i < ny; ++i) s.y[static_cast<std::size_t>(i)] = (i == y_intervals) ? M_PI : i * dy;
    s.t.reserve(nt);
    s.u.resize(ns, static_cast<Eigen::Index>(nt));
    s.segment_starts.clear();

    auto id = [nx](int ix, int iy) { return ix + nx * iy; };

    Eigen::VectorXd curr(ns), next(ns), vel(ns);
    for (int iy = 0; iy < ny; ++iy)
        for (int ix = 0; ix < nx; ++ix)
            curr(id(ix, iy)) = g(s.x[static_cast<std::size_t>(ix)], s.y[static_cast<std::size_t>(iy)]);
    double wall_max = 0.0;
    for (int ix = 0; ix < nx; ++ix)
        wall_max = std::max({wall_max, std::abs(curr(id(ix, 0))), std::abs(curr(id(ix, ny - 1)))});
    for (int iy = 0; iy < ny; ++iy)
        wall_max = std::max({wall_max, std::abs(curr(id(0, iy))), std::abs(curr(id(nx - 1, iy)))});
    if (wall_max > kDirichletTol)
        throw ConfigError("initial profile is not Dirichlet-compatible: |g| at a wall exceeds 1e-9");
    for (int ix = 0; ix < nx; ++ix) curr(id(ix, 0)) = curr(id(ix, ny - 1)) = 0.0;
    for (int iy = 0; iy < ny; ++iy) curr(id(0, iy)) = curr(id(nx - 1, iy)) = 0.0;

    if (h) {
        for (int iy = 0; iy < ny; ++iy)
            for (int ix = 0; ix < nx; ++ix)
                vel(id(ix, iy)) = h(s.x[static_cast<std::size_t>(ix)], s.y[static_cast<std::size_t>(iy)]);
    } else {
        vel.setZero();
    }

    s.u.col(0) = curr;
    s.t.push_back(plan[0].t0);

    std::size_t col = 1;
    double prev_dt = 0.0;

    for (std::size_t k = 0; k < plan.size(); ++k) {
        const auto& p = plan[k];
        const double dt = (p.t1 - p.t0) / p.steps;
        check_cfl(p.speed2, dt, inv_dx2 + inv_dy2, k);
        const double dt2 = dt * dt;
        const double cx = p.speed2 * dt2 * inv_dx2;
        const double cy = p.speed2 * dt2 * inv_dy2;

        s.segment_starts.push_back(col - 1);

        auto forcing_at = [&](int ix, int iy, double t) {
            return p.forcing ? p.forcing(s.x[static_cast<std::size_t>(ix)],
                                         s.y[static_cast<std::size_t>(iy)], t)
                             : 0.0;
        };

        int j0 = 1;
        const bool same_dt = k > 0 && std::abs(dt - prev_dt) <= kSameDtTol * dt;
        if (k == 0 || !same_dt) {
            if (k > 0) {
                const auto last = static_cast<Eigen::Index>(col - 1);
                if (plan[k - 1].steps >= 2)
                    vel = (3.0 * s.u.col(last) - 4.0 * s.u.col(last - 1) + s.u.col(last - 2)) /
                          (2.0 * prev_dt);
                else
                    vel = (s.u.col(last) - s.u.col(last - 1)) / prev_dt;
                curr = s.u.col(last);
            }
            next.setZero();
            for (int iy = 1; iy < ny - 1; ++iy) {
                for (int ix = 1; ix < nx - 1; ++ix) {
                    const int c = id(ix, iy);
                    const double lapx = curr(c + 1) - 2.0 * curr(c) + curr(c - 1);
                    const double lapy = curr(c + nx) - 2.0 * curr(c) + curr(c - nx);
                    next(c) = curr(c) + dt * vel(c) +
                              0.5 * (cx * lapx + cy * lapy + dt2 * forcing_at(ix, iy, p.t0));
                }
            }
            check_level_finite(next, col);
            s.u.col(static_cast<Eigen::Index>(col)) = next;
            s.t.push_back(p.steps == 1 ? p.t1 : p.t0 + dt);
            ++col;
            j0 = 2;
        }
        for (int j = j0; j <= p.steps; ++j) {
            const auto c1 = static_cast<Eigen::Index>(col - 1);
            const auto c2 = static_cast<Eigen::Index>(col - 2);
            const double* u1 = s.u.col(c1).data();
            const double* u2 = s.u.col(c2).data();
            const double tn = s.t[col - 1];
            next.setZero();
            for (int iy = 1; iy < ny - 1; ++iy) {
                for (int ix = 1; ix < nx - 1; ++ix) {
                    const int c = id(ix, iy);
                    const double lapx = u1[c + 1] - 2.0 * u1[c] + u1[c - 1];
                    const double lapy = u1[c + nx] - 2.0 * u1[c] + u1[c - nx];
                    next(c) = 2.0 * u1[c] - u2[c] + cx * lapx + cy * lapy +
                              dt2 * forcing_at(ix, iy, tn);
                }
            }
            check_level_finite(next, col);
            s.u.col(static_cast<Eigen::Index>(col)) = next;
            s.t.push_back(j == p.steps ? p.t1 : p.t0 + j * dt);
            ++col;
        }
        prev_dt = dt;
    }
    return s;
}

namespace {

template <class Grid>
void check_grid_matches_path(const Grid& grid, const MarkovPath& path) {
    if (grid.steps_per_segment.size() != path.intervals())
        throw ConfigError("grid carries " + std::to_string(grid.steps_per_segment.size()) +
                          " segment step counts but the path has " +
                          std::to_string(path.intervals()) + " intervals");
}

}  // namespace

Snapshot solve_wave_1d(const WaveProblem1D& problem, const MarkovPath& path, const Grid1D& grid) {
    check_grid_matches_path(grid, path);
    std::vector<SegmentPlan1D> plan(path.intervals());
    for (std::size_t k = 0; k < path.intervals(); ++k) {
        plan[k].speed2 = path.values[k];
        plan[k].f = problem.nonlinearity;
        plan[k].t0 = path.interval_begin(k);
        plan[k].t1 = path.interval_end(k);
        plan[k].steps = grid.steps_per_segment[k];
    }
    return march_wave_1d(problem.length, grid.space_intervals, problem.initial_profile,
                         problem.initial_velocity, plan);
}

Snapshot solve_wave_2d(const WaveProblem2D& problem, const MarkovPath& path, const Grid2D& grid) {
    check_grid_matches_path(grid, path);
    std::vector<SegmentPlan2D> plan(path.intervals());
    for (std::size_t k = 0; k < path.intervals(); ++k) {
        const double m = path.values[k];
        plan[k].speed2 = m;
        if (problem.forcing)
            plan[k].forcing = [m, &fn = problem.forcing](double x, double y, double t) {
                return fn(x, y, t, m);
            };
        plan[k].t0 = path.interval_begin(k);
        plan[k].t1 = path.interval_end(k);
        plan[k].steps = grid.steps_per_segment[k];
    }
    return march_wave_2d(grid.x_intervals, grid.y_intervals, problem.initial_profile,
                         problem.initial_velocity, plan);
}

double exact_wave2d(double x, double y, double t) {
    return std::exp(-t) * std::sin(x) * std::sin(y);
}

Snapshot exact_solution_2d(const Snapshot& grid_like) {
    if (!grid_like.two_d()) throw ConfigError("exact_solution_2d needs a 2-D grid");
    Snapshot s = grid_like;
    for (std::size_t j = 0; j < s.nt(); ++j)
        for (std::size_t iy = 0; iy < s.ny(); ++iy)
            for (std::size_t ix = 0; ix < s.nx(); ++ix)
                s.u(static_cast<Eigen::Index>(s.space_index(ix, iy)),
                    static_cast<Eigen::Index>(j)) = exact_wave2d(s.x[ix], s.y[iy], s.t[j]);
    return s;
}

}  // namespace mswave::solver
