#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "mswave/dictionary.hpp"

namespace mswave::sbl {

using dict::DesignSystem;

// ---------------------------------------------------------------------------
// Sparse Bayesian learning by difference-of-convex iteration.
//
// Model: y = D theta + eps, eps ~ N(0, sigma^2 I_n); every coefficient
// theta_i carries its own prior variance gamma_i >= 0. Minimizing the
// negative log evidence in (theta, gamma) means minimizing
//
//   L(theta, gamma) = ||y - D theta||^2 / sigma^2 + sum_i theta_i^2/gamma_i
//                     + log det(sigma^2 I_n + D Gamma D^T),
//
// where a coefficient may only be nonzero if its gamma is positive (the
// convention theta_i != 0, gamma_i = 0 gets the sentinel value below).
// The first two terms are jointly convex, the log-det is concave in gamma;
// linearizing it at the current gamma gives curvature weights
//
//   c_i = D_i^T (sigma^2 I_n + D Gamma D^T)^{-1} D_i,
//
// and each outer step solves a weighted l1 problem followed by a closed-form
// gamma update:
//
//   theta <- argmin ||y - D theta||^2 + 2 sigma^2 sum_i sqrt(c_i) |theta_i|
//   gamma_i <- |theta_i| / sqrt(c_i).
//
// Majorize-minimize structure makes the loss trace non-increasing; it is
// bounded below by 2 n log sigma, so the iteration always converges to a
// stationary point. On designs with orthonormal columns the converged
// weights satisfy sqrt(c_i) = 2 / (|theta_i| + sqrt(theta_i^2 + 4 sigma^2)).
// ---------------------------------------------------------------------------

/// Loss value returned when a nonzero coefficient has zero prior variance
/// (the "infinitely penalized" boundary of the model).
inline constexpr double kLossSentinel = 1e300;

struct SblConfig {
    /// Fixed noise variance when set; estimated from a ridge fit otherwise.
    std::optional<double> sigma2;
    /// Outer stop: |loss change| <= tol * max(1, |loss|). A converged run then
    /// performs a short fixed polish phase (loss trace and iteration count
    /// unaffected) that settles theta/gamma onto the stationary point; tol = 0
    /// stops only once consecutive loss values are exactly equal.
    double tol = 1e-8;
    int max_iter = 200;
    /// Coordinates whose coefficient is zero and whose prior variance falls
    /// below this floor are permanently retired. Coordinates still carrying a
    /// nonzero coefficient are never retired (that would raise the loss and
    /// break monotone descent). Zero disables retirement, allowing re-entry.
    double gamma_floor = 1e-12;
    /// Inner stop: max coordinate change <= inner_tol * (1 + ||theta||_inf).
    double inner_tol = 1e-12;
    int inner_max_sweeps = 100000;
};

struct SblResult {
    Eigen::VectorXd theta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd c;  // curvature weights at the final gamma
    std::vector<double> loss_trace;
    double kkt = 0.0;
    double sigma2 = 0.0;  // value actually used (fixed or estimated)
    bool converged = false;
    int iterations = 0;
};

/// Negative log evidence L(theta, gamma); kLossSentinel when some
/// theta_i != 0 has gamma_i = 0. Throws NumericalError on indefinite
/// factorizations, ConfigError on negative gamma or sigma2 <= 0.
double loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& gamma, const Eigen::MatrixXd& D,
            const Eigen::VectorXd& y, double sigma2);

/// Curvature weights c_i = D_i^T (sigma^2 I + D Gamma D^T)^{-1} D_i, all i.
/// Uses the support-sized dual factorization when the support is smaller
/// than n, the n x n primal one otherwise; both agree to rounding.
Eigen::VectorXd compute_c(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& D, double sigma2);

/// argmin_theta ||y - D theta||^2 + 2 sum_i w_i |theta_i| by cyclic
/// coordinate descent with soft thresholding. Deterministic: coordinates
/// sweep in index order, so among duplicated columns the lowest index takes
/// the weight. theta0, when given, seeds the iteration. Throws
/// InnerSolverError when the sweep budget runs out.
Eigen::VectorXd solve_weighted_l1(const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                                  const Eigen::VectorXd& w, double inner_tol = 1e-12,
                                  int max_sweeps = 100000,
                                  const Eigen::VectorXd* theta0 = nullptr);

/// sigma^2 estimate ||y - D theta_ridge||^2 / (n - m) from a ridge fit with
/// lambda = 1e-6 * trace(D^T D)/m. Requires n > m (InsufficientSamplesError).
double estimate_noise_variance(const DesignSystem& sys);

/// Full outer iteration on a DesignSystem. Throws NonDecreasingLossError if
/// the loss trace ever rises by more than 1e-10 (it must not).
SblResult run_sbl(const DesignSystem& sys, const SblConfig& cfg);

/// Max stationarity residual of the weighted-l1 optimality system at the
/// result: |D_i^T(D theta - y) + sigma^2 sqrt(c_i) z_i| with z_i = sign or
/// the best subgradient value; c recomputed at result.gamma.
double kkt_residual(const SblResult& result, const DesignSystem& sys, double sigma2);

/// Max deviation max_i | |theta_i|/sqrt(c_i) - gamma_i | with c recomputed
/// at result.gamma; a convergence diagnostic complementing kkt_residual.
double gamma_coupling_residual(const SblResult& result, const DesignSystem& sys, double sigma2);

/// Closed-form fixed-point weights on orthonormal designs:
/// sqrt(c_i) = 2 / (|theta_i| + sqrt(theta_i^2 + 4 sigma^2)); returns c.
/// sigma == 0 with theta_i == 0 throws SingularFixedPointError.
Eigen::VectorXd orthonormal_fixed_point_c(const Eigen::VectorXd& theta, double sigma);

}  // namespace mswave::sbl
