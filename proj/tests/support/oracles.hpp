#pragma once

// Independent brute-force implementations used to cross-check the library:
// everything here favors the most literal formula over efficiency, so a
// match is evidence the fast routes are right.

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace oracles {

/// L(theta,gamma) = ||y-D theta||^2/s2 + sum theta_i^2/gamma_i
///                  + log det(s2 I + D Gamma D^T), via the explicit n x n
/// determinant. 1e300 when some theta_i != 0 has gamma_i = 0.
inline double dense_loss(const Eigen::VectorXd& theta, const Eigen::VectorXd& gamma,
                         const Eigen::MatrixXd& D, const Eigen::VectorXd& y, double sigma2) {
    const Eigen::Index n = D.rows();
    double value = (y - D * theta).squaredNorm() / sigma2;
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        if (gamma(i) > 0.0)
            value += theta(i) * theta(i) / gamma(i);
        else if (theta(i) != 0.0)
            return 1e300;
    }
    const Eigen::MatrixXd S =
        sigma2 * Eigen::MatrixXd::Identity(n, n) + D * gamma.asDiagonal() * D.transpose();
    return value + std::log(S.determinant());
}

/// c_i = D_i^T (s2 I + D Gamma D^T)^{-1} D_i via the explicit inverse.
inline Eigen::VectorXd dense_c(const Eigen::VectorXd& gamma, const Eigen::MatrixXd& D,
                               double sigma2) {
    const Eigen::Index n = D.rows();
    const Eigen::MatrixXd S =
        sigma2 * Eigen::MatrixXd::Identity(n, n) + D * gamma.asDiagonal() * D.transpose();
    const Eigen::MatrixXd Sinv = S.inverse();
    Eigen::VectorXd c(D.cols());
    for (Eigen::Index i = 0; i < D.cols(); ++i) c(i) = D.col(i).dot(Sinv * D.col(i));
    return c;
}

inline double weighted_l1_objective(const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                                    const Eigen::VectorXd& w, const Eigen::VectorXd& theta) {
    return (y - D * theta).squaredNorm() + 2.0 * w.dot(theta.cwiseAbs());
}

/// Global minimizer of ||y - D theta||^2 + 2 sum_i w_i |theta_i| by
/// enumerating all 3^m sign patterns: on each candidate support solve the
/// stationarity system, then keep the best pattern whose signs and dual
/// feasibility hold. Exact for m small; intended for m <= 8.
inline Eigen::VectorXd brute_force_weighted_l1(const Eigen::MatrixXd& D, const Eigen::VectorXd& y,
                                               const Eigen::VectorXd& w, double feas_tol = 1e-9) {
    const Eigen::Index m = D.cols();
    Eigen::VectorXd best = Eigen::VectorXd::Zero(m);
    double best_obj = weighted_l1_objective(D, y, w, best);

    std::vector<int> sign(m, -1);  // each in {-1, 0, +1}
    const long total = static_cast<long>(std::pow(3.0, static_cast<double>(m)) + 0.5);
    for (long code = 0; code < total; ++code) {
        long rest = code;
        for (Eigen::Index i = 0; i < m; ++i) {
            sign[static_cast<std::size_t>(i)] = static_cast<int>(rest % 3) - 1;
            rest /= 3;
        }
        std::vector<Eigen::Index> support;
        for (Eigen::Index i = 0; i < m; ++i)
            if (sign[static_cast<std::size_t>(i)] != 0) support.push_back(i);
        if (support.empty()) continue;  // the zero vector is the initial candidate

        const Eigen::Index s = static_cast<Eigen::Index>(support.size());
        Eigen::MatrixXd Ds(D.rows(), s);
        Eigen::VectorXd ws(s), ss(s);
        for (Eigen::Index k = 0; k < s; ++k) {
            Ds.col(k) = D.col(support[static_cast<std::size_t>(k)]);
            ws(k) = w(support[static_cast<std::size_t>(k)]);
            ss(k) = sign[static_cast<std::size_t>(support[static_cast<std::size_t>(k)])];
        }
        // Stationarity on the support: Ds^T Ds theta_S = Ds^T y - w_S .* s_S
        const Eigen::MatrixXd G = Ds.transpose() * Ds;
        const Eigen::VectorXd rhs = Ds.transpose() * y - ws.cwiseProduct(ss);
        Eigen::FullPivLU<Eigen::MatrixXd> lu(G);
        if (!lu.isInvertible()) continue;
        const Eigen::VectorXd ts = lu.solve(rhs);

        bool feasible = true;
        for (Eigen::Index k = 0; k < s && feasible; ++k)
            feasible = ts(k) * ss(k) > -feas_tol;  // sign consistency
        if (!feasible) continue;
        Eigen::VectorXd theta = Eigen::VectorXd::Zero(m);
        for (Eigen::Index k = 0; k < s; ++k) theta(support[static_cast<std::size_t>(k)]) = ts(k);
        const Eigen::VectorXd r = y - D * theta;
        for (Eigen::Index i = 0; i < m && feasible; ++i) {
            if (sign[static_cast<std::size_t>(i)] != 0) continue;
            feasible = std::abs(D.col(i).dot(r)) <= w(i) + feas_tol;  // dual feasibility
        }
        if (!feasible) continue;
        const double obj = weighted_l1_objective(D, y, w, theta);
        if (obj < best_obj) {
            best_obj = obj;
            best = theta;
        }
    }
    return best;
}

/// Ordinary least squares via column-pivoted QR.
inline Eigen::VectorXd ols(const Eigen::MatrixXd& D, const Eigen::VectorXd& y) {
    return D.colPivHouseholderQr().solve(y);
}

/// n x m matrix with orthonormal columns: QR of a seeded Gaussian matrix.
inline Eigen::MatrixXd orthonormal_design(Eigen::Index n, Eigen::Index m, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd A(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) A(i, j) = normal(gen);
    const Eigen::HouseholderQR<Eigen::MatrixXd> qr(A);
    return Eigen::MatrixXd(qr.householderQ()) .leftCols(m);
}

/// Seeded dense Gaussian matrix / vector helpers for random instances.
inline Eigen::MatrixXd gaussian_matrix(Eigen::Index n, Eigen::Index m, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd A(n, m);
    for (Eigen::Index j = 0; j < m; ++j)
        for (Eigen::Index i = 0; i < n; ++i) A(i, j) = normal(gen);
    return A;
}

inline Eigen::VectorXd gaussian_vector(Eigen::Index n, unsigned seed) {
    std::mt19937 gen(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::VectorXd v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = normal(gen);
    return v;
}

}  // namespace oracles
