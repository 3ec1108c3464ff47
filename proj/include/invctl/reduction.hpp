#pragma once

// Balanced truncation (square-root method) and bilinear discretization.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "lyap.hpp"
#include "statespace.hpp"

namespace invctl {

struct BalancedResult {
    StateSpace reduced;
    std::vector<double> hankel_values; // full set, descending
};

namespace detail {

/// Symmetric PSD square-root factor X = L L' (eigenvalue clipping).
inline Matrix psd_factor(const Matrix& X) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(X);
    Vector lam = es.eigenvalues().cwiseMax(0.0);
    return es.eigenvectors() * lam.cwiseSqrt().asDiagonal();
}

} // namespace detail

inline BalancedResult balanced_truncate(const StateSpace& sys, Eigen::Index order) {
    if (!is_stable(sys)) throw UnstableSystem("balanced_truncate: system must be stable");
    const Eigen::Index n = sys.order();
    if (order > n) throw OrderTooLarge("balanced_truncate: order exceeds state dimension");
    if (n == 0 || order == n) {
        BalancedResult r{sys, {}};
        if (n > 0) {
            const Matrix Lc = detail::psd_factor(gram_ctrl(sys));
            const Matrix Lo = detail::psd_factor(gram_obsv(sys));
            Eigen::JacobiSVD<Matrix> svd(Lo.transpose() * Lc);
            for (Eigen::Index i = 0; i < n; ++i)
                r.hankel_values.push_back(svd.singularValues()(i));
        }
        return r;
    }
    const Matrix Lc = detail::psd_factor(gram_ctrl(sys));
    const Matrix Lo = detail::psd_factor(gram_obsv(sys));
    Eigen::JacobiSVD<Matrix> svd(Lo.transpose() * Lc,
                                 Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vector sv = svd.singularValues();
    BalancedResult result;
    for (Eigen::Index i = 0; i < n; ++i) result.hankel_values.push_back(sv(i));

    const Eigen::Index r = order;
    Vector sr = sv.head(r);
    const double floor_sv = std::max(sv(0) * 1e-13, 1e-300);
    for (Eigen::Index i = 0; i < r; ++i) sr(i) = std::max(sr(i), floor_sv);
    const Vector si = sr.cwiseSqrt().cwiseInverse();
    const Matrix T = Lc * svd.matrixV().leftCols(r) * si.asDiagonal();
    const Matrix Ti = si.asDiagonal() * svd.matrixU().leftCols(r).transpose() *
                      Lo.transpose();
    result.reduced = StateSpace(Ti * sys.A * T, Ti * sys.B, sys.C * T, sys.D, sys.dt);
    return result;
}

/// Tustin map s = 2 fs (z-1)/(z+1).
inline StateSpace bilinear_discretize(const StateSpace& sys, double fs) {
    if (!sys.continuous()) throw Error("bilinear_discretize: system already discrete");
    if (fs <= 0) throw Error("bilinear_discretize: fs must be positive");
    const double T = 1.0 / fs, h = T / 2.0;
    const Eigen::Index n = sys.order();
    if (n == 0) return StateSpace(sys.A, sys.B, sys.C, sys.D, T);
    Matrix E = Matrix::Identity(n, n) - h * sys.A;
    Eigen::FullPivLU<Matrix> lu(E);
    lu.setThreshold(1e-12);
    if (!lu.isInvertible())
        throw PoleAtMappingSingularity("bilinear_discretize: pole at s = 2 fs");
    const Matrix Ei = lu.inverse();
    const Matrix Ad = Ei * (Matrix::Identity(n, n) + h * sys.A);
    const Matrix Bd = Ei * sys.B * T;
    const Matrix Cd = sys.C * Ei;
    const Matrix Dd = sys.D + h * sys.C * Ei * sys.B;
    return StateSpace(Ad, Bd, Cd, Dd, T);
}

} // namespace invctl
