#pragma once

// Dense Lyapunov solvers (Bartels-Stewart on the complex Schur form).

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "statespace.hpp"

namespace invctl {

namespace detail {

/// Solve T Y + Y T^H + Q = 0 for upper-triangular T by column substitution.
inline CMatrix lyap_triangular(const CMatrix& T, const CMatrix& Q) {
    const Eigen::Index n = T.rows();
    CMatrix Y = CMatrix::Zero(n, n);
    for (Eigen::Index j = n - 1; j >= 0; --j) {
        Eigen::VectorXcd rhs = -Q.col(j);
        for (Eigen::Index k = j + 1; k < n; ++k) rhs -= std::conj(T(j, k)) * Y.col(k);
        CMatrix M = T + std::conj(T(j, j)) * CMatrix::Identity(n, n);
        Y.col(j) = M.triangularView<Eigen::Upper>().solve(rhs);
    }
    return Y;
}

} // namespace detail

/// Solve the continuous Lyapunov equation A X + X A' + Q = 0 (Q symmetric).
inline Matrix lyap(const Matrix& A, const Matrix& Q) {
    const Eigen::Index n = A.rows();
    if (n == 0) return Matrix(0, 0);
    Eigen::ComplexSchur<CMatrix> schur(A.cast<Complex>());
    const CMatrix U = schur.matrixU();
    const CMatrix T = schur.matrixT();
    const CMatrix Qt = U.adjoint() * Q.cast<Complex>() * U;
    const CMatrix Y = detail::lyap_triangular(T, Qt);
    const CMatrix X = U * Y * U.adjoint();
    return 0.5 * (X.real() + X.real().transpose());
}

/// Controllability gramian: A Wc + Wc A' + B B' = 0.
inline Matrix gram_ctrl(const StateSpace& sys) {
    if (!is_stable(sys)) throw UnstableSystem("gram_ctrl: system must be stable");
    return lyap(sys.A, sys.B * sys.B.transpose());
}

/// Observability gramian: A' Wo + Wo A + C' C = 0.
inline Matrix gram_obsv(const StateSpace& sys) {
    if (!is_stable(sys)) throw UnstableSystem("gram_obsv: system must be stable");
    return lyap(sys.A.transpose(), sys.C.transpose() * sys.C);
}

} // namespace invctl
