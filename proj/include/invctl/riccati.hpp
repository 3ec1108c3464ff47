#pragma once

// Riccati machinery: stabilizing solution via the stable invariant subspace of
// the Hamiltonian, computed from an ordered complex Schur decomposition.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "statespace.hpp"

namespace invctl {

namespace detail {

/// Swap the adjacent diagonal entries (k, k+1) of the upper-triangular T by a
/// unitary similarity; U accumulates the transformation.
inline void schur_swap(CMatrix& T, CMatrix& U, Eigen::Index k) {
    const Complex t11 = T(k, k), t12 = T(k, k + 1), t22 = T(k + 1, k + 1);
    Complex v1 = t12, v2 = t22 - t11;
    const double nrm = std::sqrt(std::norm(v1) + std::norm(v2));
    if (nrm < 1e-300) return; // coincident eigenvalues, nothing to do
    v1 /= nrm;
    v2 /= nrm;
    CMatrix G(2, 2);
    G << v1, -std::conj(v2), v2, std::conj(v1);
    T.block(0, k, k + 2, 2) = T.block(0, k, k + 2, 2) * G;
    T.block(k, k, 2, T.cols() - k) = G.adjoint() * T.block(k, k, 2, T.cols() - k);
    U.middleCols(k, 2) = U.middleCols(k, 2) * G;
    T(k + 1, k) = Complex{0.0, 0.0};
}

} // namespace detail

/// Stabilizing solution X of the Riccati equation associated with the
/// 2n x 2n Hamiltonian H. Requires exactly n open-left-half-plane
/// eigenvalues; throws otherwise.
inline Matrix ric(const Matrix& H, double axis_tol = 1e-8) {
    const Eigen::Index n2 = H.rows();
    if (n2 % 2 != 0 || H.cols() != n2) throw Error("ric: Hamiltonian must be 2n x 2n");
    const Eigen::Index n = n2 / 2;
    Eigen::ComplexSchur<CMatrix> schur(H.cast<Complex>());
    CMatrix T = schur.matrixT();
    CMatrix U = schur.matrixU();

    Eigen::Index n_stable = 0;
    for (Eigen::Index i = 0; i < n2; ++i) {
        // axis proximity judged relative to the eigenvalue's own magnitude,
        // not the (possibly huge) norm of H
        const Complex lam = T(i, i);
        if (std::abs(lam.real()) < axis_tol * std::max(1.0, std::abs(lam)))
            throw Error("ric: Hamiltonian eigenvalue too close to the imaginary axis");
        if (lam.real() < 0) ++n_stable;
    }
    if (n_stable != n)
        throw Error("ric: Hamiltonian has no n-dimensional stable subspace");

    // Bubble stable eigenvalues into the leading positions.
    for (Eigen::Index i = 0; i < n; ++i) {
        Eigen::Index j = i;
        while (j < n2 && T(j, j).real() >= 0) ++j;
        for (; j > i; --j) detail::schur_swap(T, U, j - 1);
    }
    const CMatrix X1 = U.topLeftCorner(n, n);
    const CMatrix X2 = U.bottomLeftCorner(n, n);
    Eigen::FullPivLU<CMatrix> lu(X1);
    if (!lu.isInvertible()) throw Error("ric: singular basis (no Riccati solution)");
    const CMatrix Xc = X2 * lu.inverse();
    const Matrix X = Xc.real();
    return 0.5 * (X + X.transpose());
}

/// Solve A'X + XA - X B R^{-1} B' X + Q = 0 (stabilizing X).
inline Matrix care(const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
    const Eigen::Index n = A.rows();
    const Matrix Ri = R.ldlt().solve(Matrix::Identity(R.rows(), R.cols()));
    Matrix H(2 * n, 2 * n);
    H << A, -B * Ri * B.transpose(), -Q, -A.transpose();
    return ric(H);
}

/// Frobenius-relative residual of the CARE at X.
inline double care_residual(const Matrix& A, const Matrix& B, const Matrix& Q,
                            const Matrix& R, const Matrix& X) {
    const Matrix Ri = R.ldlt().solve(Matrix::Identity(R.rows(), R.cols()));
    const Matrix res =
        A.transpose() * X + X * A - X * B * Ri * B.transpose() * X + Q;
    return res.norm() / std::max(1.0, X.norm());
}

} // namespace invctl
