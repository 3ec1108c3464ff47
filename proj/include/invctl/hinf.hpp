#pragma once

// Output-feedback H-infinity synthesis (two-Riccati central controller with
// gamma bisection). The plant maps [w; u] -> [z; y]; the last ncon inputs and
// nmeas outputs are the control/measurement channels.

#include <optional>

#include <Eigen/Dense>

#include "lyap.hpp"
#include "norms.hpp"
#include "riccati.hpp"
#include "statespace.hpp"

namespace invctl {

struct HinfSynthesisResult {
    StateSpace K;
    double gamma = 0.0;
};

namespace detail {

/// Push nonzero z<-w feedthrough rows through a fast first-order lag so the
/// design plant has D11 = 0; the lag corner sits far above the analysis grid.
inline StateSpace regularize_d11(const StateSpace& P, Eigen::Index p1,
                                 Eigen::Index m1, double w_reg) {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < p1; ++i)
        if (P.D.row(i).head(m1).cwiseAbs().maxCoeff() > 0.0) rows.push_back(i);
    if (rows.empty()) return P;
    const Eigen::Index n = P.order(), nf = static_cast<Eigen::Index>(rows.size());
    Matrix A = Matrix::Zero(n + nf, n + nf);
    A.topLeftCorner(n, n) = P.A;
    Matrix B = Matrix::Zero(n + nf, P.ninputs());
    B.topRows(n) = P.B;
    Matrix C = P.C, D = P.D;
    for (Eigen::Index k = 0; k < nf; ++k) {
        const Eigen::Index r = rows[static_cast<std::size_t>(k)];
        A(n + k, n + k) = -w_reg;
        A.row(n + k).head(n) = w_reg * P.C.row(r);
        B.row(n + k) = w_reg * P.D.row(r);
        C.row(r).setZero();
        D.row(r).setZero();
    }
    Matrix Cf = Matrix::Zero(P.noutputs(), n + nf);
    Cf.leftCols(n) = C;
    for (Eigen::Index k = 0; k < nf; ++k)
        Cf(rows[static_cast<std::size_t>(k)], n + k) = 1.0;
    return StateSpace(A, B, Cf, D, P.dt);
}

struct HinfPartition {
    Matrix A, B1, B2, C1, C2, D12, D21, D22;
};

/// Central controller at level gamma, or nullopt when any existence
/// condition fails. Formulas assume D11 = 0 but allow general full-rank
/// D12 / D21 with cross terms.
inline std::optional<StateSpace> central_controller(const HinfPartition& q,
                                                    double gamma) {
    const Eigen::Index n = q.A.rows();
    const double g2i = 1.0 / (gamma * gamma);
    const Matrix R2 = q.D12.transpose() * q.D12;
    const Matrix S2 = q.D21 * q.D21.transpose();
    Eigen::LLT<Matrix> lltR(R2), lltS(S2);
    if (lltR.info() != Eigen::Success || lltS.info() != Eigen::Success)
        return std::nullopt;
    const Matrix R2i = lltR.solve(Matrix::Identity(R2.rows(), R2.rows()));
    const Matrix S2i = lltS.solve(Matrix::Identity(S2.rows(), S2.rows()));

    // state-feedback Riccati
    const Matrix Ax = q.A - q.B2 * R2i * q.D12.transpose() * q.C1;
    const Matrix Qx =
        q.C1.transpose() *
        (Matrix::Identity(q.C1.rows(), q.C1.rows()) - q.D12 * R2i * q.D12.transpose()) *
        q.C1;
    Matrix Hx(2 * n, 2 * n);
    Hx << Ax, g2i * q.B1 * q.B1.transpose() - q.B2 * R2i * q.B2.transpose(), -Qx,
        -Ax.transpose();

    // output-injection Riccati (dual problem)
    const Matrix Ay = q.A.transpose() - q.C2.transpose() * S2i * q.D21 * q.B1.transpose();
    const Matrix Qy =
        q.B1 *
        (Matrix::Identity(q.D21.cols(), q.D21.cols()) -
         q.D21.transpose() * S2i * q.D21) *
        q.B1.transpose();
    Matrix Hy(2 * n, 2 * n);
    Hy << Ay, g2i * q.C1.transpose() * q.C1 - q.C2.transpose() * S2i * q.C2, -Qy,
        -Ay.transpose();

    Matrix X, Y;
    try {
        X = ric(Hx);
        Y = ric(Hy);
    } catch (const Error&) {
        return std::nullopt;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> esx(X), esy(Y);
    const double psd_tol = -1e-8 * (1.0 + std::max(X.norm(), Y.norm()));
    if (esx.eigenvalues().minCoeff() < psd_tol ||
        esy.eigenvalues().minCoeff() < psd_tol)
        return std::nullopt;
    // spectral-radius coupling condition rho(XY) < gamma^2
    Eigen::EigenSolver<Matrix> esxy(X * Y, false);
    if (esxy.eigenvalues().cwiseAbs().maxCoeff() >= gamma * gamma * (1.0 - 1e-10))
        return std::nullopt;

    const Matrix F = -R2i * (q.D12.transpose() * q.C1 + q.B2.transpose() * X);
    const Matrix L = -(q.B1 * q.D21.transpose() + Y * q.C2.transpose()) * S2i;
    const Matrix Z =
        (Matrix::Identity(n, n) - g2i * Y * X).partialPivLu().inverse();
    const Matrix C2h = q.C2 + g2i * q.D21 * q.B1.transpose() * X;
    const Matrix Ak = q.A + g2i * q.B1 * q.B1.transpose() * X + q.B2 * F +
                      Z * L * C2h;
    return StateSpace(Ak, -Z * L, F, Matrix::Zero(F.rows(), q.C2.rows()));
}

} // namespace detail

/// Bisect gamma on [gamma_min, gamma_max]; every accepted level is certified
/// a posteriori (closed loop stable and ||F_l(P, K)||_inf <= gamma).
inline HinfSynthesisResult hinf_synthesize(const StateSpace& P, Eigen::Index nmeas,
                                           Eigen::Index ncon,
                                           double gamma_max = 1e3,
                                           double gamma_min = 1e-3,
                                           double rtol = 1e-3) {
    const Eigen::Index m1 = P.ninputs() - ncon, p1 = P.noutputs() - nmeas;
    if (m1 <= 0 || p1 <= 0)
        throw Error("hinf_synthesize: no disturbance/performance channels");
    StateSpace Pr = detail::regularize_d11(P, p1, m1, 1e7);

    detail::HinfPartition q;
    const Eigen::Index n = Pr.order();
    q.A = Pr.A;
    q.B1 = Pr.B.leftCols(m1);
    q.B2 = Pr.B.rightCols(ncon);
    q.C1 = Pr.C.topRows(p1);
    q.C2 = Pr.C.bottomRows(nmeas);
    q.D12 = Pr.D.topRightCorner(p1, ncon);
    q.D21 = Pr.D.bottomLeftCorner(nmeas, m1);
    q.D22 = Pr.D.bottomRightCorner(nmeas, ncon);

    // epsilon regularization when the rank conditions fail
    Eigen::JacobiSVD<Matrix> s12(q.D12), s21(q.D21);
    const double eps = 1e-8;
    if (s12.singularValues().minCoeff() < eps) {
        Matrix C1a = Matrix::Zero(p1 + ncon, n), D12a = Matrix::Zero(p1 + ncon, ncon);
        C1a.topRows(p1) = q.C1;
        D12a.topRows(p1) = q.D12;
        D12a.bottomRows(ncon) = eps * Matrix::Identity(ncon, ncon);
        q.C1 = C1a;
        q.D12 = D12a;
    }
    if (s21.singularValues().minCoeff() < eps) {
        Matrix B1a = Matrix::Zero(n, m1 + nmeas), D21a = Matrix::Zero(nmeas, m1 + nmeas);
        B1a.leftCols(m1) = q.B1;
        D21a.leftCols(m1) = q.D21;
        D21a.rightCols(nmeas) = eps * Matrix::Identity(nmeas, nmeas);
        q.B1 = B1a;
        q.D21 = D21a;
    }
    const bool augmented =
        q.B1.cols() != m1 || q.C1.rows() != p1; // only affects Riccati data

    auto absorb_d22 = [&](const StateSpace& Kt) {
        if (q.D22.cwiseAbs().maxCoeff() == 0.0) return Kt;
        // u = Kt (y - D22 u)  =>  K = (I + Kt D22)^{-1} Kt
        Matrix E = Matrix::Identity(ncon, ncon) + Kt.D * q.D22;
        Eigen::PartialPivLU<Matrix> lu(E);
        Matrix Ei = lu.inverse();
        Matrix Ak = Kt.A - Kt.B * q.D22 * Ei * Kt.C;
        Matrix Bk = Kt.B - Kt.B * q.D22 * Ei * Kt.D;
        return StateSpace(Ak, Bk, Ei * Kt.C, Ei * Kt.D);
    };
    (void)augmented;

    auto try_gamma = [&](double g) -> std::optional<StateSpace> {
        auto Kt = detail::central_controller(q, g);
        if (!Kt) return std::nullopt;
        StateSpace K = absorb_d22(*Kt);
        try {
            StateSpace cl = lower_lft(Pr, K);
            if (!is_stable(cl)) return std::nullopt;
            if (hinf_norm(cl) > g * (1.0 + 1e-4)) return std::nullopt;
        } catch (const Error&) {
            return std::nullopt;
        }
        return K;
    };

    double lb = gamma_min, ub = gamma_max;
    std::optional<StateSpace> best = try_gamma(ub);
    if (!best)
        throw SynthesisInfeasible("hinf_synthesize: infeasible at gamma_max");
    double best_g = ub;
    while (ub - lb > rtol * lb) {
        const double mid = std::sqrt(lb * ub);
        if (auto K = try_gamma(mid)) {
            best = std::move(K);
            best_g = mid;
            ub = mid;
        } else {
            lb = mid;
        }
    }
    return HinfSynthesisResult{*best, best_g};
}

} // namespace invctl
