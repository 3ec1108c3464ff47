#pragma once

// H-infinity norm via the Hamiltonian imaginary-axis-eigenvalue test with
// Boyd-Balakrishnan-Bruinsma-Steinbuch midpoint refinement.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "statespace.hpp"

namespace invctl {

struct HinfResult {
    double norm = 0.0;
    double peak_freq = 0.0; // rad/s
};

inline double sigma_max(const CMatrix& M) {
    if (M.rows() == 0 || M.cols() == 0) return 0.0;
    Eigen::JacobiSVD<CMatrix> svd(M);
    return svd.singularValues()(0);
}

inline HinfResult hinf_norm_detail(const StateSpace& sys, double rel_tol = 1e-7) {
    if (!is_stable(sys)) throw UnstableSystem("hinf_norm: system must be stable");
    if (sys.order() == 0) return {sigma_max(sys.D.cast<Complex>()), 0.0};
    if (!sys.continuous()) {
        // grid fallback for discrete systems
        HinfResult r{0.0, 0.0};
        const int n = 4000;
        for (int i = 0; i <= n; ++i) {
            const double w = M_PI * i / (n * *sys.dt);
            const double s = sigma_max(sys.eval_jw(w));
            if (s > r.norm) {
                r.norm = s;
                r.peak_freq = w;
            }
        }
        return r;
    }

    const Eigen::Index n = sys.order(), m = sys.ninputs(), p = sys.noutputs();
    // Initial lower bound from structured test frequencies.
    std::vector<double> wtest{0.0};
    const Eigen::VectorXcd pl = sys.poles();
    for (Eigen::Index i = 0; i < n; ++i) {
        const double wi = std::abs(pl(i).imag());
        if (wi > 0) wtest.push_back(wi);
        wtest.push_back(std::abs(pl(i)));
    }
    double lb = sigma_max(sys.D.cast<Complex>());
    double wpeak = 1e12; // sigma_max(D) is the response at w -> inf
    for (double w : wtest) {
        const double s = sigma_max(sys.eval_jw(w));
        if (s > lb) {
            lb = s;
            wpeak = w;
        }
    }
    if (lb == 0.0) return {0.0, 0.0};

    for (int iter = 0; iter < 60; ++iter) {
        const double gamma = lb * (1.0 + 2.0 * rel_tol);
        const Matrix R = gamma * gamma * Matrix::Identity(m, m) -
                         sys.D.transpose() * sys.D;
        Eigen::FullPivLU<Matrix> lu(R);
        if (!lu.isInvertible()) throw Error("hinf_norm: gamma*I - D'D singular");
        const Matrix Ri = lu.inverse();
        const Matrix Abar = sys.A + sys.B * Ri * sys.D.transpose() * sys.C;
        Matrix H(2 * n, 2 * n);
        H << Abar, sys.B * Ri * sys.B.transpose(),
            -sys.C.transpose() *
                (Matrix::Identity(p, p) + sys.D * Ri * sys.D.transpose()) * sys.C,
            -Abar.transpose();
        Eigen::EigenSolver<Matrix> es(H, false);
        std::vector<double> wi;
        const double scale = std::max(1.0, H.norm());
        for (Eigen::Index i = 0; i < 2 * n; ++i) {
            const Complex lam = es.eigenvalues()(i);
            if (std::abs(lam.real()) < 1e-9 * scale && lam.imag() > 0)
                wi.push_back(lam.imag());
        }
        if (wi.empty()) return {lb * (1.0 + rel_tol), wpeak};
        std::sort(wi.begin(), wi.end());
        std::vector<double> mids;
        for (std::size_t k = 0; k + 1 < wi.size(); ++k)
            mids.push_back(0.5 * (wi[k] + wi[k + 1]));
        if (mids.empty()) mids.push_back(wi[0]);
        bool improved = false;
        for (double w : mids) {
            const double s = sigma_max(sys.eval_jw(w));
            if (s > lb) {
                lb = s;
                wpeak = w;
                improved = true;
            }
        }
        if (!improved) return {lb * (1.0 + rel_tol), wpeak};
    }
    return {lb, wpeak};
}

inline double hinf_norm(const StateSpace& sys) { return hinf_norm_detail(sys).norm; }

} // namespace invctl
