#pragma once

// Core LTI representations: rational transfer functions, state-space models,
// frequency grids and the interconnection algebra everything else builds on.

#include <algorithm>
#include <cmath>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"
#include "poly.hpp"

namespace invctl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using Complex = std::complex<double>;

constexpr double kStabilityTol = 1e-9;
constexpr double kLoopTol = 1e-10;

// ---------------------------------------------------------------------------
// RationalTF

struct RationalTF {
    poly::Coeffs num;
    poly::Coeffs den;

    RationalTF() : num{0.0}, den{1.0} {}
    RationalTF(poly::Coeffs n, poly::Coeffs d)
        : num(poly::trim(std::move(n))), den(poly::trim(std::move(d))) {
        if (den.empty() || den[0] == 0.0)
            throw Error("RationalTF: denominator must have nonzero leading coefficient");
    }

    static RationalTF constant(double k) { return RationalTF({k}, {1.0}); }

    int num_degree() const { return poly::degree(num); }
    int den_degree() const { return poly::degree(den); }
    bool proper() const { return num_degree() <= den_degree(); }
    bool strictly_proper() const { return num_degree() < den_degree(); }

    Complex eval(Complex s) const { return poly::eval(num, s) / poly::eval(den, s); }
    Complex eval_jw(double w) const { return eval(Complex{0.0, w}); }

    /// Normalize so the denominator is monic.
    RationalTF monic() const {
        const double lead = den[0];
        return RationalTF(poly::scale(num, 1.0 / lead), poly::scale(den, 1.0 / lead));
    }

    RationalTF operator*(const RationalTF& o) const {
        return RationalTF(poly::mul(num, o.num), poly::mul(den, o.den));
    }
    RationalTF operator*(double k) const { return RationalTF(poly::scale(num, k), den); }
    RationalTF operator+(const RationalTF& o) const {
        return RationalTF(poly::add(poly::mul(num, o.den), poly::mul(o.num, den)),
                          poly::mul(den, o.den));
    }
};

// ---------------------------------------------------------------------------
// FreqGrid

struct FreqGrid {
    std::vector<double> points; // rad/s, strictly increasing, all > 0

    static FreqGrid logspace(double w_lo, double w_hi, int n) {
        FreqGrid g;
        g.points.resize(static_cast<std::size_t>(n));
        const double l0 = std::log10(w_lo), l1 = std::log10(w_hi);
        for (int i = 0; i < n; ++i)
            g.points[static_cast<std::size_t>(i)] =
                std::pow(10.0, l0 + (l1 - l0) * i / (n - 1));
        return g;
    }

    /// Default grid: 400 log-spaced points on [1e-1, 1e6] rad/s, densified 5x
    /// within a decade of each frequency in `focus`.
    static FreqGrid standard(const std::vector<double>& focus = {}) {
        FreqGrid base = logspace(1e-1, 1e6, 400);
        std::vector<double> pts = base.points;
        for (double wc : focus) {
            if (wc <= 0) continue;
            FreqGrid dense =
                logspace(std::max(1e-1, wc / std::sqrt(10.0)),
                         std::min(1e6, wc * std::sqrt(10.0)), 200);
            pts.insert(pts.end(), dense.points.begin(), dense.points.end());
        }
        std::sort(pts.begin(), pts.end());
        pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
        FreqGrid g;
        g.points = std::move(pts);
        return g;
    }

    std::size_t size() const { return points.size(); }
};

// ---------------------------------------------------------------------------
// StateSpace

struct StateSpace {
    Matrix A, B, C, D;
    std::optional<double> dt; // sample time; absent => continuous

    StateSpace() : A(0, 0), B(0, 0), C(0, 0), D(0, 0) {}

    StateSpace(Matrix a, Matrix b, Matrix c, Matrix d,
               std::optional<double> sample_time = std::nullopt)
        : A(std::move(a)), B(std::move(b)), C(std::move(c)), D(std::move(d)),
          dt(sample_time) {
        if (A.rows() != A.cols()) throw Error("StateSpace: A must be square");
        if (B.rows() != A.rows()) throw Error("StateSpace: B row mismatch");
        if (C.cols() != A.rows()) throw Error("StateSpace: C column mismatch");
        if (D.rows() != C.rows() || D.cols() != B.cols())
            throw Error("StateSpace: D dimension mismatch");
    }

    static StateSpace gain(const Matrix& d) {
        return StateSpace(Matrix(0, 0), Matrix(0, d.cols()), Matrix(d.rows(), 0), d);
    }
    static StateSpace gain(double k) { return gain(Matrix::Constant(1, 1, k)); }

    Eigen::Index order() const { return A.rows(); }
    Eigen::Index ninputs() const { return B.cols(); }
    Eigen::Index noutputs() const { return C.rows(); }
    bool continuous() const { return !dt.has_value(); }

    Eigen::VectorXcd poles() const {
        if (order() == 0) return Eigen::VectorXcd(0);
        return A.eigenvalues();
    }

    /// Response at a complex point s (or z for discrete systems).
    CMatrix eval(Complex s) const {
        if (order() == 0) return D.cast<Complex>();
        CMatrix res = s * CMatrix::Identity(order(), order()) - A.cast<Complex>();
        Eigen::PartialPivLU<CMatrix> lu(res);
        const CMatrix Bc = B.cast<Complex>();
        const CMatrix X = lu.solve(Bc);
        // LU is backward stable; a large residual (or non-finite X) means s is
        // an eigenvalue of A, not mere ill-conditioning.
        const double resid = (res * X - Bc).norm();
        if (!X.allFinite() || resid > 1e-8 * (res.norm() * X.norm() + Bc.norm()))
            throw SingularResolvent("eval: sI - A singular at s = " +
                                    std::to_string(s.real()) + "+" +
                                    std::to_string(s.imag()) + "j");
        return C.cast<Complex>() * X + D.cast<Complex>();
    }

    /// Frequency response at angular frequency w.
    CMatrix eval_jw(double w) const {
        if (continuous()) return eval(Complex{0.0, w});
        return eval(std::exp(Complex{0.0, w * *dt}));
    }

    /// Select a sub-map by output/input index sets.
    StateSpace subsystem(const std::vector<Eigen::Index>& outs,
                         const std::vector<Eigen::Index>& ins) const {
        Matrix Cs(static_cast<Eigen::Index>(outs.size()), order());
        Matrix Ds(static_cast<Eigen::Index>(outs.size()),
                  static_cast<Eigen::Index>(ins.size()));
        Matrix Bs(order(), static_cast<Eigen::Index>(ins.size()));
        for (std::size_t i = 0; i < outs.size(); ++i) Cs.row(static_cast<Eigen::Index>(i)) = C.row(outs[i]);
        for (std::size_t j = 0; j < ins.size(); ++j) Bs.col(static_cast<Eigen::Index>(j)) = B.col(ins[j]);
        for (std::size_t i = 0; i < outs.size(); ++i)
            for (std::size_t j = 0; j < ins.size(); ++j)
                Ds(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = D(outs[i], ins[j]);
        return StateSpace(A, Bs, Cs, Ds, dt);
    }

    StateSpace subsystem(Eigen::Index out0, Eigen::Index nout, Eigen::Index in0,
                         Eigen::Index nin) const {
        std::vector<Eigen::Index> outs, ins;
        for (Eigen::Index i = 0; i < nout; ++i) outs.push_back(out0 + i);
        for (Eigen::Index j = 0; j < nin; ++j) ins.push_back(in0 + j);
        return subsystem(outs, ins);
    }
};

inline std::vector<CMatrix> freq_response(const StateSpace& sys, const FreqGrid& grid) {
    std::vector<CMatrix> out(grid.size());
    for (std::size_t k = 0; k < grid.size(); ++k) out[k] = sys.eval_jw(grid.points[k]);
    return out;
}

// ---------------------------------------------------------------------------
// Conversions

/// Controllable-canonical realization of a proper SISO transfer function.
inline StateSpace tf_to_ss(const RationalTF& g_in) {
    RationalTF g = g_in.monic();
    if (!g.proper())
        throw ImproperSystem("tf_to_ss: numerator degree exceeds denominator degree");
    const int n = g.den_degree();
    // Pad numerator to n+1 coefficients.
    poly::Coeffs b(static_cast<std::size_t>(n) + 1, 0.0);
    for (std::size_t i = 0; i < g.num.size(); ++i)
        b[b.size() - g.num.size() + i] = g.num[i];
    const double d = b[0]; // feedthrough for biproper systems
    if (n == 0) return StateSpace::gain(d);
    // Frequency-scale s = w0 z (w0 ~ geometric mean of pole magnitudes) so the
    // companion matrix entries stay O(w0); raw coefficients can span ~1e15 and
    // wreck downstream eigenvalue computations.
    const double a_last = std::abs(g.den[static_cast<std::size_t>(n)]);
    double w0 = a_last > 0.0 ? std::pow(a_last, 1.0 / n) : 1.0;
    if (!(w0 > 1e-12) || !std::isfinite(w0)) w0 = 1.0;
    poly::Coeffs at(g.den.size()), bt(b.size());
    double pw = 1.0;
    for (std::size_t i = 0; i < at.size(); ++i) {
        at[i] = g.den[i] / pw;
        bt[i] = b[i] / pw;
        pw *= w0;
    }
    Matrix A = Matrix::Zero(n, n), B = Matrix::Zero(n, 1), C = Matrix::Zero(1, n);
    for (int i = 0; i < n; ++i) A(0, i) = -w0 * at[static_cast<std::size_t>(i) + 1];
    A.block(1, 0, n - 1, n - 1).setIdentity();
    A.block(1, 0, n - 1, n - 1) *= w0;
    B(0, 0) = w0;
    for (int i = 0; i < n; ++i)
        C(0, i) = bt[static_cast<std::size_t>(i) + 1] - d * at[static_cast<std::size_t>(i) + 1];
    Matrix Dm = Matrix::Constant(1, 1, d);
    return StateSpace(A, B, C, Dm);
}

/// SISO transfer function recovery via Faddeev-LeVerrier.
inline RationalTF ss_to_tf(const StateSpace& sys) {
    if (sys.ninputs() != 1 || sys.noutputs() != 1)
        throw Error("ss_to_tf: SISO systems only");
    const Eigen::Index n = sys.order();
    if (n == 0) return RationalTF::constant(sys.D(0, 0));
    // char poly a_0 s^n + ... and C adj(sI-A) B coefficients.
    poly::Coeffs den(static_cast<std::size_t>(n) + 1, 0.0);
    den[0] = 1.0;
    Matrix Mk = Matrix::Identity(n, n);
    poly::Coeffs cnum(static_cast<std::size_t>(n), 0.0);
    for (Eigen::Index k = 0; k < n; ++k) {
        cnum[static_cast<std::size_t>(k)] = (sys.C * Mk * sys.B)(0, 0);
        Matrix AM = sys.A * Mk;
        const double a = -AM.trace() / static_cast<double>(k + 1);
        den[static_cast<std::size_t>(k) + 1] = a;
        Mk = AM + a * Matrix::Identity(n, n);
    }
    const double d = sys.D(0, 0);
    poly::Coeffs num = poly::add(cnum, poly::scale(den, d));
    return RationalTF(num, den);
}

// ---------------------------------------------------------------------------
// Interconnections

/// Block-diagonal (append) composition.
inline StateSpace append(const StateSpace& a, const StateSpace& b) {
    const Eigen::Index na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B = Matrix::Zero(na + nb, a.ninputs() + b.ninputs());
    B.topLeftCorner(na, a.ninputs()) = a.B;
    B.bottomRightCorner(nb, b.ninputs()) = b.B;
    Matrix C = Matrix::Zero(a.noutputs() + b.noutputs(), na + nb);
    C.topLeftCorner(a.noutputs(), na) = a.C;
    C.bottomRightCorner(b.noutputs(), nb) = b.C;
    Matrix D = Matrix::Zero(a.noutputs() + b.noutputs(), a.ninputs() + b.ninputs());
    D.topLeftCorner(a.noutputs(), a.ninputs()) = a.D;
    D.bottomRightCorner(b.noutputs(), b.ninputs()) = b.D;
    return StateSpace(A, B, C, D, a.dt ? a.dt : b.dt);
}

/// y = b(a(u)); output of a feeds b.
inline StateSpace series(const StateSpace& a, const StateSpace& b) {
    if (b.ninputs() != a.noutputs()) throw Error("series: port mismatch");
    const Eigen::Index na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomLeftCorner(nb, na) = b.B * a.C;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B = Matrix::Zero(na + nb, a.ninputs());
    B.topRows(na) = a.B;
    B.bottomRows(nb) = b.B * a.D;
    Matrix C = Matrix::Zero(b.noutputs(), na + nb);
    C.leftCols(na) = b.D * a.C;
    C.rightCols(nb) = b.C;
    Matrix D = b.D * a.D;
    return StateSpace(A, B, C, D, a.dt ? a.dt : b.dt);
}

inline StateSpace parallel(const StateSpace& a, const StateSpace& b) {
    if (a.ninputs() != b.ninputs() || a.noutputs() != b.noutputs())
        throw Error("parallel: port mismatch");
    const Eigen::Index na = a.order(), nb = b.order();
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A;
    A.bottomRightCorner(nb, nb) = b.A;
    Matrix B(na + nb, a.ninputs());
    B.topRows(na) = a.B;
    B.bottomRows(nb) = b.B;
    Matrix C(a.noutputs(), na + nb);
    C.leftCols(na) = a.C;
    C.rightCols(nb) = b.C;
    return StateSpace(A, B, C, a.D + b.D, a.dt ? a.dt : b.dt);
}

/// Feedback loop: forward path a, return path b, u = r + sign*b(y).
/// sign = -1 gives the usual negative feedback a/(1 + a b).
inline StateSpace feedback(const StateSpace& a, const StateSpace& b, int sign = -1) {
    if (a.noutputs() != b.ninputs() || b.noutputs() != a.ninputs())
        throw Error("feedback: port mismatch");
    const double s = static_cast<double>(sign);
    const Eigen::Index na = a.order(), nb = b.order();
    Matrix E = Matrix::Identity(a.ninputs(), a.ninputs()) - s * b.D * a.D;
    Eigen::FullPivLU<Matrix> lu(E);
    lu.setThreshold(kLoopTol);
    if (!lu.isInvertible()) throw IllPosedLoop("feedback: singular algebraic loop");
    Matrix Ei = lu.inverse();
    // u = Ei (r + s b.C xb + s b.D a.C xa)
    Matrix A = Matrix::Zero(na + nb, na + nb);
    A.topLeftCorner(na, na) = a.A + a.B * Ei * s * b.D * a.C;
    A.topRightCorner(na, nb) = a.B * Ei * s * b.C;
    A.bottomLeftCorner(nb, na) = b.B * (a.C + a.D * Ei * s * b.D * a.C);
    A.bottomRightCorner(nb, nb) = b.A + b.B * a.D * Ei * s * b.C;
    Matrix B = Matrix::Zero(na + nb, a.ninputs());
    B.topRows(na) = a.B * Ei;
    B.bottomRows(nb) = b.B * a.D * Ei;
    Matrix C(a.noutputs(), na + nb);
    C.leftCols(na) = a.C + a.D * Ei * s * b.D * a.C;
    C.rightCols(nb) = a.D * Ei * s * b.C;
    Matrix D = a.D * Ei;
    return StateSpace(A, B, C, D, a.dt ? a.dt : b.dt);
}

/// Upper LFT with a constant uncertainty block: closes w1 = Delta * z1 over the
/// first (nz1, nw1) ports of M and returns the map from remaining inputs to
/// remaining outputs, M22 + M21 Delta (I - M11 Delta)^{-1} M12.
inline StateSpace upper_lft(const StateSpace& M, const Matrix& Delta) {
    const Eigen::Index nw1 = Delta.rows(), nz1 = Delta.cols();
    if (nw1 > M.ninputs() || nz1 > M.noutputs())
        throw Error("upper_lft: Delta larger than available ports");
    const Eigen::Index nw2 = M.ninputs() - nw1, nz2 = M.noutputs() - nz1;
    const Matrix D11 = M.D.topLeftCorner(nz1, nw1);
    Matrix E = Matrix::Identity(nz1, nz1) - D11 * Delta;
    Eigen::FullPivLU<Matrix> lu(E);
    lu.setThreshold(kLoopTol);
    if (!lu.isInvertible()) throw SingularLFT("upper_lft: I - M11*Delta singular");
    const Matrix Ei = lu.inverse();
    const Matrix C1 = M.C.topRows(nz1);
    const Matrix B1 = M.B.leftCols(nw1);
    const Matrix G = Delta * Ei; // w1 = G (C1 x + D12 w2)
    const Matrix D12 = M.D.topRightCorner(nz1, nw2);
    Matrix A = M.A + B1 * G * C1;
    Matrix B = M.B.rightCols(nw2) + B1 * G * D12;
    const Matrix C2 = M.C.bottomRows(nz2);
    const Matrix D21 = M.D.bottomLeftCorner(nz2, nw1);
    Matrix C = C2 + D21 * G * C1;
    Matrix D = M.D.bottomRightCorner(nz2, nw2) + D21 * G * D12;
    if (M.order() == 0) return StateSpace::gain(D);
    return StateSpace(A, B, C, D, M.dt);
}

/// Lower LFT: closes the last (ny, nu) ports of P with the controller K
/// (u = K y) and returns the map from the remaining inputs to outputs.
inline StateSpace lower_lft(const StateSpace& P, const StateSpace& K) {
    const Eigen::Index nu = K.noutputs(), ny = K.ninputs();
    if (nu > P.ninputs() || ny > P.noutputs()) throw Error("lower_lft: port mismatch");
    const Eigen::Index nw = P.ninputs() - nu, nz = P.noutputs() - ny;
    const Matrix B1 = P.B.leftCols(nw), B2 = P.B.rightCols(nu);
    const Matrix C1 = P.C.topRows(nz), C2 = P.C.bottomRows(ny);
    const Matrix D11 = P.D.topLeftCorner(nz, nw), D12 = P.D.topRightCorner(nz, nu);
    const Matrix D21 = P.D.bottomLeftCorner(ny, nw), D22 = P.D.bottomRightCorner(ny, nu);
    Matrix E = Matrix::Identity(nu, nu) - K.D * D22;
    Eigen::FullPivLU<Matrix> lu(E);
    lu.setThreshold(kLoopTol);
    if (!lu.isInvertible()) throw IllPosedLoop("lower_lft: singular algebraic loop");
    const Matrix Ei = lu.inverse();
    const Eigen::Index n = P.order(), nk = K.order();
    // u = Ei (K.C xk + K.D C2 x + K.D D21 w)
    Matrix A = Matrix::Zero(n + nk, n + nk);
    A.topLeftCorner(n, n) = P.A + B2 * Ei * K.D * C2;
    A.topRightCorner(n, nk) = B2 * Ei * K.C;
    A.bottomLeftCorner(nk, n) = K.B * (C2 + D22 * Ei * K.D * C2);
    A.bottomRightCorner(nk, nk) = K.A + K.B * D22 * Ei * K.C;
    Matrix B = Matrix::Zero(n + nk, nw);
    B.topRows(n) = B1 + B2 * Ei * K.D * D21;
    B.bottomRows(nk) = K.B * (D21 + D22 * Ei * K.D * D21);
    Matrix C = Matrix::Zero(nz, n + nk);
    C.leftCols(n) = C1 + D12 * Ei * K.D * C2;
    C.rightCols(nk) = D12 * Ei * K.C;
    Matrix D = D11 + D12 * Ei * K.D * D21;
    return StateSpace(A, B, C, D, P.dt ? P.dt : K.dt);
}

// ---------------------------------------------------------------------------
// Stability

inline bool is_stable(const StateSpace& sys, double tol = kStabilityTol) {
    if (sys.order() == 0) return true;
    const Eigen::VectorXcd ev = sys.poles();
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
        if (sys.continuous()) {
            if (ev(i).real() >= -tol) return false;
        } else {
            if (std::abs(ev(i)) >= 1.0 - tol) return false;
        }
    }
    return true;
}

// ---------------------------------------------------------------------------
// Controllability / observability (PBH tests)

inline bool is_stabilizable(const StateSpace& sys, double tol = 1e-8) {
    const Eigen::Index n = sys.order();
    if (n == 0) return true;
    Eigen::EigenSolver<Matrix> es(sys.A, false);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Complex lam = es.eigenvalues()(i);
        const bool bad_mode = sys.continuous() ? (lam.real() >= -kStabilityTol)
                                               : (std::abs(lam) >= 1.0 - kStabilityTol);
        if (!bad_mode) continue;
        CMatrix pencil(n, n + sys.ninputs());
        pencil.leftCols(n) = sys.A.cast<Complex>() - lam * CMatrix::Identity(n, n);
        pencil.rightCols(sys.ninputs()) = sys.B.cast<Complex>();
        Eigen::JacobiSVD<CMatrix> svd(pencil);
        if (svd.singularValues()(n - 1) < tol * svd.singularValues()(0)) return false;
    }
    return true;
}

inline bool is_detectable(const StateSpace& sys, double tol = 1e-8) {
    StateSpace dual(sys.A.transpose(), sys.C.transpose(), sys.B.transpose(),
                    sys.D.transpose(), sys.dt);
    return is_stabilizable(dual, tol);
}

} // namespace invctl
