#pragma once

// Structured singular value upper bounds via diagonal D-scalings, the
// NS/NP/RS/RP verification report, and rational D-scale fitting for the
// D-K iteration.

#include <limits>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "norms.hpp"
#include "statespace.hpp"

namespace invctl {

struct MuBlock {
    enum Kind { RealScalar, ComplexScalar, FullComplex };
    Kind kind = ComplexScalar;
    Eigen::Index dim = 1;
};

struct BlockStructure {
    std::vector<MuBlock> blocks;

    Eigen::Index total() const {
        Eigen::Index t = 0;
        for (const MuBlock& b : blocks) t += b.dim;
        return t;
    }
};

/// delta_L, delta_R real scalar blocks (relaxed to complex in the bound).
inline BlockStructure rs_structure() {
    return BlockStructure{{{MuBlock::RealScalar, 1}, {MuBlock::RealScalar, 1}}};
}

/// RS blocks plus the full 2x2 complex performance block of the RP test.
inline BlockStructure rp_structure() {
    return BlockStructure{
        {{MuBlock::RealScalar, 1}, {MuBlock::RealScalar, 1}, {MuBlock::FullComplex, 2}}};
}

namespace detail {

inline double scaled_sigma(const CMatrix& N, const BlockStructure& bs,
                           const std::vector<double>& logd) {
    const Eigen::Index n = N.rows();
    Vector d(n);
    Eigen::Index at = 0;
    for (std::size_t b = 0; b < bs.blocks.size(); ++b) {
        const double v = std::exp(logd[b]);
        for (Eigen::Index k = 0; k < bs.blocks[b].dim; ++k) d(at++) = v;
    }
    CMatrix M = d.asDiagonal() * N * d.cwiseInverse().asDiagonal();
    return sigma_max(M);
}

} // namespace detail

/// min over diagonal scalings D of sigma_max(D N D^{-1}); real blocks are
/// treated as complex, so this stays a valid mu upper bound.
inline double mu_upper_bound(const CMatrix& N, const BlockStructure& bs,
                             double rtol = 1e-4) {
    const Eigen::Index n = N.rows();
    if (n != N.cols() || n != bs.total())
        throw Error("mu_upper_bound: matrix/structure dimension mismatch");
    const std::size_t nb = bs.blocks.size();
    std::vector<double> x(nb, 0.0); // log-scales; last block pinned to 0
    if (nb <= 1) return sigma_max(N);

    auto f = [&](const std::vector<double>& v) { return detail::scaled_sigma(N, bs, v); };
    double fx = f(x);
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < 60; ++sweep) {
        const double before = fx;
        for (std::size_t i = 0; i + 1 < nb; ++i) {
            double lo = x[i] - 9.0, hi = x[i] + 9.0;
            // golden-section on coordinate i
            double a = lo, b = hi;
            double c1 = b - golden * (b - a), c2 = a + golden * (b - a);
            auto eval_at = [&](double v) {
                std::vector<double> y = x;
                y[i] = v;
                return f(y);
            };
            double f1 = eval_at(c1), f2 = eval_at(c2);
            for (int it = 0; it < 80 && (b - a) > 1e-7; ++it) {
                if (f1 <= f2) {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - golden * (b - a);
                    f1 = eval_at(c1);
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + golden * (b - a);
                    f2 = eval_at(c2);
                }
            }
            const double xm = 0.5 * (a + b), fm = eval_at(xm);
            if (fm < fx) {
                x[i] = xm;
                fx = fm;
            }
        }
        if (before - fx <= 0.25 * rtol * std::max(fx, 1e-300)) break;
    }
    return fx;
}

/// Per-frequency optimal log-scalings (one per block, last pinned to 0).
/// `init` warm-starts the search, e.g. from the neighboring grid point.
inline std::vector<double> mu_optimal_scalings(const CMatrix& N,
                                               const BlockStructure& bs,
                                               std::vector<double> init = {}) {
    const std::size_t nb = bs.blocks.size();
    std::vector<double> x = init.size() == nb ? std::move(init)
                                              : std::vector<double>(nb, 0.0);
    x.back() = 0.0;
    if (nb <= 1) return x;
    double fx = detail::scaled_sigma(N, bs, x);
    const double golden = 0.5 * (std::sqrt(5.0) - 1.0);
    for (int sweep = 0; sweep < 60; ++sweep) {
        const double before = fx;
        for (std::size_t i = 0; i + 1 < nb; ++i) {
            double a = x[i] - 9.0, b = x[i] + 9.0;
            auto eval_at = [&](double v) {
                std::vector<double> y = x;
                y[i] = v;
                return detail::scaled_sigma(N, bs, y);
            };
            double c1 = b - golden * (b - a), c2 = a + golden * (b - a);
            double f1 = eval_at(c1), f2 = eval_at(c2);
            for (int it = 0; it < 80 && (b - a) > 1e-7; ++it) {
                if (f1 <= f2) {
                    b = c2;
                    c2 = c1;
                    f2 = f1;
                    c1 = b - golden * (b - a);
                    f1 = eval_at(c1);
                } else {
                    a = c1;
                    c1 = c2;
                    f1 = f2;
                    c2 = a + golden * (b - a);
                    f2 = eval_at(c2);
                }
            }
            const double xm = 0.5 * (a + b), fm = eval_at(xm);
            if (fm < fx) {
                x[i] = xm;
                fx = fm;
            }
        }
        if (before - fx <= 1e-5 * std::max(fx, 1e-300)) break;
    }
    return x;
}

struct MuReport {
    FreqGrid grid;
    std::vector<double> mu_rs;     // per frequency, N_dd with RS structure
    std::vector<double> mu_rp;     // per frequency, full N with RP structure
    std::vector<double> sigma_nzw; // per frequency, performance block
    bool ns = false;
    double np_norm = std::numeric_limits<double>::infinity();
    double rs_peak = 0.0, rp_peak = 0.0;
    double rs_peak_freq = 0.0, rp_peak_freq = 0.0, np_peak_freq = 0.0;

    bool nominal_performance() const { return np_norm < 1.0; }
    bool robust_stability() const { return rs_peak < 1.0; }
    bool robust_performance() const { return rp_peak < 1.0 && ns; }
};

/// Evaluate NS / NP / RS / RP for controller K against the generalized
/// plant P (inputs [wd(2) w(2) u], outputs [zd(2) z(2) y]).
inline MuReport verify_conditions(const StateSpace& P, const StateSpace& K,
                                  const FreqGrid& grid) {
    MuReport rep;
    rep.grid = grid;
    StateSpace N = lower_lft(P, K);
    rep.ns = is_stable(N);
    StateSpace nzw = N.subsystem(2, 2, 2, 2);
    if (rep.ns) {
        rep.np_norm = hinf_norm(nzw);
    } else {
        rep.np_norm = std::numeric_limits<double>::infinity();
    }
    const BlockStructure rs = rs_structure(), rp = rp_structure();
    double np_grid_peak = 0.0;
    for (double w : grid.points) {
        const CMatrix Nw = N.eval_jw(w);
        const double m_rs = mu_upper_bound(Nw.topLeftCorner(2, 2), rs);
        const double m_rp = mu_upper_bound(Nw, rp);
        const double s_np = sigma_max(Nw.bottomRightCorner(2, 2));
        rep.mu_rs.push_back(m_rs);
        rep.mu_rp.push_back(m_rp);
        rep.sigma_nzw.push_back(s_np);
        if (m_rs > rep.rs_peak) {
            rep.rs_peak = m_rs;
            rep.rs_peak_freq = w;
        }
        if (m_rp > rep.rp_peak) {
            rep.rp_peak = m_rp;
            rep.rp_peak_freq = w;
        }
        if (s_np > np_grid_peak) {
            np_grid_peak = s_np;
            rep.np_peak_freq = w;
        }
    }
    if (!rep.ns) rep.np_norm = np_grid_peak; // grid value, still reported
    return rep;
}

// ---------------------------------------------------------------------------
// Rational D-scale fitting: log-magnitude least squares over a product of
// lead-lag sections g * prod (s + z_i)/(s + p_i) with z_i, p_i > 0, which is
// stable, minimum-phase and biproper by construction.

/// Fit a stable, minimum-phase, biproper rational scaling D(s) with
/// |D(j w_k)| ~ d_k; tries orders 0..max_order and returns the best fit by
/// worst-case weighted log-magnitude error. Optional per-point weights let
/// the caller emphasize the frequencies that matter (e.g. near a mu peak).
inline RationalTF fit_dscale(const std::vector<double>& omega,
                             const std::vector<double>& d, int max_order = 4,
                             const std::vector<double>& weight = {}) {
    if (omega.size() != d.size() || omega.empty())
        throw Error("fit_dscale: bad data");
    const std::size_t m = omega.size();
    if (!weight.empty() && weight.size() != m)
        throw Error("fit_dscale: weight size mismatch");
    std::vector<double> y(m), wt(m, 1.0);
    for (std::size_t k = 0; k < m; ++k) y[k] = std::log(std::max(d[k], 1e-300));
    if (!weight.empty())
        for (std::size_t k = 0; k < m; ++k) wt[k] = std::max(weight[k], 0.0);
    const double lw_lo = std::log(omega.front()), lw_hi = std::log(omega.back());

    // order-0 baseline: weighted mean of log d
    double lg0 = 0.0, wsum = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
        lg0 += wt[k] * y[k];
        wsum += wt[k];
    }
    lg0 /= std::max(wsum, 1e-300);

    auto model = [&](const Vector& th, std::size_t k) {
        // th = [ln g, ln z_1.., ln p_1..]; value of ln|D(j w_k)|
        const int r = static_cast<int>((th.size() - 1) / 2);
        const double w2 = omega[k] * omega[k];
        double v = th(0);
        for (int i = 0; i < r; ++i) {
            const double z2 = std::exp(2.0 * th(1 + i));
            const double p2 = std::exp(2.0 * th(1 + r + i));
            v += 0.5 * (std::log(w2 + z2) - std::log(w2 + p2));
        }
        return v;
    };
    auto max_err = [&](const Vector& th) {
        double e = 0.0;
        for (std::size_t k = 0; k < m; ++k)
            e = std::max(e, wt[k] * std::abs(model(th, k) - y[k]));
        return e;
    };

    auto run_lm = [&](Vector th) {
        const int r = static_cast<int>((th.size() - 1) / 2);
        double lambda = 1e-3;
        Vector resid(m);
        Matrix J(m, th.size());
        for (int it = 0; it < 150; ++it) {
            for (std::size_t k = 0; k < m; ++k) {
                const double sw = std::sqrt(wt[k]);
                resid(static_cast<Eigen::Index>(k)) = sw * (model(th, k) - y[k]);
                const double w2 = omega[k] * omega[k];
                J(static_cast<Eigen::Index>(k), 0) = sw;
                for (int i = 0; i < r; ++i) {
                    const double z2 = std::exp(2.0 * th(1 + i));
                    const double p2 = std::exp(2.0 * th(1 + r + i));
                    J(static_cast<Eigen::Index>(k), 1 + i) = sw * z2 / (w2 + z2);
                    J(static_cast<Eigen::Index>(k), 1 + r + i) = -sw * p2 / (w2 + p2);
                }
            }
            const double cost = resid.squaredNorm();
            const Matrix JtJ = J.transpose() * J;
            const Vector g = J.transpose() * resid;
            bool stepped = false;
            for (int sub = 0; sub < 8; ++sub) {
                Matrix H = JtJ + lambda * Matrix::Identity(th.size(), th.size());
                Vector step = H.ldlt().solve(g);
                Vector cand = th - step;
                // keep corners within three decades of the data band
                for (Eigen::Index i = 1; i < cand.size(); ++i)
                    cand(i) = std::clamp(cand(i), lw_lo - 7.0, lw_hi + 7.0);
                double cc = 0.0;
                for (std::size_t k = 0; k < m; ++k) {
                    const double e = model(cand, k) - y[k];
                    cc += wt[k] * e * e;
                }
                if (cc < cost * (1.0 - 1e-12)) {
                    th = cand;
                    lambda = std::max(lambda * 0.3, 1e-10);
                    stepped = true;
                    break;
                }
                lambda *= 10.0;
            }
            if (!stepped) break;
        }
        return th;
    };

    // grow a section at the worst residual of the current fit
    auto grown_init = [&](const Vector& prev) {
        const int r = static_cast<int>((prev.size() - 1) / 2);
        std::size_t kw = 0;
        double worst = -1.0;
        for (std::size_t k = 0; k < m; ++k) {
            const double e = wt[k] * std::abs(model(prev, k) - y[k]);
            if (e > worst) {
                worst = e;
                kw = k;
            }
        }
        const double c = std::log(omega[kw]);
        const double res = y[kw] - model(prev, kw); // want +res more gain at c
        const double h = std::clamp(std::abs(res), 0.2, 2.0);
        Vector th(prev.size() + 2);
        th(0) = prev(0);
        for (int i = 0; i < r; ++i) {
            th(1 + i) = prev(1 + i);
            th(2 + r + i) = prev(1 + r + i);
        }
        // a (s+z)/(s+p) section adds ln(z/p) of gain below its corners; put
        // the boost (or cut, res < 0) locally around c
        th(1 + r) = c + (res > 0 ? h : -h);
        th(2 + 2 * r) = c - (res > 0 ? h : -h);
        th(0) -= 0.0;
        return th;
    };

    Vector best_th = run_lm(Vector::Constant(1, lg0));
    double best_e = max_err(best_th);
    int best_r = 0;
    Vector prev = best_th;
    for (int r = 1; r <= max_order; ++r) {
        // candidate A: previous solution plus one section at the worst error
        Vector thA = run_lm(grown_init(prev));
        // candidate B: staircase matching the end-to-end drop of the data
        Vector thB(1 + 2 * r);
        const double drop = (y.back() - y.front()) / r;
        thB(0) = lg0;
        for (int i = 0; i < r; ++i) {
            const double c = lw_lo + (lw_hi - lw_lo) * (i + 0.5) / r;
            const double h = std::clamp(std::abs(drop) * 0.5, 0.2, 3.0);
            thB(1 + i) = c + (drop < 0 ? h : -h);
            thB(1 + r + i) = c - (drop < 0 ? h : -h);
        }
        thB = run_lm(thB);
        const double eA = max_err(thA), eB = max_err(thB);
        prev = eA <= eB ? thA : thB;
        const double e = std::min(eA, eB);
        if (e < best_e * 0.95) {
            best_e = e;
            best_th = prev;
            best_r = r;
        }
    }

    poly::Coeffs num{std::exp(best_th(0))}, den{1.0};
    for (int i = 0; i < best_r; ++i) {
        num = poly::mul(num, {1.0, std::exp(best_th(1 + i))});
        den = poly::mul(den, {1.0, std::exp(best_th(1 + best_r + i))});
    }
    return RationalTF(num, den);
}

} // namespace invctl
