#pragma once

// Parametric uncertainty modeling for the series R-L admittance 1/(Ls + R):
// interval parameters, Thevenin / load range construction, and the 2x2-block
// upper-LFT realization used by the generalized plant.

#include <cmath>
#include <string>

#include <Eigen/Dense>

#include "errors.hpp"
#include "statespace.hpp"

namespace invctl {

/// Interval parameter p = nominal + half_width * delta, delta in [-1, 1].
struct UncertainParam {
    double nominal = 0.0;
    double half_width = 0.0;

    double lo() const { return nominal - half_width; }
    double hi() const { return nominal + half_width; }
};

inline UncertainParam interval_to_uncertain(double lo, double hi) {
    if (!(hi >= lo) || lo < 0.0)
        throw InvalidInterval("interval_to_uncertain: need hi >= lo >= 0");
    return UncertainParam{0.5 * (hi + lo), 0.5 * (hi - lo)};
}

/// Grid strength specification (short-circuit ratio at the PC bus).
struct GridSpec {
    double scr = 2.0;
    double x_over_r = 5.0;
    double v_pc_nominal = 240.0; // V rms
    double s_base = 1670.0;      // VA
    double omega_n = 2.0 * M_PI * 60.0;
};

struct TheveninNominal {
    double l_th = 0.0; // H
    double r_th = 0.0; // Ohm
    bool weak_grid = false; // scr < 3 regime flag
};

/// |Z_Th| = V^2 / (SCR * S_B); split by the X/R ratio.
inline TheveninNominal grid_thevenin_from_scr(const GridSpec& spec) {
    if (spec.scr <= 0 || spec.x_over_r <= 0 || spec.v_pc_nominal <= 0 ||
        spec.s_base <= 0 || spec.omega_n <= 0)
        throw ConfigError("grid_thevenin_from_scr: all spec fields must be positive");
    const double z = spec.v_pc_nominal * spec.v_pc_nominal / (spec.scr * spec.s_base);
    const double r = z / std::sqrt(1.0 + spec.x_over_r * spec.x_over_r);
    const double l = spec.x_over_r * r / spec.omega_n;
    return TheveninNominal{l, r, spec.scr < 3.0};
}

/// Local load rating; loading_range scales the drawn power (1.0 = rated).
struct LoadSpec {
    double s_rated = 1670.0; // VA
    double p_rated = 1503.0; // W (0.9 pf)
    double q_rated = std::sqrt(1670.0 * 1670.0 - 1503.0 * 1503.0); // var
    double v_n = 240.0;      // V rms
    double omega_n = 2.0 * M_PI * 60.0;
    double loading_min = 0.05;
    double loading_max = 2.0;
};

struct LoadNominal {
    double l_load = 0.0; // H
    double r_load = 0.0; // Ohm
};

/// R = V^2 P / S^2, X = V^2 Q / S^2 for a parallel-equivalent series model
/// drawing (P, Q) at V.
inline LoadNominal load_nominal_from_rating(const LoadSpec& spec) {
    const double s2 = spec.s_rated * spec.s_rated;
    if (s2 <= 0 || spec.v_n <= 0 || spec.omega_n <= 0)
        throw ConfigError("load_nominal_from_rating: invalid rating");
    const double rel =
        std::abs(spec.p_rated * spec.p_rated + spec.q_rated * spec.q_rated - s2) / s2;
    if (rel > 1e-6)
        throw ConfigError("load_nominal_from_rating: P^2 + Q^2 != S^2");
    const double v2 = spec.v_n * spec.v_n;
    const double r = v2 * spec.p_rated / s2;
    const double x = v2 * spec.q_rated / s2;
    return LoadNominal{x / spec.omega_n, r};
}

/// Upper-LFT realization of 1/(sL + R) with L = L0 + wL dL, R = R0 + wR dR,
/// dL, dR in [-1, 1].  Channel order: inputs [w_L, w_R, v], outputs
/// [z_L, z_R, i]; F_U(M, diag(dL, dR)) maps v -> i.
struct MDeltaBlock {
    StateSpace M; // 1 state, 3 inputs, 3 outputs
    UncertainParam Lp;
    UncertainParam Rp;

    /// Perturbed admittance at s for given normalized deltas.
    Complex admittance(Complex s, double dl, double dr) const {
        return 1.0 / (s * (Lp.nominal + Lp.half_width * dl) + Rp.nominal +
                      Rp.half_width * dr);
    }
    /// Nominal admittance transfer function M_22 = 1/(s L0 + R0).
    RationalTF nominal_tf() const {
        return RationalTF({1.0}, {Lp.nominal, Rp.nominal});
    }
};

inline MDeltaBlock build_m_delta(const UncertainParam& Lp, const UncertainParam& Rp) {
    if (Lp.nominal <= 0.0)
        throw ConfigError("build_m_delta: nominal inductance must be positive");
    const double L0 = Lp.nominal, R0 = Rp.nominal;
    const double wL = Lp.half_width, wR = Rp.half_width;
    // State i: L0 di/dt = -R0 i - w_L - w_R + v, where w_* close through
    // w_L = dL z_L, w_R = dR z_R with z_L = wL di/dt, z_R = wR i.
    Matrix A(1, 1), B(1, 3), C(3, 1), D(3, 3);
    A << -R0 / L0;
    B << -1.0 / L0, -1.0 / L0, 1.0 / L0;
    C << -wL * R0 / L0, wR, 1.0;
    D.setZero();
    D.row(0) << -wL / L0, -wL / L0, wL / L0;
    return MDeltaBlock{StateSpace(A, B, C, D), Lp, Rp};
}

} // namespace invctl
