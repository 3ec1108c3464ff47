#pragma once

// Open-loop inverter models (current-source / voltage-source duals) and the
// 5x5 generalized plant assembled from filter, uncertain admittance and
// performance weights.

#include <vector>

#include "network.hpp"
#include "statespace.hpp"
#include "uncertainty.hpp"

namespace invctl {

enum class Mode { GFL, GFM };

struct FilterParams {
    double l_f = 2e-3;   // H
    double r_f = 0.2;    // Ohm
    double c_f = 20e-6;  // F

    void validate() const {
        if (l_f <= 0 || r_f <= 0 || c_f <= 0)
            throw ConfigError("FilterParams: all values must be strictly positive");
    }
};

/// G1 = 1 / (Lf Cf s^2 + Rf Cf s + 1): v_inv -> v_O with i_O grounded.
inline RationalTF filter_g1(const FilterParams& f) {
    f.validate();
    return RationalTF({1.0}, {f.l_f * f.c_f, f.r_f * f.c_f, 1.0});
}

/// G2 = (Lf s + Rf) / (Lf Cf s^2 + Rf Cf s + 1): i_O -> -v_O contribution.
inline RationalTF filter_g2(const FilterParams& f) {
    f.validate();
    return RationalTF({f.l_f, f.r_f}, {f.l_f * f.c_f, f.r_f * f.c_f, 1.0});
}

struct GflOpenLoop {
    RationalTF g_inv; // v_inv -> i_O
    RationalTF g_th;  // v_Th -> -i_O contribution
};

/// Current-control plant: LCL filter against a Thevenin branch (L_Th, R_Th).
inline GflOpenLoop gfl_open_loop(const FilterParams& f, double l_th, double r_th) {
    f.validate();
    if (l_th <= 0 || r_th <= 0)
        throw ConfigError("gfl_open_loop: Thevenin parameters must be positive");
    poly::Coeffs den{f.c_f * f.l_f * l_th, f.c_f * (l_th * f.r_f + f.l_f * r_th),
                     f.c_f * f.r_f * r_th + f.l_f + l_th, f.r_f + r_th};
    RationalTF g_inv({1.0}, den);
    RationalTF g_th = RationalTF({f.c_f * f.l_f, f.c_f * f.r_f, 1.0}, {1.0}) * g_inv;
    return GflOpenLoop{g_inv, g_th};
}

struct GfmOpenLoop {
    RationalTF g_inv;  // v_inv -> v_O
    RationalTF g_load; // i_h -> -v_O contribution
    RationalTF g1;
    RationalTF g2;
};

/// Voltage-control plant: LC filter loaded by a series R-L branch.
inline GfmOpenLoop gfm_open_loop(const FilterParams& f, double l_load, double r_load) {
    f.validate();
    if (l_load <= 0 || r_load <= 0)
        throw ConfigError("gfm_open_loop: load parameters must be positive");
    poly::Coeffs den{f.c_f * f.l_f * l_load, f.c_f * (l_load * f.r_f + f.l_f * r_load),
                     f.c_f * f.r_f * r_load + f.l_f + l_load, f.r_f + r_load};
    RationalTF g_inv({l_load, r_load}, den);
    RationalTF g_load =
        RationalTF({l_load * f.l_f, l_load * f.r_f + f.l_f * r_load, r_load * f.r_f},
                   {l_load, r_load}) *
        g_inv;
    return GfmOpenLoop{g_inv, g_load, filter_g1(f), filter_g2(f)};
}

/// Frequency of the largest magnitude of tf on [w_lo, w_hi] (log grid plus
/// local refinement); used to place the resonance peak of W_S.
inline double resonant_frequency(const RationalTF& tf, double w_lo = 100.0,
                                 double w_hi = 1e6) {
    double best_w = w_lo, best_m = 0.0;
    FreqGrid coarse = FreqGrid::logspace(w_lo, w_hi, 2000);
    for (double w : coarse.points) {
        const double m = std::abs(tf.eval_jw(w));
        if (m > best_m) {
            best_m = m;
            best_w = w;
        }
    }
    // refine around the coarse winner
    FreqGrid fine = FreqGrid::logspace(best_w / 1.02, best_w * 1.02, 400);
    for (double w : fine.points) {
        const double m = std::abs(tf.eval_jw(w));
        if (m > best_m) {
            best_m = m;
            best_w = w;
        }
    }
    return best_w;
}

/// Generalized plant: inputs [w_d1 w_d2 | ref dist | u], outputs
/// [z_d1 z_d2 | z_S z_CS | y=e].
struct GeneralizedPlant {
    StateSpace P;
    Mode mode = Mode::GFL;
    double w_l = 0.0; // uncertainty half-widths, kept for channel scaling
    double w_r = 0.0;

    static constexpr Eigen::Index n_wd = 2, n_w = 2, n_u = 1;
    static constexpr Eigen::Index n_zd = 2, n_z = 2, n_y = 1;

    StateSpace p_dd() const { return P.subsystem(0, 2, 0, 2); }
    StateSpace p_dw() const { return P.subsystem(0, 2, 2, 2); }
    StateSpace p_du() const { return P.subsystem(0, 2, 4, 1); }
    StateSpace p_zd() const { return P.subsystem(2, 2, 0, 2); }
    StateSpace p_zw() const { return P.subsystem(2, 2, 2, 2); }
    StateSpace p_zu() const { return P.subsystem(2, 2, 4, 1); }
    StateSpace p_yd() const { return P.subsystem(4, 1, 0, 2); }
    StateSpace p_yw() const { return P.subsystem(4, 1, 2, 2); }
    StateSpace p_yu() const { return P.subsystem(4, 1, 4, 1); }
};

namespace detail {

inline StateSpace weight_ss(const RationalTF& tf, const char* name) {
    for (Complex p : poly::roots(tf.den))
        if (p.real() >= -kStabilityTol)
            throw UnstableWeight(std::string("assemble_generalized_plant: ") + name +
                                 " weight is not stable");
    return tf_to_ss(tf);
}

} // namespace detail

inline GeneralizedPlant assemble_generalized_plant(Mode mode, const FilterParams& f,
                                                   const MDeltaBlock& m,
                                                   const RationalTF& w_s,
                                                   const RationalTF& w_cs,
                                                   const RationalTF& w_d) {
    f.validate();
    Network net;
    const int im = net.add(m.M);
    const int ia = net.add(tf_to_ss(filter_g1(f)));
    const int ib = net.add(tf_to_ss(filter_g2(f)));
    const int iws = net.add(detail::weight_ss(w_s, "W_S"));
    const int iwcs = net.add(detail::weight_ss(w_cs, "W_CS"));
    const int iwd = net.add(detail::weight_ss(w_d, "W_d"));
    net.set_external_inputs(5); // [wd1 wd2 ref dist u]

    net.connect_input(im, 0, 0);
    net.connect_input(im, 1, 1);
    net.connect_input(ia, 0, 4);
    net.connect_input(iwd, 0, 3);
    net.connect_input(iwcs, 0, 4);
    net.connect_input(iws, 0, 2, 1.0); // e = ref - measured

    if (mode == Mode::GFL) {
        // M sees v_O - v_Th; its output port 2 is i_O.
        net.connect(im, 2, {ia, 0}, 1.0);
        net.connect(im, 2, {ib, 0}, -1.0);
        net.connect(im, 2, {iwd, 0}, -1.0);
        net.connect(ib, 0, {im, 2}, 1.0);
        net.connect(iws, 0, {im, 2}, -1.0);
        net.add_output({im, 0});
        net.add_output({im, 1});
        net.add_output({iws, 0});
        net.add_output({iwcs, 0});
        net.add_output_mixed({im, 2}, -1.0, 2, 1.0); // y = ref - i_O
    } else {
        // Summing node for v_O = G1 u - G2 i_O, with i_O = Y_load v_O + i_h.
        const int ivo = net.add(StateSpace::gain(1.0));
        net.connect(ivo, 0, {ia, 0}, 1.0);
        net.connect(ivo, 0, {ib, 0}, -1.0);
        net.connect(im, 2, {ivo, 0}, 1.0);
        net.connect(ib, 0, {im, 2}, 1.0);  // load-branch current
        net.connect(ib, 0, {iwd, 0}, 1.0); // harmonic source current
        net.connect(iws, 0, {ivo, 0}, -1.0);
        net.add_output({im, 0});
        net.add_output({im, 1});
        net.add_output({iws, 0});
        net.add_output({iwcs, 0});
        net.add_output_mixed({ivo, 0}, -1.0, 2, 1.0); // y = ref - v_O
    }

    GeneralizedPlant gp{net.build(), mode, m.Lp.half_width, m.Rp.half_width};
    if (!is_stabilizable(gp.P.subsystem(0, 5, 4, 1)) ||
        !is_detectable(gp.P.subsystem(4, 1, 0, 5)))
        throw SynthesisInfeasible(
            "assemble_generalized_plant: plant not stabilizable/detectable from u/y");
    return gp;
}

} // namespace invctl
