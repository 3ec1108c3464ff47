#pragma once

// Performance / disturbance shaping weights: W_S (sensitivity), W_CS
// (control-sensitivity high-pass), W_d (harmonic disturbance emphasis).

#include <array>
#include <cmath>

#include "errors.hpp"
#include "statespace.hpp"

namespace invctl {

/// All free parameters of the three weights.  Corners set to 0 mean "derive
/// from omega_r / omega_n" (rolloff: 2 omega_r, k_d corner: 20 omega_n).
struct WeightConfig {
    double omega_n = 2.0 * M_PI * 60.0; // rad/s
    double omega_r = 5000.0;            // plant resonance, rad/s
    double zeta = 0.035;
    double k_s2 = 1000.0; // peak ratio at omega_n
    double k_s3 = 5.0;   // peak ratio at omega_r
    double rolloff_corner = 0.0;
    double rolloff_dc_gain = 0.18;
    double k_dc = 40.0;     // extra DC boost (lag zero/pole ratio); 1 = off
    double dc_corner = 1.0; // lag pole, rad/s; zero sits at k_dc * dc_corner
    double k_cs = 2.0;
    double k_cs1 = 1.0;
    double k_cs2 = 300.0; // corner near 2*pi*20 kHz (switching frequency)
    double k_csp = 1.0;     // band emphasis gain in W_CS; 1 = off
    double omega_csp = 0.0; // band center, rad/s; 0 = 0.65 * omega_r
    double zeta_csp = 0.3;
    std::array<double, 4> k_dh{1.0, 0.04, 0.04, 0.04}; // h = 1, 3, 5, 7
    double k_d_corner = 0.0;

    void validate() const {
        if (omega_n <= 0 || omega_r <= 0)
            throw ConfigError("WeightConfig: frequencies must be positive");
        if (!(zeta > 0.0 && zeta < 1.0))
            throw ConfigError("WeightConfig: zeta must lie in (0, 1)");
        if (k_s2 <= 0 || k_s3 <= 0 || rolloff_dc_gain <= 0 || k_cs <= 0 ||
            k_cs1 <= 0 || k_cs2 <= 0)
            throw ConfigError("WeightConfig: gains must be positive");
        if (k_dc < 1.0 || dc_corner <= 0.0)
            throw ConfigError("WeightConfig: need k_dc >= 1 and dc_corner > 0");
        if (k_csp < 1.0 || !(zeta_csp > 0.0 && zeta_csp < 1.0))
            throw ConfigError("WeightConfig: need k_csp >= 1, zeta_csp in (0, 1)");
        if (k_cs2 / k_cs1 < 100.0)
            throw ConfigError("WeightConfig: need k_cs2 >> k_cs1 (ratio >= 100)");
        for (double k : k_dh)
            if (k <= 0) throw ConfigError("WeightConfig: harmonic gains must be positive");
    }
};

namespace detail {

/// Resonant peak: unit gain away from w0, gain ratio k at w0.  Symmetric
/// damping split (zeta*sqrt(k) over zeta/sqrt(k)) keeps the skirts narrow.
inline RationalTF peak_biquad(double w0, double k, double zeta) {
    const double rk = std::sqrt(k);
    return RationalTF({1.0, 2.0 * zeta * rk * w0, w0 * w0},
                      {1.0, 2.0 * zeta / rk * w0, w0 * w0});
}

} // namespace detail

/// W_S = k_S1(s) * peak(omega_n, k_S2) * peak(omega_r, k_S3),
/// k_S1(s) = g * wc^2 / (s + wc)^2 a second-order roll-off.
inline RationalTF make_ws(const WeightConfig& cfg) {
    cfg.validate();
    const double wc = cfg.rolloff_corner > 0 ? cfg.rolloff_corner : 2.0 * cfg.omega_r;
    RationalTF ks1({cfg.rolloff_dc_gain * wc * wc}, {1.0, 2.0 * wc, wc * wc});
    RationalTF ws = ks1 * detail::peak_biquad(cfg.omega_n, cfg.k_s2, cfg.zeta) *
                    detail::peak_biquad(cfg.omega_r, cfg.k_s3, cfg.zeta);
    if (cfg.k_dc > 1.0) {
        // low-frequency lag boost: pins |S| down at DC (integral-like action)
        // so the loop keeps positive DC gain even when the series branch
        // degenerates to a pure integrator (R -> 0)
        ws = ws * RationalTF({1.0, cfg.k_dc * cfg.dc_corner},
                             {1.0, cfg.dc_corner});
    }
    return ws;
}

/// W_CS = k_CS (s + k_CS1 omega_n) / (s + k_CS2 omega_n): biproper high-pass.
inline RationalTF make_wcs(const WeightConfig& cfg) {
    cfg.validate();
    RationalTF wcs({cfg.k_cs, cfg.k_cs * cfg.k_cs1 * cfg.omega_n},
                   {1.0, cfg.k_cs2 * cfg.omega_n});
    if (cfg.k_csp > 1.0) {
        // band emphasis: caps controller gain where the series-branch
        // resonance passes through as the branch inductance collapses
        const double w0 = cfg.omega_csp > 0 ? cfg.omega_csp : 0.65 * cfg.omega_r;
        wcs = wcs * detail::peak_biquad(w0, cfg.k_csp, cfg.zeta_csp);
    }
    return wcs;
}

/// W_d = k_d(s) * prod over h in {1,3,5,7} of peak(h omega_n, k_dh, zeta),
/// k_d(s) = 1 / (s/wc + 1) a first-order roll-off.
inline RationalTF make_wd(const WeightConfig& cfg) {
    cfg.validate();
    const double wc = cfg.k_d_corner > 0 ? cfg.k_d_corner : 20.0 * cfg.omega_n;
    RationalTF wd({wc}, {1.0, wc});
    const int harmonics[4] = {1, 3, 5, 7};
    for (int i = 0; i < 4; ++i)
        wd = wd * detail::peak_biquad(harmonics[i] * cfg.omega_n, cfg.k_dh[i], cfg.zeta);
    return wd;
}

} // namespace invctl
