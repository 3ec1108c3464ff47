#include <catch_amalgamated.hpp>

#include <cmath>

#include <invctl/statespace.hpp>
#include <invctl/weights.hpp>

using namespace invctl;
using Catch::Approx;

namespace {

bool tf_stable(const RationalTF& tf) {
    for (Complex p : poly::roots(tf.den))
        if (p.real() >= -kStabilityTol) return false;
    return true;
}

} // namespace

TEST_CASE("make_ws: peaks, degeneracy, stability") {
    WeightConfig cfg;
    RationalTF ws = make_ws(cfg);
    CHECK(tf_stable(ws));
    CHECK(ws.proper());
    // peak at omega_n clearly above the half-octave-away level
    const double at_peak = std::abs(ws.eval_jw(cfg.omega_n));
    const double off_peak = std::abs(ws.eval_jw(0.5 * cfg.omega_n));
    // the symmetric damping split widens the skirt for large k, so expect
    // a large fraction of k_s2 rather than the full ratio
    CHECK(at_peak / off_peak >= cfg.k_s2 / 4.0);
    // resonance peak present as well
    const double at_res = std::abs(ws.eval_jw(cfg.omega_r));
    const double off_res = std::abs(ws.eval_jw(0.5 * cfg.omega_r));
    CHECK(at_res / off_res >= cfg.k_s3 / 2.0);
    // high-frequency roll-off
    CHECK(std::abs(ws.eval_jw(1e6)) < 1e-2 * std::abs(ws.eval_jw(1.0)));

    WeightConfig flat = cfg;
    flat.k_s2 = 1.0;
    flat.k_s3 = 1.0;
    flat.k_dc = 1.0;
    RationalTF ks1 = make_ws(flat);
    const double wc = 2.0 * cfg.omega_r;
    for (double w : {1.0, 100.0, 5000.0, 1e5}) {
        Complex want = cfg.rolloff_dc_gain * wc * wc /
                       ((Complex(0, w) + wc) * (Complex(0, w) + wc));
        CHECK(std::abs(ks1.eval_jw(w) - want) < 1e-10 * std::abs(want));
    }

    // DC lag boost: k_dc more gain at DC than the lag-free weight, back to
    // parity well above the lag zero (k_dc * dc_corner rad/s)
    WeightConfig lag = flat;
    lag.k_dc = 40.0;
    RationalTF ws_lag = make_ws(lag);
    CHECK(std::abs(ws_lag.eval(Complex(0, 0))) ==
          Approx(lag.k_dc * std::abs(ks1.eval(Complex(0, 0)))).epsilon(1e-9));
    CHECK(std::abs(ws_lag.eval_jw(100.0 * lag.k_dc * lag.dc_corner)) ==
          Approx(std::abs(ks1.eval_jw(100.0 * lag.k_dc * lag.dc_corner)))
              .epsilon(1e-3));
}

TEST_CASE("make_wcs: asymptote ratio and switching-frequency gain") {
    WeightConfig cfg;
    RationalTF wcs = make_wcs(cfg);
    CHECK(tf_stable(wcs));
    CHECK(wcs.num_degree() == wcs.den_degree()); // biproper
    const double hf = std::abs(wcs.eval_jw(1e12));
    const double dc = std::abs(wcs.eval(Complex(0, 0)));
    CHECK(hf / dc == Approx(cfg.k_cs2 / cfg.k_cs1).epsilon(1e-6));
    // within 3 dB of the high-frequency asymptote at the switching frequency
    const double at_fsw = std::abs(wcs.eval_jw(2.0 * M_PI * 20e3));
    CHECK(at_fsw >= hf / std::pow(10.0, 3.0 / 20.0));
    // k_cs is a pure scale factor
    WeightConfig scaled = cfg;
    scaled.k_cs = 7.0;
    RationalTF ws2 = make_wcs(scaled);
    const double ratio = scaled.k_cs / cfg.k_cs;
    for (double w : {1.0, 377.0, 1e5})
        CHECK(std::abs(ws2.eval_jw(w)) == Approx(ratio * std::abs(wcs.eval_jw(w))).epsilon(1e-12));
}

TEST_CASE("make_wd: harmonic levels and degeneracy") {
    WeightConfig cfg;
    RationalTF wd = make_wd(cfg);
    CHECK(tf_stable(wd));
    CHECK(wd.proper());
    const int harmonics[4] = {1, 3, 5, 7};
    for (int i = 0; i < 4; ++i) {
        const double wh = harmonics[i] * cfg.omega_n;
        const double at_h = std::abs(wd.eval_jw(wh));
        // inter-harmonic floor midway to the next harmonic
        const double floor_mag = std::abs(wd.eval_jw(wh + cfg.omega_n));
        CHECK(at_h >= cfg.k_dh[static_cast<std::size_t>(i)] / 2.0 * floor_mag);
    }
    WeightConfig flat = cfg;
    flat.k_dh = {1.0, 1.0, 1.0, 1.0};
    RationalTF kd = make_wd(flat);
    const double wc = 20.0 * cfg.omega_n;
    for (double w : {1.0, 377.0, 5000.0}) {
        Complex want = 1.0 / (Complex(0, w) / wc + 1.0);
        CHECK(std::abs(kd.eval_jw(w) - want) < 1e-9 * std::abs(want));
    }
}

TEST_CASE("weights: magnitude is an even function of frequency") {
    WeightConfig cfg;
    for (const RationalTF& tf : {make_ws(cfg), make_wcs(cfg), make_wd(cfg)})
        for (double w : {3.0, 377.0, 4999.0})
            CHECK(std::abs(tf.eval(Complex(0, -w))) ==
                  Approx(std::abs(tf.eval(Complex(0, w)))).epsilon(1e-12));
}

TEST_CASE("weights: state-space realization matches analytic evaluation") {
    WeightConfig cfg;
    for (const RationalTF& tf : {make_ws(cfg), make_wcs(cfg), make_wd(cfg)}) {
        StateSpace ss = tf_to_ss(tf);
        for (double w : {0.5, 60.0, 377.0, 1131.0, 5000.0, 2e4}) {
            Complex want = tf.eval_jw(w);
            Complex got = ss.eval_jw(w)(0, 0);
            CHECK(std::abs(got - want) <= 1e-6 * std::max(1.0, std::abs(want)));
        }
    }
}

TEST_CASE("WeightConfig validation rejects bad parameters") {
    WeightConfig cfg;
    cfg.zeta = 1.5;
    CHECK_THROWS_AS(make_ws(cfg), ConfigError);
    cfg = WeightConfig{};
    cfg.k_cs2 = 50.0; // ratio to k_cs1 below 100
    CHECK_THROWS_AS(make_wcs(cfg), ConfigError);
    cfg = WeightConfig{};
    cfg.k_dh[2] = -1.0;
    CHECK_THROWS_AS(make_wd(cfg), ConfigError);
}

TEST_CASE("make_wcs: optional band emphasis") {
    WeightConfig cfg;
    RationalTF base = make_wcs(cfg);
    WeightConfig em = cfg;
    em.k_csp = 6.0;
    em.omega_csp = 3300.0;
    RationalTF wcs = make_wcs(em);
    // gain ratio k_csp at the band center, parity far away
    CHECK(std::abs(wcs.eval_jw(3300.0)) ==
          Approx(em.k_csp * std::abs(base.eval_jw(3300.0))).epsilon(1e-9));
    CHECK(std::abs(wcs.eval_jw(50.0)) ==
          Approx(std::abs(base.eval_jw(50.0))).epsilon(5e-2));
    CHECK(std::abs(wcs.eval_jw(2e5)) ==
          Approx(std::abs(base.eval_jw(2e5))).epsilon(5e-2));
    // bad parameters rejected
    em.zeta_csp = 1.5;
    CHECK_THROWS_AS(make_wcs(em), ConfigError);
}
