#include <catch_amalgamated.hpp>

#include <cmath>

#include <invctl/sim.hpp>
#include <invctl/synthesis.hpp>
#include <invctl/weights.hpp>

using namespace invctl;
using Catch::Approx;

namespace {

/// Cheap discrete GFM controller for the scenario-level tests: one plain
/// H-infinity synthesis on the nominal-load generalized plant (cached).
Controller make_cheap_gfm_controller() {
    FilterParams f;
    LoadSpec ls;
    LoadNominal ln = load_nominal_from_rating(ls);
    UncertainParam lu = interval_to_uncertain(ln.l_load / ls.loading_max,
                                              ln.l_load / ls.loading_min);
    UncertainParam ru = interval_to_uncertain(ln.r_load / ls.loading_max,
                                              ln.r_load / ls.loading_min);
    auto blk = build_m_delta(lu, ru);
    WeightConfig wc;
    wc.rolloff_dc_gain = 0.5;
    wc.k_s3 = 3.0;
    wc.omega_r = resonant_frequency(gfm_open_loop(f, lu.nominal, ru.nominal).g_inv);
    auto gp = assemble_generalized_plant(Mode::GFM, f, blk, make_ws(wc),
                                         make_wcs(wc), make_wd(wc));
    auto res = hinf_synthesize(gp.P, 1, 1, 1e3);
    return finalize_controller(res.K, res.gamma, 20e3);
}

const Controller& cheap_gfm_controller() {
    static Controller c = make_cheap_gfm_controller();
    return c;
}

} // namespace

// ---------------------------------------------------------------------------
// step_plant

TEST_CASE("step_plant: zero input keeps zero state") {
    PlantEnv e{Mode::GFL, FilterParams{}, 44.9e-3, 3.38};
    PlantState s;
    for (int k = 0; k < 1000; ++k) s = step_plant(s, e, 0.0, 0.0, 5e-6);
    CHECK(s.i_l == 0.0);
    CHECK(s.v_o == 0.0);
    CHECK(s.i_o == 0.0);
}

TEST_CASE("step_plant: GFM resistive DC gain R/(R_f+R)") {
    FilterParams f;
    PlantEnv e{Mode::GFM, f, 1e-3, 10.0};
    PlantState s;
    const double v_inv = 100.0;
    for (int k = 0; k < 200000; ++k) s = step_plant(s, e, v_inv, 0.0, 5e-6);
    CHECK(s.v_o == Approx(v_inv * e.r2 / (f.r_f + e.r2)).epsilon(1e-4));
    CHECK(s.i_o == Approx(s.v_o / e.r2).epsilon(1e-4));
}

TEST_CASE("step_plant: sinusoidal steady state matches |G_inv(j w_N)|") {
    FilterParams f;
    TheveninNominal th = grid_thevenin_from_scr(GridSpec{});
    PlantEnv e{Mode::GFL, f, th.l_th, th.r_th};
    GflOpenLoop ol = gfl_open_loop(f, th.l_th, th.r_th);
    const double wN = 2.0 * M_PI * 60.0, dt = 5e-6;
    PlantState s;
    const int n = static_cast<int>(std::round(2.0 / dt));
    double a = 0.0, b = 0.0;
    int m = 0;
    for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        s = step_plant(s, e, std::sin(wN * t), 0.0, dt);
        if (t >= 2.0 - 10.0 / 60.0) { // trailing 10 cycles
            a += s.i_o * std::sin(wN * t);
            b += s.i_o * std::cos(wN * t);
            ++m;
        }
    }
    const double amp = 2.0 * std::hypot(a, b) / m;
    CHECK(amp == Approx(std::abs(ol.g_inv.eval_jw(wN))).epsilon(5e-3));
}

TEST_CASE("step_plant: halving dt changes the state by < 1e-6 relative") {
    FilterParams f;
    PlantEnv e{Mode::GFM, f, 0.04, 31.0};
    // inputs are held over a step by contract, so refine with them fixed
    auto run = [&](double dt) {
        PlantState s{2.0, 50.0, 1.0};
        const int n = static_cast<int>(std::round(5e-5 / dt));
        for (int k = 0; k < n; ++k) s = step_plant(s, e, 339.4, 0.5, dt);
        return s;
    };
    PlantState c = run(5e-6), h = run(2.5e-6);
    const double scale = std::max({std::abs(h.i_l), std::abs(h.v_o),
                                   std::abs(h.i_o), 1.0});
    CHECK(std::abs(c.i_l - h.i_l) / scale < 1e-6);
    CHECK(std::abs(c.v_o - h.v_o) / scale < 1e-6);
    CHECK(std::abs(c.i_o - h.i_o) / scale < 1e-6);
}

TEST_CASE("step_plant: near-lossless power balance") {
    FilterParams f;
    f.r_f = 1e-4;
    PlantEnv e{Mode::GFL, f, 44.9e-3, 1e-4};
    const double wN = 2.0 * M_PI * 60.0, dt = 5e-6;
    PlantState s;
    double p_in = 0.0, p_out = 0.0;
    int m = 0;
    const int n = static_cast<int>(std::round(2.0 / dt));
    for (int k = 0; k < n; ++k) {
        const double t = k * dt;
        const double v = 100.0 * std::sin(wN * t);
        const double ex = 80.0 * std::sin(wN * t + 0.2);
        s = step_plant(s, e, v, ex, dt);
        if (t >= 2.0 - 10.0 / 60.0) {
            p_in += v * s.i_l;
            p_out += ex * s.i_o;
            ++m;
        }
    }
    p_in /= m;
    p_out /= m;
    CHECK(p_out == Approx(p_in).epsilon(0.01));
}

// ---------------------------------------------------------------------------
// PLL

TEST_CASE("pll_step: locks to a clean 60 Hz input within 100 ms") {
    const double wN = 2.0 * M_PI * 60.0, dt = 5e-5;
    PLLState p;
    double worst_theta = 0.0, worst_v = 0.0;
    for (int k = 0; k * dt < 0.3; ++k) {
        const double t = k * dt;
        p = pll_step(p, M_SQRT2 * 240.0 * std::sin(wN * t), dt);
        if (t >= 0.1) {
            double err = detail::wrap_2pi(p.theta - wN * (t + dt));
            if (err > M_PI) err -= 2.0 * M_PI;
            worst_theta = std::max(worst_theta, std::abs(err));
            // amplitude estimate is judged after lock has settled
            if (t >= 0.15) worst_v = std::max(worst_v, std::abs(p.v_rms - 240.0));
        }
        CHECK(p.theta >= 0.0);
        CHECK(p.theta < 2.0 * M_PI);
    }
    CHECK(worst_theta < 1.0 * M_PI / 180.0);
    CHECK(worst_v < 0.5);
    CHECK(std::abs(p.omega / (2.0 * M_PI) - 60.0) < 0.05);
}

TEST_CASE("pll_step: re-locks within 200 ms after a 60 -> 60.5 Hz step") {
    const double dt = 5e-5;
    PLLState p;
    double phase = 0.0, w = 2.0 * M_PI * 60.0;
    // settle at 60 Hz first
    for (int k = 0; k * dt < 0.3; ++k) {
        phase += w * dt;
        p = pll_step(p, M_SQRT2 * 240.0 * std::sin(phase), dt);
    }
    w = 2.0 * M_PI * 60.5;
    double worst = 0.0;
    for (int k = 0; k * dt < 0.4; ++k) {
        phase += w * dt;
        p = pll_step(p, M_SQRT2 * 240.0 * std::sin(phase), dt);
        if (k * dt >= 0.2) {
            // theta has already been advanced past the current sample
            double err = detail::wrap_2pi(p.theta - (phase + w * dt));
            if (err > M_PI) err -= 2.0 * M_PI;
            worst = std::max(worst, std::abs(err));
        }
    }
    CHECK(worst < 1.0 * M_PI / 180.0);
    CHECK(std::abs(p.omega / (2.0 * M_PI) - 60.5) < 0.05);
}

TEST_CASE("pll_step: zero input decays the amplitude without NaN") {
    PLLState p;
    p.sogi_a = 10.0;
    for (int k = 0; k < 10000; ++k) {
        p = pll_step(p, 0.0, 5e-5);
        REQUIRE(std::isfinite(p.theta));
        REQUIRE(std::isfinite(p.omega));
        REQUIRE(std::isfinite(p.v_rms));
    }
    CHECK(p.v_rms < 1e-3);
}

TEST_CASE("gfl_reference: rated point and quadrature phasing") {
    PLLState p;
    p.v_rms = 240.0;
    p.theta = std::atan2(728.46, 1503.0) + M_PI / 2.0; // sin(...) = 1
    const double peak = M_SQRT2 * std::hypot(1503.0, 728.46) / 240.0;
    CHECK(gfl_reference(p, 1503.0, 728.46) == Approx(peak).epsilon(1e-12));
    CHECK(peak == Approx(9.84).epsilon(2e-3));
    // Q only: 90 degree lag relative to theta
    p.theta = M_PI / 2.0;
    CHECK(gfl_reference(p, 0.0, 500.0) ==
          Approx(M_SQRT2 * 500.0 / 240.0 * std::sin(M_PI / 2.0 - M_PI / 2.0))
              .margin(1e-12));
    // amplitude guard
    p.v_rms = 0.5;
    CHECK_THROWS_AS(gfl_reference(p, 100.0, 0.0), AmplitudeGuard);
}

// ---------------------------------------------------------------------------
// Droop

TEST_CASE("droop_reference: droop law arithmetic at rated operating points") {
    const double dt = 5e-5;
    DroopState d;
    CHECK(d.n_p * 1503.0 == Approx(2.0 * M_PI * 0.5).epsilon(1e-12));
    CHECK(d.m_q * 728.46 == Approx(0.05 * 240.0).epsilon(1e-12));
    // no load: amplitude sqrt2 V_N at omega_n
    DroopState d0 = d;
    double vmax = 0.0;
    for (int k = 0; k * dt < 0.2; ++k)
        vmax = std::max(vmax, std::abs(droop_reference(d0, 0.0, 0.0, dt)));
    CHECK(vmax == Approx(M_SQRT2 * 240.0).epsilon(1e-3));
    CHECK(d0.omega == Approx(2.0 * M_PI * 60.0).epsilon(1e-9));
    // rated P: frequency drop 2 pi 0.5; rated Q: 5% voltage drop
    DroopState dr = d;
    for (int k = 0; k * dt < 2.0; ++k)
        droop_reference(dr, 1503.0, 728.46, dt);
    CHECK(dr.omega == Approx(2.0 * M_PI * 59.5).epsilon(1e-6));
    CHECK(dr.v == Approx(0.95 * 240.0).epsilon(1e-6));
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

SimTrace sine_trace(double amp, double phase_out, double h3_frac) {
    SimTrace tr;
    tr.dt = 5e-5;
    const double wN = 2.0 * M_PI * 60.0;
    for (int k = 0; k * tr.dt < 1.0; ++k) {
        const double t = k * tr.dt;
        tr.t.push_back(t);
        tr.ref.push_back(amp * std::sin(wN * t));
        tr.out.push_back(amp * std::sin(wN * t - phase_out) +
                         h3_frac * amp * std::sin(3.0 * wN * t));
        tr.v_inv.push_back(0.0);
        tr.dist.push_back(0.0);
    }
    return tr;
}

} // namespace

TEST_CASE("compute_metrics: identical signals give zero tracking error") {
    SimTrace tr = sine_trace(5.0, 0.0, 0.0);
    Metrics m = compute_metrics(Mode::GFL, tr, 1.0, 10.0, 2.0 * M_PI * 60.0, 7.0);
    CHECK(m.ricte == Approx(0.0).margin(1e-9));
    CHECK(m.tdd_i == Approx(0.0).margin(1e-3)); // correlation leakage
}

TEST_CASE("compute_metrics: pure phase delay closed form") {
    const double phi = 5.0 * M_PI / 180.0;
    SimTrace tr = sine_trace(5.0, phi, 0.0);
    Metrics m = compute_metrics(Mode::GFL, tr, 1.0, 10.0, 2.0 * M_PI * 60.0, 7.0);
    CHECK(m.ricte ==
          Approx(100.0 * std::abs(2.0 * std::sin(phi / 2.0)) / M_SQRT2)
              .epsilon(1e-3));
}

TEST_CASE("compute_metrics: 5% third harmonic reads as 5% THD") {
    SimTrace tr = sine_trace(339.4, 0.0, 0.05);
    Metrics m = compute_metrics(Mode::GFM, tr, 1.0, 10.0, 2.0 * M_PI * 60.0, 7.0);
    CHECK(m.thd_v == Approx(5.0).margin(0.05));
    // TDD of the same wave in GFL terms: harmonic rms over rated rms
    Metrics mg = compute_metrics(Mode::GFL, tr, 1.0, 10.0, 2.0 * M_PI * 60.0,
                                 339.4 / M_SQRT2);
    CHECK(mg.tdd_i == Approx(5.0).margin(0.05));
}

TEST_CASE("compute_metrics: misaligned windows are rejected") {
    SimTrace tr = sine_trace(1.0, 0.0, 0.0);
    const double wN = 2.0 * M_PI * 60.0;
    CHECK_THROWS_AS(compute_metrics(Mode::GFL, tr, 1.0, 10.5, wN, 1.0),
                    WindowMisaligned);
    CHECK_THROWS_AS(compute_metrics(Mode::GFL, tr, 2.0, 10.0, wN, 1.0),
                    WindowMisaligned);
    CHECK_THROWS_AS(compute_metrics(Mode::GFL, tr, 0.1, 10.0, wN, 1.0),
                    WindowMisaligned);
}

// ---------------------------------------------------------------------------
// Scenario validation

TEST_CASE("Scenario: validation rejects malformed inputs") {
    FilterParams f;
    GridSpec gs;
    LoadSpec ls;
    Scenario sc = make_case(1, f, gs, ls);
    CHECK_NOTHROW(sc.validate());

    Scenario bad = sc;
    bad.events.insert(bad.events.begin(), {0.9, SimEvent::SetPQ, 1.0, 0.0, {}});
    CHECK_THROWS_AS(bad.validate(), ConfigError); // unsorted

    bad = sc;
    bad.harmonics.push_back({2, 1.0, 0.0});
    CHECK_THROWS_AS(bad.validate(), ConfigError); // even harmonic

    bad = sc;
    bad.plant_dt = 3e-6; // does not divide the control period
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    CHECK_THROWS_AS(make_case(5, f, gs, ls), ConfigError);
}

// ---------------------------------------------------------------------------
// run_scenario

TEST_CASE("run_scenario: requires a controller at the control rate") {
    FilterParams f;
    GridSpec gs;
    LoadSpec ls;
    Scenario sc = make_case(3, f, gs, ls);
    StateSpace K = StateSpace::gain(Matrix::Zero(1, 1)); // continuous
    CHECK_THROWS_AS(run_scenario(sc, K), ConfigError);
}

TEST_CASE("run_scenario: positive feedback triggers NumericalBlowup") {
    FilterParams f;
    GridSpec gs;
    LoadSpec ls;
    Scenario sc = make_case(1, f, gs, ls);
    StateSpace K = StateSpace::gain(Matrix::Constant(1, 1, -500.0));
    K.dt = sc.control_dt;
    SimTrace partial;
    CHECK_THROWS_AS(run_scenario(sc, K, &partial), NumericalBlowup);
    CHECK(!partial.t.empty());
    CHECK(partial.t.size() == partial.out.size());
}

TEST_CASE("run_scenario: deterministic, finite, and rate-refinement stable") {
    const Controller& c = cheap_gfm_controller();
    FilterParams f;
    GridSpec gs;
    LoadSpec ls;
    Scenario sc = make_case(3, f, gs, ls);
    SimResult a = run_scenario(sc, c.K_discrete);
    SimResult b = run_scenario(sc, c.K_discrete);
    REQUIRE(a.trace.t.size() == b.trace.t.size());
    for (std::size_t k = 0; k < a.trace.t.size(); ++k) {
        REQUIRE(a.trace.out[k] == b.trace.out[k]); // bit identical
        REQUIRE(std::isfinite(a.trace.out[k]));
        REQUIRE(std::isfinite(a.trace.v_inv[k]));
    }
    CHECK(a.pre.rivte >= 0.0);
    CHECK(a.post.thd_v >= 0.0);
    // halving the plant step moves the metrics by < 0.1% absolute
    Scenario fine = sc;
    fine.plant_dt = 2.5e-6;
    SimResult r = run_scenario(fine, c.K_discrete);
    CHECK(std::abs(r.post.rivte - a.post.rivte) < 0.1);
    CHECK(std::abs(r.post.thd_v - a.post.thd_v) < 0.1);
}

TEST_CASE("run_scenario: clean GFM tracking matches |1 - G_track(j w_N)|") {
    const Controller& c = cheap_gfm_controller();
    FilterParams f;
    GridSpec gs;
    LoadSpec ls;
    Scenario sc = make_case(3, f, gs, ls);
    sc.harmonics.clear();
    sc.events.clear(); // steady load, no disturbance input
    SimResult r = run_scenario(sc, c.K_discrete);
    LoadNominal ln = load_nominal_from_rating(ls);
    ClosedLoopEquivalents eq = closed_loop_equivalents(
        Mode::GFM, f, ln.l_load / ls.loading_min, ln.r_load / ls.loading_min,
        c.K);
    const Complex g = eq.g_track.eval_jw(sc.omega_n)(0, 0);
    const double predicted = 100.0 * std::abs(1.0 - g) / M_SQRT2;
    CHECK(std::abs(r.post.rivte - predicted) < 0.5);
}
