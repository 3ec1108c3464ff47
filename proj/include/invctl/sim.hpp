#pragma once

// Fixed-step time-domain co-simulation: continuous averaged plant (RK4 at
// 5 us) against the discretized controller (zero-order hold at 20 kHz),
// with PLL / droop reference generation, scenario events and the tracking /
// distortion metrics.

#include <algorithm>
#include <cmath>
#include <vector>

#include "plant.hpp"
#include "statespace.hpp"
#include "uncertainty.hpp"

namespace invctl {

// ---------------------------------------------------------------------------
// SOGI-based SRF PLL (single phase)

struct PLLState {
    double sogi_a = 0.0;  // in-phase component
    double sogi_b = 0.0;  // quadrature component (lags by 90 deg)
    double integrator = 0.0;
    double theta = 0.0;          // rad, wrapped to [0, 2 pi)
    double omega = 2.0 * M_PI * 60.0; // rad/s estimate
    double v_rms = 0.0;          // V
    double omega_n = 2.0 * M_PI * 60.0;
    double k = M_SQRT2;          // SOGI gain
    double kp = 222.0;           // SRF PI, ~25 Hz loop bandwidth
    double ki = 24650.0;
};

namespace detail {

inline double wrap_2pi(double th) {
    th = std::fmod(th, 2.0 * M_PI);
    return th < 0.0 ? th + 2.0 * M_PI : th;
}

/// One Heun step of the SOGI pair at frequency w0:
/// a' = w0 (k (x - a) - b), b' = w0 a.
inline void sogi_step(double& a, double& b, double x, double w0, double k,
                      double dt) {
    const double da1 = w0 * (k * (x - a) - b), db1 = w0 * a;
    const double a1 = a + dt * da1, b1 = b + dt * db1;
    const double da2 = w0 * (k * (x - a1) - b1), db2 = w0 * a1;
    a += 0.5 * dt * (da1 + da2);
    b += 0.5 * dt * (db1 + db2);
}

} // namespace detail

/// Advance the PLL by one controller period given a voltage sample. For
/// v = V sin(theta) the SOGI yields (a, b) ~ (V sin, -V cos); the SRF error
/// a cos(th) + b sin(th) = V sin(theta - th) drives the PI loop.
inline PLLState pll_step(PLLState p, double v, double dt) {
    detail::sogi_step(p.sogi_a, p.sogi_b, v, p.omega, p.k, dt);
    const double amp = std::hypot(p.sogi_a, p.sogi_b);
    p.v_rms = amp / M_SQRT2;
    // freeze the loop below the reference-guard amplitude: the normalized
    // error is O(1) noise there and would drive the frequency estimate away
    const double err =
        amp > M_SQRT2
            ? (p.sogi_a * std::cos(p.theta) + p.sogi_b * std::sin(p.theta)) / amp
            : 0.0;
    p.integrator += p.ki * err * dt;
    p.omega = p.omega_n + p.kp * err + p.integrator;
    p.theta = detail::wrap_2pi(p.theta + p.omega * dt);
    return p;
}

/// i_ref = sqrt2 sqrt(P^2+Q^2)/V * sin(theta - atan2(Q, P)).
inline double gfl_reference(const PLLState& p, double p_ref, double q_ref) {
    if (p.v_rms <= 1.0)
        throw AmplitudeGuard("gfl_reference: PLL amplitude estimate <= 1 V");
    const double s = std::hypot(p_ref, q_ref);
    return M_SQRT2 * s / p.v_rms * std::sin(p.theta - std::atan2(q_ref, p_ref));
}

// ---------------------------------------------------------------------------
// P-f / Q-V droop (GFM)

struct DroopState {
    double p_avg = 0.0; // W
    double q_avg = 0.0; // var
    double omega = 2.0 * M_PI * 60.0;
    double v = 240.0;   // V rms
    double theta = 0.0;
    double n_p = 2.0 * M_PI * 0.5 / 1503.0;  // rad/s per W (0.5 Hz at rated P)
    double m_q = 0.05 * 240.0 / 728.46;      // V per var (5% of V_N at rated Q)
    double omega_n = 2.0 * M_PI * 60.0;
    double v_n = 240.0;
    double lp_cutoff = 10.0; // rad/s power averaging
};

/// Update the droop laws from instantaneous powers and synthesize the
/// voltage reference sqrt2 V sin(integral of omega).
inline double droop_reference(DroopState& d, double p_inst, double q_inst,
                              double dt) {
    d.p_avg += dt * d.lp_cutoff * (p_inst - d.p_avg);
    d.q_avg += dt * d.lp_cutoff * (q_inst - d.q_avg);
    d.omega = d.omega_n - d.n_p * d.p_avg;
    d.v = d.v_n - d.m_q * d.q_avg;
    d.theta = detail::wrap_2pi(d.theta + d.omega * dt);
    return M_SQRT2 * d.v * std::sin(d.theta);
}

// ---------------------------------------------------------------------------
// Averaged three-state plant

struct PlantState {
    double i_l = 0.0; // inverter-side inductor current, A
    double v_o = 0.0; // filter capacitor voltage, V
    double i_o = 0.0; // branch current (grid side GFL / load GFM), A
};

struct PlantEnv {
    Mode mode = Mode::GFL;
    FilterParams f;
    double l2 = 0.0; // Thevenin (GFL) or load (GFM) inductance, H
    double r2 = 0.0; // Ohm
};

/// RK4 step of the averaged model. `exo` is v_Th (GFL) or the injected
/// harmonic load current i_h (GFM), held constant over the step.
inline PlantState step_plant(const PlantState& s, const PlantEnv& e,
                             double v_inv, double exo, double dt) {
    auto f = [&](const PlantState& x) {
        PlantState d;
        d.i_l = (v_inv - e.f.r_f * x.i_l - x.v_o) / e.f.l_f;
        if (e.mode == Mode::GFL) {
            d.v_o = (x.i_l - x.i_o) / e.f.c_f;
            d.i_o = (x.v_o - e.r2 * x.i_o - exo) / e.l2;
        } else {
            d.v_o = (x.i_l - x.i_o - exo) / e.f.c_f;
            d.i_o = (x.v_o - e.r2 * x.i_o) / e.l2;
        }
        return d;
    };
    auto plus = [](const PlantState& a, const PlantState& b, double h) {
        return PlantState{a.i_l + h * b.i_l, a.v_o + h * b.v_o, a.i_o + h * b.i_o};
    };
    PlantState k1 = f(s);
    PlantState k2 = f(plus(s, k1, 0.5 * dt));
    PlantState k3 = f(plus(s, k2, 0.5 * dt));
    PlantState k4 = f(plus(s, k3, dt));
    PlantState out = s;
    out.i_l += dt / 6.0 * (k1.i_l + 2 * k2.i_l + 2 * k3.i_l + k4.i_l);
    out.v_o += dt / 6.0 * (k1.v_o + 2 * k2.v_o + 2 * k3.v_o + k4.v_o);
    out.i_o += dt / 6.0 * (k1.i_o + 2 * k2.i_o + 2 * k3.i_o + k4.i_o);
    return out;
}

// ---------------------------------------------------------------------------
// Scenarios

struct Harmonic {
    int order = 3;
    double amplitude = 0.0; // peak, SI units of the carrying signal
    double phase = 0.0;     // rad
};

struct SimEvent {
    enum Kind { SetPQ, StepThevenin, StepLoad, InjectHarmonics };
    double time = 0.0;
    Kind kind = SetPQ;
    double a = 0.0; // payload: P (W) / impedance scale / loading fraction
    double b = 0.0; // payload: Q (var)
    std::vector<Harmonic> harmonics; // for InjectHarmonics
};

struct Scenario {
    Mode mode = Mode::GFL;
    double duration = 1.0; // s
    FilterParams filter;
    double l2 = 0.0, r2 = 0.0; // initial environment branch
    double p_ref = 0.0, q_ref = 0.0; // GFL reference (W, var)
    std::vector<Harmonic> harmonics; // v_Th harmonics (GFL) / i_h (GFM)
    std::vector<SimEvent> events;
    double v_n = 240.0;
    double omega_n = 2.0 * M_PI * 60.0;
    double s_rated = 1670.0;
    double p_rated = 1503.0;
    double q_rated = 728.46;
    double plant_dt = 5e-6;
    double control_dt = 5e-5;

    void validate() const {
        filter.validate();
        if (duration <= 0 || l2 <= 0 || r2 <= 0 || plant_dt <= 0 ||
            control_dt <= 0)
            throw ConfigError("Scenario: nonpositive parameter");
        const double ratio = control_dt / plant_dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9)
            throw ConfigError("Scenario: control period must divide into plant steps");
        double prev = 0.0;
        for (const SimEvent& ev : events) {
            if (ev.time < prev || ev.time > duration)
                throw ConfigError("Scenario: events must be sorted and within duration");
            prev = ev.time;
        }
        for (const Harmonic& h : harmonics)
            if (h.order % 2 == 0 || h.order < 1)
                throw ConfigError("Scenario: harmonic orders must be odd");
    }
};

struct SimTrace {
    double dt = 5e-5; // one row per controller step
    std::vector<double> t, ref, out, v_inv, dist;
};

struct Metrics {
    double ricte = 0.0; // %
    double rivte = 0.0; // %
    double thd_v = 0.0; // %
    double tdd_i = 0.0; // %
};

/// Tracking error and distortion over the trailing `cycles` fundamental
/// periods ending at t_end. Harmonic content by correlation against
/// sin/cos(h w t) up to order 50.
inline Metrics compute_metrics(Mode mode, const SimTrace& tr, double t_end,
                               double cycles, double omega_n,
                               double rated_rms) {
    if (std::abs(cycles - std::round(cycles)) > 1e-2 || cycles < 1.0)
        throw WindowMisaligned("compute_metrics: need an integer number of cycles");
    const double f0 = omega_n / (2.0 * M_PI);
    const double t_begin = t_end - cycles / f0;
    if (tr.t.empty() || t_begin < tr.t.front() - 1e-12 ||
        t_end > tr.t.back() + tr.dt + 1e-12)
        throw WindowMisaligned("compute_metrics: window outside the trace");
    std::size_t k0 = static_cast<std::size_t>(
        std::lower_bound(tr.t.begin(), tr.t.end(), t_begin - 1e-12) - tr.t.begin());
    std::size_t k1 = static_cast<std::size_t>(
        std::upper_bound(tr.t.begin(), tr.t.end(), t_end + 1e-12) - tr.t.begin());
    const std::size_t n = k1 - k0;
    if (n < 16) throw WindowMisaligned("compute_metrics: window too short");

    double se = 0.0, sr = 0.0;
    for (std::size_t k = k0; k < k1; ++k) {
        const double e = tr.ref[k] - tr.out[k];
        se += e * e;
        sr += tr.ref[k] * tr.ref[k];
    }
    const double rms_err = std::sqrt(se / n);
    const double rms_ref = std::sqrt(sr / n);
    const double track =
        rms_ref > 1e-12 ? 100.0 * rms_err / (M_SQRT2 * rms_ref) : 0.0;

    // harmonic amplitudes of the controlled output
    const int hmax = 50;
    double fund = 0.0, harm2 = 0.0;
    for (int h = 1; h <= hmax; ++h) {
        if (h * omega_n >= M_PI / tr.dt) break; // Nyquist
        double a = 0.0, b = 0.0;
        for (std::size_t k = k0; k < k1; ++k) {
            a += tr.out[k] * std::sin(h * omega_n * tr.t[k]);
            b += tr.out[k] * std::cos(h * omega_n * tr.t[k]);
        }
        const double amp = 2.0 * std::hypot(a, b) / n;
        if (h == 1)
            fund = amp;
        else
            harm2 += amp * amp;
    }
    Metrics m;
    if (mode == Mode::GFL) {
        m.ricte = track;
        m.tdd_i = rated_rms > 0.0
                      ? 100.0 * std::sqrt(harm2 / 2.0) / rated_rms
                      : 0.0;
    } else {
        m.rivte = track;
        m.thd_v = fund > 1e-9 ? 100.0 * std::sqrt(harm2) / fund : 0.0;
    }
    return m;
}

struct SimResult {
    SimTrace trace;
    Metrics pre;  // final 10 cycles before the first event (or end of run)
    Metrics post; // final 10 cycles of the run
};

/// Co-simulate the scenario against the discrete controller. Throws
/// NumericalBlowup when any signal exceeds 1e6 SI; if `partial` is given it
/// receives the trace accumulated up to the blowup.
inline SimResult run_scenario(const Scenario& sc, const StateSpace& K,
                              SimTrace* partial = nullptr) {
    sc.validate();
    if (!K.dt || std::abs(*K.dt - sc.control_dt) > 1e-12)
        throw ConfigError("run_scenario: controller must be discrete at the control rate");
    const int substeps = static_cast<int>(std::round(sc.control_dt / sc.plant_dt));
    const std::size_t steps =
        static_cast<std::size_t>(std::round(sc.duration / sc.control_dt));

    PlantEnv env{sc.mode, sc.filter, sc.l2, sc.r2};
    PlantState ps;
    Vector xk = Vector::Zero(K.order());
    PLLState pll;
    pll.omega_n = sc.omega_n;
    DroopState droop;
    droop.omega_n = sc.omega_n;
    droop.v_n = sc.v_n;
    droop.n_p = 2.0 * M_PI * 0.5 / sc.p_rated;
    droop.m_q = 0.05 * sc.v_n / sc.q_rated;
    // quadrature generators for the droop's instantaneous powers
    double va = 0.0, vb = 0.0, ia = 0.0, ib = 0.0;

    double p_ref = sc.p_ref, q_ref = sc.q_ref;
    // grid-presence interlock and hard current limit: until the PLL
    // amplitude estimate reaches half the nominal voltage, the current
    // command stays zero (i_ref ~ S/V_est would otherwise blow up on the
    // tiny early estimate and slam the plant before lock)
    bool pll_locked = false;
    const double i_limit = 2.0 * M_SQRT2 * sc.s_rated / sc.v_n;
    std::vector<Harmonic> harmonics = sc.harmonics;
    std::size_t next_event = 0;

    SimResult res;
    SimTrace& tr = res.trace;
    tr.dt = sc.control_dt;
    double first_event_t = sc.events.empty() ? sc.duration : sc.events.front().time;

    auto exogenous = [&](double t) {
        double x = 0.0;
        if (sc.mode == Mode::GFL) x = M_SQRT2 * sc.v_n * std::sin(sc.omega_n * t);
        for (const Harmonic& h : harmonics)
            x += h.amplitude * std::sin(h.order * sc.omega_n * t + h.phase);
        return x;
    };

    for (std::size_t step = 0; step < steps; ++step) {
        const double t = step * sc.control_dt;
        while (next_event < sc.events.size() &&
               sc.events[next_event].time <= t + 1e-12) {
            const SimEvent& ev = sc.events[next_event++];
            switch (ev.kind) {
            case SimEvent::SetPQ:
                p_ref = ev.a;
                q_ref = ev.b;
                break;
            case SimEvent::StepThevenin:
                env.l2 *= ev.a;
                env.r2 *= ev.a;
                break;
            case SimEvent::StepLoad: {
                // loading fraction scales admittance: Z = Z_rated / loading
                LoadSpec ls;
                ls.s_rated = sc.s_rated;
                ls.p_rated = sc.p_rated;
                ls.q_rated = sc.q_rated;
                ls.v_n = sc.v_n;
                ls.omega_n = sc.omega_n;
                LoadNominal ln = load_nominal_from_rating(ls);
                env.l2 = ln.l_load / ev.a;
                env.r2 = ln.r_load / ev.a;
                break;
            }
            case SimEvent::InjectHarmonics:
                harmonics = ev.harmonics;
                break;
            }
        }

        const double out = sc.mode == Mode::GFL ? ps.i_o : ps.v_o;
        double ref = 0.0;
        if (sc.mode == Mode::GFL) {
            pll = pll_step(pll, ps.v_o, sc.control_dt);
            if (pll.v_rms > 0.5 * sc.v_n) pll_locked = true;
            ref = pll_locked && pll.v_rms > 1.0
                      ? std::clamp(gfl_reference(pll, p_ref, q_ref), -i_limit,
                                   i_limit)
                      : 0.0;
        } else {
            detail::sogi_step(va, vb, ps.v_o, sc.omega_n, M_SQRT2, sc.control_dt);
            detail::sogi_step(ia, ib, ps.i_o, sc.omega_n, M_SQRT2, sc.control_dt);
            const double p_inst = 0.5 * (va * ia + vb * ib);
            const double q_inst = 0.5 * (vb * ia - va * ib);
            ref = droop_reference(droop, p_inst, q_inst, sc.control_dt);
        }

        const double e = ref - out;
        double u = (K.D * Vector::Constant(1, e))(0);
        if (K.order() > 0) {
            u += (K.C * xk)(0);
            xk = K.A * xk + K.B * Vector::Constant(1, e);
        }

        double dist = 0.0;
        for (int sub = 0; sub < substeps; ++sub) {
            const double ts = t + sub * sc.plant_dt;
            dist = exogenous(ts);
            ps = step_plant(ps, env, u, dist, sc.plant_dt);
        }

        tr.t.push_back(t);
        tr.ref.push_back(ref);
        tr.out.push_back(out);
        tr.v_inv.push_back(u);
        tr.dist.push_back(dist);
        if (!std::isfinite(ps.i_l) || !std::isfinite(ps.v_o) ||
            !std::isfinite(ps.i_o) || std::abs(ps.i_l) > 1e6 ||
            std::abs(ps.v_o) > 1e6 || std::abs(ps.i_o) > 1e6) {
            if (partial) *partial = tr;
            throw NumericalBlowup("run_scenario: state exceeded 1e6 at t = " +
                                  std::to_string(t));
        }
    }

    const double rated_rms = sc.s_rated / sc.v_n;
    res.pre = compute_metrics(sc.mode, tr, first_event_t, 10.0,
                              sc.omega_n, rated_rms);
    res.post = compute_metrics(sc.mode, tr, steps * sc.control_dt, 10.0,
                               sc.omega_n, rated_rms);
    return res;
}

// ---------------------------------------------------------------------------
// The four benchmark scenarios

/// CASE-1: GFL P-Q reference steps up 50% at t = 0.5 s.
/// CASE-2: GFL Thevenin impedance steps up 30% at t = 0.5 s.
/// CASE-3: GFM no-load (5%) to full-load step at t = 0.5 s, harmonics on.
/// CASE-4: GFM full-load to no-load step at t = 0.5 s, harmonics on.
inline Scenario make_case(int n, const FilterParams& f, const GridSpec& gs,
                          const LoadSpec& ls) {
    Scenario sc;
    sc.filter = f;
    sc.v_n = gs.v_pc_nominal;
    sc.omega_n = gs.omega_n;
    sc.s_rated = ls.s_rated;
    sc.p_rated = ls.p_rated;
    sc.q_rated = ls.q_rated;
    const double i_pk = M_SQRT2 * ls.s_rated / ls.v_n;
    const double v_pk = M_SQRT2 * gs.v_pc_nominal;
    switch (n) {
    case 1:
    case 2: {
        sc.mode = Mode::GFL;
        TheveninNominal th = grid_thevenin_from_scr(gs);
        sc.l2 = th.l_th;
        sc.r2 = th.r_th;
        sc.p_ref = 0.6 * ls.p_rated;
        sc.q_ref = 0.6 * ls.q_rated;
        // background grid-voltage distortion, typical distribution levels
        sc.harmonics = {{3, 0.01 * v_pk, 0.4}, {5, 0.007 * v_pk, 1.1},
                        {7, 0.005 * v_pk, 2.3}};
        if (n == 1)
            sc.events.push_back({0.5, SimEvent::SetPQ, 0.9 * ls.p_rated,
                                 0.9 * ls.q_rated, {}});
        else
            sc.events.push_back({0.5, SimEvent::StepThevenin, 1.3, 0.0, {}});
        break;
    }
    case 3:
    case 4: {
        sc.mode = Mode::GFM;
        LoadNominal ln = load_nominal_from_rating(ls);
        const double start = n == 3 ? ls.loading_min : 1.0;
        const double after = n == 3 ? 1.0 : ls.loading_min;
        sc.l2 = ln.l_load / start;
        sc.r2 = ln.r_load / start;
        // harmonic current load at 4%/3%/2% of rated
        sc.harmonics = {{3, 0.04 * i_pk, 0.0}, {5, 0.03 * i_pk, 0.7},
                        {7, 0.02 * i_pk, 1.9}};
        sc.events.push_back({0.5, SimEvent::StepLoad, after, 0.0, {}});
        break;
    }
    default:
        throw ConfigError("make_case: case must be 1..4");
    }
    return sc;
}

} // namespace invctl
