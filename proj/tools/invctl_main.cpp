// Batch front-end: config parsing, synthesis pipeline orchestration, and
// CSV/JSON artifact emission.
//
// Exit codes: 0 ok, 1 usage/config error, 2 synthesis infeasible or not
// converged, 3 simulation blew up (instability detected).

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include <invctl/config.hpp>
#include <invctl/serialize.hpp>
#include <invctl/sim.hpp>
#include <invctl/synthesis.hpp>

namespace fs = std::filesystem;
using namespace invctl;

namespace {

std::string verdict_table(const MuReport& rep) {
    std::ostringstream os;
    auto row = [&os](const char* cond, const char* thr, const std::string& val,
                     bool ok) {
        char buf[96];
        std::snprintf(buf, sizeof(buf), "  %-4s %-8s %-12s %s\n", cond, thr,
                      val.c_str(), ok ? "pass" : "FAIL");
        os << buf;
    };
    auto num = [](double v) {
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.4f", v);
        return std::string(buf);
    };
    os << "stability assessment\n";
    row("NS", "stable", rep.ns ? "yes" : "no", rep.ns);
    row("NP", "< 1", num(rep.np_norm), rep.nominal_performance());
    row("RS", "< 1", num(rep.rs_peak), rep.robust_stability());
    row("RP", "< 1", num(rep.rp_peak), rep.robust_performance());
    return os.str();
}

Controller load_bundle(const fs::path& out_dir) {
    return controller_from_json(read_json_file((out_dir / "controller.json").string()));
}

/// Scenario for a single sweep cell / custom steady-state run: the standard
/// benchmark environment with no events at the given series branch.
Scenario steady_scenario(const ProjectConfig& cfg, double l2, double r2) {
    Scenario sc = make_case(cfg.mode == Mode::GFL ? 1 : 3, cfg.filter, cfg.grid,
                            cfg.load);
    sc.events.clear();
    sc.l2 = l2;
    sc.r2 = r2;
    sc.duration = cfg.sim.duration;
    sc.control_dt = 1.0 / cfg.synth.fs;
    return sc;
}

int cmd_synth(const ProjectConfig& cfg, const fs::path& out_dir) {
    SynthSetup s = make_setup(cfg);
    DkResult r;
    try {
        r = dk_iterate(s.gp, s.grid, cfg.synth.max_iter, cfg.synth.fs,
                       cfg.synth.gamma_max);
    } catch (const SynthesisInfeasible& e) {
        write_text((out_dir / "summary.txt").string(),
                   std::string("synthesis infeasible: ") + e.what() + "\n");
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    }
    write_text((out_dir / "controller.json").string(),
               controller_to_json(r.controller, r.report).dump(2) + "\n");
    write_mu_csv((out_dir / "mu.csv").string(), r.report);
    std::ostringstream sum;
    sum << verdict_table(r.report);
    sum << "gamma = " << r.controller.gamma << ", iterations = " << r.iterations
        << ", order " << r.controller.order_full << " -> "
        << r.controller.order_reduced << "\n";
    write_text((out_dir / "summary.txt").string(), sum.str());
    std::cout << sum.str();
    return r.converged ? 0 : 2;
}

int cmd_bode(const ProjectConfig& cfg, const fs::path& out_dir,
             const std::string& which) {
    SynthSetup s = make_setup(cfg);
    const FreqGrid grid = s.grid;
    if (which == "open_loop") {
        // resonance migration across the inductance range; the lower vertex
        // of a +-100% interval is exactly zero, so stay just inside it
        for (double d : {-0.95, -0.5, 0.0, 0.5, 1.0}) {
            const double l2 = s.block.Lp.nominal + d * s.block.Lp.half_width;
            RationalTF gi = cfg.mode == Mode::GFL
                                ? gfl_open_loop(cfg.filter, l2, s.r2_nominal).g_inv
                                : gfm_open_loop(cfg.filter, l2, s.r2_nominal).g_inv;
            char name[64];
            std::snprintf(name, sizeof(name), "open_loop_dl%+.1f.csv", d);
            write_bode_csv((out_dir / name).string(), gi, grid);
        }
    } else if (which == "weights") {
        write_bode_csv((out_dir / "weight_ws.csv").string(), make_ws(s.weights), grid);
        write_bode_csv((out_dir / "weight_wcs.csv").string(), make_wcs(s.weights), grid);
        write_bode_csv((out_dir / "weight_wd.csv").string(), make_wd(s.weights), grid);
    } else if (which == "closed_loop") {
        Controller c = load_bundle(out_dir);
        ClosedLoopEquivalents eq = closed_loop_equivalents(
            cfg.mode, cfg.filter, s.l2_nominal, s.r2_nominal, c.K);
        write_bode_csv((out_dir / "closed_loop_g_track.csv").string(), eq.g_track, grid);
        write_bode_csv((out_dir / "closed_loop_y_out.csv").string(), eq.y_out, grid);
    } else {
        std::cerr << "unknown --which '" << which
                  << "' (open_loop | weights | closed_loop)\n";
        return 1;
    }
    return 0;
}

int cmd_simulate(const ProjectConfig& cfg, const fs::path& out_dir, int which_case) {
    Controller c = load_bundle(out_dir);
    Scenario sc;
    if (which_case == 0) {
        SynthSetup s = make_setup(cfg);
        sc = steady_scenario(cfg, s.l2_nominal, s.r2_nominal);
    } else {
        sc = make_case(which_case, cfg.filter, cfg.grid, cfg.load);
        sc.control_dt = 1.0 / cfg.synth.fs;
    }
    const std::string tag = "case" + std::to_string(which_case);
    SimTrace partial;
    SimResult r;
    try {
        r = run_scenario(sc, c.K_discrete, &partial);
    } catch (const NumericalBlowup& e) {
        write_trace_csv((out_dir / ("trace_" + tag + ".csv")).string(), partial);
        std::cerr << "unstable: " << e.what() << "\n";
        return 3;
    }
    write_trace_csv((out_dir / ("trace_" + tag + ".csv")).string(), r.trace);
    Json j;
    j["pre"] = metrics_to_json(sc.mode, r.pre);
    j["post"] = metrics_to_json(sc.mode, r.post);
    if (sc.mode == Mode::GFL) {
        j["ricte_pre"] = r.pre.ricte;
        j["ricte_post"] = r.post.ricte;
    } else {
        j["rivte_pre"] = r.pre.rivte;
        j["rivte_post"] = r.post.rivte;
        j["thd_v"] = r.post.thd_v;
    }
    write_text((out_dir / ("metrics_" + tag + ".json")).string(), j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_sweep(const ProjectConfig& cfg, const fs::path& out_dir) {
    Controller c = load_bundle(out_dir);
    SynthSetup s = make_setup(cfg);
    std::ofstream f((out_dir / "sweep.csv").string());
    if (!f) throw Error("cannot open sweep.csv");
    f << std::setprecision(12)
      << "delta_l,delta_r,stable,track_err_pct,distortion_pct\n";
    for (double dl : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
        for (double dr : {-1.0, -0.5, 0.0, 0.5, 1.0}) {
            // the -1 vertex of a +-100% interval is a degenerate (zero
            // inductance) branch the integrator cannot represent; simulate
            // just inside it
            const double floor_l = 5e-3 * s.block.Lp.nominal;
            const double floor_r = 5e-3 * s.block.Rp.nominal;
            const double l2 = std::max(
                s.block.Lp.nominal + dl * s.block.Lp.half_width, floor_l);
            const double r2 = std::max(
                s.block.Rp.nominal + dr * s.block.Rp.half_width, floor_r);
            Scenario sc = steady_scenario(cfg, l2, r2);
            bool stable = true;
            Metrics m;
            try {
                SimResult r = run_scenario(sc, c.K_discrete);
                m = r.post;
            } catch (const NumericalBlowup&) {
                stable = false;
            }
            const double track = cfg.mode == Mode::GFL ? m.ricte : m.rivte;
            const double dist = cfg.mode == Mode::GFL ? m.tdd_i : m.thd_v;
            f << dl << ',' << dr << ',' << (stable ? 1 : 0) << ','
              << (stable ? track : -1.0) << ',' << (stable ? dist : -1.0)
              << '\n';
        }
    }
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"robust inverter controller synthesis and simulation"};
    app.require_subcommand(1);
    std::string config_path, out_str = "out", which = "open_loop";
    int which_case = 1;

    auto add_common = [&](CLI::App* sub, bool need_config) {
        auto* opt = sub->add_option("--config", config_path, "project config file");
        if (need_config) opt->required();
        sub->add_option("--out", out_str, "output directory");
    };
    CLI::App* synth = app.add_subcommand("synth", "synthesize and verify a controller");
    add_common(synth, true);
    CLI::App* bode = app.add_subcommand("bode", "frequency-response CSV export");
    add_common(bode, true);
    bode->add_option("--which", which, "open_loop | weights | closed_loop");
    CLI::App* simulate = app.add_subcommand("simulate", "run a benchmark scenario");
    add_common(simulate, true);
    simulate->add_option("--case", which_case, "1..4, or 0 for steady state")
        ->check(CLI::Range(0, 4));
    CLI::App* sweep = app.add_subcommand("sweep", "5x5 uncertainty-vertex re-simulation");
    add_common(sweep, true);
    CLI::App* dump = app.add_subcommand("dump-effective-config",
                                        "print the fully-populated config");
    add_common(dump, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        ProjectConfig cfg =
            config_path.empty() ? ProjectConfig{} : load_config(config_path);
        if (dump->parsed()) {
            std::cout << dump_effective_config(cfg);
            return 0;
        }
        fs::path out_dir(out_str);
        fs::create_directories(out_dir);
        if (synth->parsed()) return cmd_synth(cfg, out_dir);
        if (bode->parsed()) return cmd_bode(cfg, out_dir, which);
        if (simulate->parsed()) return cmd_simulate(cfg, out_dir, which_case);
        if (sweep->parsed()) return cmd_sweep(cfg, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 1;
    } catch (const MissingArtifact& e) {
        std::cerr << "missing artifact: " << e.what() << "\n";
        return 1;
    } catch (const SynthesisInfeasible& e) {
        std::cerr << "infeasible: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
