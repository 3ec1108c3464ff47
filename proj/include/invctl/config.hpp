#pragma once

// Flat, diff-able key = value project configuration: parsing with
// unknown-keys-are-errors, effective-value dumping, and construction of the
// synthesis inputs shared by the CLI and the acceptance checks.

#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "plant.hpp"
#include "uncertainty.hpp"
#include "weights.hpp"

namespace invctl {

struct SynthOptions {
    double gamma_max = 1e3;
    int max_iter = 10;
    double fs = 20e3; // controller sample rate, Hz
};

struct SimOptions {
    double duration = 1.0; // s
};

struct ProjectConfig {
    Mode mode = Mode::GFL;
    FilterParams filter;
    GridSpec grid;
    LoadSpec load;
    // multiplies both uncertainty half-widths; 1 = the design range
    // (+-100% Thevenin / 5%-200% loading), 0 = nominal-only
    double uncertainty_scale = 1.0;
    WeightConfig weights;
    SynthOptions synth;
    SimOptions sim;
    std::string out_dir = "out";

    ProjectConfig() {
        weights.omega_r = 0.0; // 0 = derive from the plant resonance
    }
};

namespace detail {

struct ConfigKey {
    std::string name;
    std::function<std::string(const ProjectConfig&)> get;
    std::function<void(ProjectConfig&, const std::string&)> set;
};

inline std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

inline double parse_double(const std::string& key, const std::string& raw) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
        v = std::stod(raw, &pos);
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + raw + "'");
    }
    if (pos != raw.size())
        throw ConfigError("config: trailing junk in " + key + ": '" + raw + "'");
    return v;
}

inline int parse_int(const std::string& key, const std::string& raw) {
    const double v = parse_double(key, raw);
    if (std::abs(v - std::round(v)) > 1e-12)
        throw ConfigError("config: " + key + " must be an integer");
    return static_cast<int>(std::llround(v));
}

inline const std::vector<ConfigKey>& config_keys() {
    auto field = [](const std::string& name, auto access) {
        return ConfigKey{
            name,
            [access](const ProjectConfig& c) {
                return format_double(access(const_cast<ProjectConfig&>(c)));
            },
            [access, name](ProjectConfig& c, const std::string& raw) {
                access(c) = parse_double(name, raw);
            }};
    };
    static const std::vector<ConfigKey> keys = {
        ConfigKey{"mode",
                  [](const ProjectConfig& c) {
                      return std::string(c.mode == Mode::GFL ? "gfl" : "gfm");
                  },
                  [](ProjectConfig& c, const std::string& raw) {
                      if (raw == "gfl")
                          c.mode = Mode::GFL;
                      else if (raw == "gfm")
                          c.mode = Mode::GFM;
                      else
                          throw ConfigError("config: mode must be gfl or gfm");
                  }},
        field("filter.l_f", [](ProjectConfig& c) -> double& { return c.filter.l_f; }),
        field("filter.r_f", [](ProjectConfig& c) -> double& { return c.filter.r_f; }),
        field("filter.c_f", [](ProjectConfig& c) -> double& { return c.filter.c_f; }),
        field("grid.scr", [](ProjectConfig& c) -> double& { return c.grid.scr; }),
        field("grid.x_over_r",
              [](ProjectConfig& c) -> double& { return c.grid.x_over_r; }),
        field("grid.v_pc_nominal",
              [](ProjectConfig& c) -> double& { return c.grid.v_pc_nominal; }),
        field("grid.s_base",
              [](ProjectConfig& c) -> double& { return c.grid.s_base; }),
        field("grid.omega_n",
              [](ProjectConfig& c) -> double& { return c.grid.omega_n; }),
        field("load.s_rated",
              [](ProjectConfig& c) -> double& { return c.load.s_rated; }),
        field("load.p_rated",
              [](ProjectConfig& c) -> double& { return c.load.p_rated; }),
        field("load.v_n", [](ProjectConfig& c) -> double& { return c.load.v_n; }),
        field("load.loading_min",
              [](ProjectConfig& c) -> double& { return c.load.loading_min; }),
        field("load.loading_max",
              [](ProjectConfig& c) -> double& { return c.load.loading_max; }),
        field("uncertainty.scale",
              [](ProjectConfig& c) -> double& { return c.uncertainty_scale; }),
        field("weights.zeta", [](ProjectConfig& c) -> double& { return c.weights.zeta; }),
        field("weights.k_s2", [](ProjectConfig& c) -> double& { return c.weights.k_s2; }),
        field("weights.k_s3", [](ProjectConfig& c) -> double& { return c.weights.k_s3; }),
        field("weights.omega_r",
              [](ProjectConfig& c) -> double& { return c.weights.omega_r; }),
        field("weights.rolloff_corner",
              [](ProjectConfig& c) -> double& { return c.weights.rolloff_corner; }),
        field("weights.rolloff_dc_gain",
              [](ProjectConfig& c) -> double& { return c.weights.rolloff_dc_gain; }),
        field("weights.k_dc", [](ProjectConfig& c) -> double& { return c.weights.k_dc; }),
        field("weights.dc_corner",
              [](ProjectConfig& c) -> double& { return c.weights.dc_corner; }),
        field("weights.k_cs", [](ProjectConfig& c) -> double& { return c.weights.k_cs; }),
        field("weights.k_cs1",
              [](ProjectConfig& c) -> double& { return c.weights.k_cs1; }),
        field("weights.k_cs2",
              [](ProjectConfig& c) -> double& { return c.weights.k_cs2; }),
        field("weights.k_csp",
              [](ProjectConfig& c) -> double& { return c.weights.k_csp; }),
        field("weights.omega_csp",
              [](ProjectConfig& c) -> double& { return c.weights.omega_csp; }),
        field("weights.zeta_csp",
              [](ProjectConfig& c) -> double& { return c.weights.zeta_csp; }),
        field("weights.k_dh_1",
              [](ProjectConfig& c) -> double& { return c.weights.k_dh[0]; }),
        field("weights.k_dh_3",
              [](ProjectConfig& c) -> double& { return c.weights.k_dh[1]; }),
        field("weights.k_dh_5",
              [](ProjectConfig& c) -> double& { return c.weights.k_dh[2]; }),
        field("weights.k_dh_7",
              [](ProjectConfig& c) -> double& { return c.weights.k_dh[3]; }),
        field("weights.k_d_corner",
              [](ProjectConfig& c) -> double& { return c.weights.k_d_corner; }),
        field("synthesis.gamma_max",
              [](ProjectConfig& c) -> double& { return c.synth.gamma_max; }),
        ConfigKey{"synthesis.max_iter",
                  [](const ProjectConfig& c) { return std::to_string(c.synth.max_iter); },
                  [](ProjectConfig& c, const std::string& raw) {
                      c.synth.max_iter = parse_int("synthesis.max_iter", raw);
                  }},
        field("synthesis.fs", [](ProjectConfig& c) -> double& { return c.synth.fs; }),
        field("sim.duration",
              [](ProjectConfig& c) -> double& { return c.sim.duration; }),
        ConfigKey{"output.dir",
                  [](const ProjectConfig& c) { return c.out_dir; },
                  [](ProjectConfig& c, const std::string& raw) { c.out_dir = raw; }},
    };
    return keys;
}

inline std::string trim(const std::string& s) {
    const std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    const std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

} // namespace detail

/// Re-derive the dependent rating fields and validate the result.
inline void finalize_config(ProjectConfig& cfg) {
    cfg.filter.validate();
    if (cfg.uncertainty_scale < 0.0)
        throw ConfigError("config: uncertainty.scale must be >= 0");
    if (cfg.load.s_rated < cfg.load.p_rated)
        throw ConfigError("config: load.s_rated must be >= load.p_rated");
    cfg.load.q_rated = std::sqrt(cfg.load.s_rated * cfg.load.s_rated -
                                 cfg.load.p_rated * cfg.load.p_rated);
    cfg.load.omega_n = cfg.grid.omega_n;
    cfg.weights.omega_n = cfg.grid.omega_n;
    if (cfg.synth.max_iter < 1 || cfg.synth.fs <= 0.0 || cfg.synth.gamma_max <= 0.0)
        throw ConfigError("config: bad synthesis options");
    if (cfg.sim.duration <= 0.0) throw ConfigError("config: bad sim.duration");
}

/// Parse the flat "key = value" text (comments with '#'); unknown or
/// duplicate keys are errors.
inline ProjectConfig parse_config(const std::string& text) {
    ProjectConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::set<std::string> seen;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::size_t hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = detail::trim(line);
        if (line.empty()) continue;
        const std::size_t eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": expected key = value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string val = detail::trim(line.substr(eq + 1));
        const detail::ConfigKey* spec = nullptr;
        for (const detail::ConfigKey& k : detail::config_keys())
            if (k.name == key) spec = &k;
        if (!spec)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": unknown key '" + key + "'");
        if (!seen.insert(key).second)
            throw ConfigError("config line " + std::to_string(lineno) +
                              ": duplicate key '" + key + "'");
        spec->set(cfg, val);
    }
    finalize_config(cfg);
    return cfg;
}

inline ProjectConfig load_config(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot open config: " + path);
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str());
}

/// All keys with their effective values, in schema order.
inline std::string dump_effective_config(const ProjectConfig& cfg) {
    std::ostringstream os;
    for (const detail::ConfigKey& k : detail::config_keys())
        os << k.name << " = " << k.get(cfg) << "\n";
    return os.str();
}

// ---------------------------------------------------------------------------
// Synthesis inputs from a config

struct SynthSetup {
    MDeltaBlock block;      // uncertain series branch
    GeneralizedPlant gp;
    FreqGrid grid;          // verification grid
    WeightConfig weights;   // with omega_r resolved
    double l2_nominal = 0.0;
    double r2_nominal = 0.0;
};

inline SynthSetup make_setup(const ProjectConfig& cfg) {
    UncertainParam lu, ru;
    if (cfg.mode == Mode::GFL) {
        TheveninNominal th = grid_thevenin_from_scr(cfg.grid);
        lu = UncertainParam{th.l_th, cfg.uncertainty_scale * th.l_th};
        ru = UncertainParam{th.r_th, cfg.uncertainty_scale * th.r_th};
    } else {
        LoadNominal ln = load_nominal_from_rating(cfg.load);
        UncertainParam l0 = interval_to_uncertain(ln.l_load / cfg.load.loading_max,
                                                  ln.l_load / cfg.load.loading_min);
        UncertainParam r0 = interval_to_uncertain(ln.r_load / cfg.load.loading_max,
                                                  ln.r_load / cfg.load.loading_min);
        lu = UncertainParam{l0.nominal, cfg.uncertainty_scale * l0.half_width};
        ru = UncertainParam{r0.nominal, cfg.uncertainty_scale * r0.half_width};
    }
    SynthSetup s;
    s.block = build_m_delta(lu, ru);
    s.l2_nominal = lu.nominal;
    s.r2_nominal = ru.nominal;
    s.weights = cfg.weights;
    if (s.weights.omega_r <= 0.0) {
        const RationalTF gi =
            cfg.mode == Mode::GFL
                ? gfl_open_loop(cfg.filter, lu.nominal, ru.nominal).g_inv
                : gfm_open_loop(cfg.filter, lu.nominal, ru.nominal).g_inv;
        s.weights.omega_r = resonant_frequency(gi);
    }
    s.gp = assemble_generalized_plant(cfg.mode, cfg.filter, s.block,
                                      make_ws(s.weights), make_wcs(s.weights),
                                      make_wd(s.weights));
    s.grid = FreqGrid::standard({s.weights.omega_n, s.weights.omega_r});
    return s;
}

} // namespace invctl
