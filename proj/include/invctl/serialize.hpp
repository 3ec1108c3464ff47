#pragma once

// JSON / CSV persistence: StateSpace and controller-bundle JSON, MuReport /
// Bode / SimTrace CSV exports.

#include <fstream>
#include <iomanip>
#include <string>

#include <json.hpp>

#include "errors.hpp"
#include "mu.hpp"
#include "sim.hpp"
#include "synthesis.hpp"

namespace invctl {

using Json = nlohmann::json;

// ---------------------------------------------------------------------------
// StateSpace <-> JSON: {"A":[[...]],"B":[[...]],"C":[[...]],"D":[[...]],
//                       "dt":null|seconds}, row-major

inline Json matrix_to_json(const Matrix& m) {
    Json rows = Json::array();
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        Json row = Json::array();
        for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return rows;
}

inline Matrix matrix_from_json(const Json& j, const std::string& what) {
    if (!j.is_array()) throw ConfigError("matrix " + what + ": expected array");
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    Eigen::Index cols = -1;
    for (const Json& row : j) {
        if (!row.is_array())
            throw ConfigError("matrix " + what + ": expected array of rows");
        if (cols < 0) cols = static_cast<Eigen::Index>(row.size());
        if (static_cast<Eigen::Index>(row.size()) != cols)
            throw ConfigError("matrix " + what + ": ragged rows");
    }
    Matrix m(rows, std::max<Eigen::Index>(cols, 0));
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index k = 0; k < cols; ++k)
            m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)]
                          .get<double>();
    return m;
}

inline Json ss_to_json(const StateSpace& sys) {
    Json j;
    j["A"] = matrix_to_json(sys.A);
    j["B"] = matrix_to_json(sys.B);
    j["C"] = matrix_to_json(sys.C);
    j["D"] = matrix_to_json(sys.D);
    j["dt"] = sys.dt ? Json(*sys.dt) : Json(nullptr);
    return j;
}

inline StateSpace ss_from_json(const Json& j) {
    for (const char* key : {"A", "B", "C", "D", "dt"})
        if (!j.contains(key))
            throw ConfigError(std::string("StateSpace JSON: missing \"") + key +
                              "\"");
    std::optional<double> dt;
    if (!j["dt"].is_null()) dt = j["dt"].get<double>();
    Matrix A = matrix_from_json(j["A"], "A"), B = matrix_from_json(j["B"], "B");
    Matrix C = matrix_from_json(j["C"], "C"), D = matrix_from_json(j["D"], "D");
    // a 0-state system may come back with 0x0 B/C whose free dimension is
    // only recoverable from D
    if (A.rows() == 0) {
        B.resize(0, D.cols());
        C.resize(D.rows(), 0);
    }
    return StateSpace(A, B, C, D, dt);
}

// ---------------------------------------------------------------------------
// Controller bundle JSON: {K, K_reduced, K_discrete, gamma, report summary}

inline Json report_summary_to_json(const MuReport& rep) {
    Json j;
    j["ns"] = rep.ns;
    j["np_norm"] = rep.np_norm;
    j["rs_peak"] = rep.rs_peak;
    j["rp_peak"] = rep.rp_peak;
    j["np_peak_freq"] = rep.np_peak_freq;
    j["rs_peak_freq"] = rep.rs_peak_freq;
    j["rp_peak_freq"] = rep.rp_peak_freq;
    j["nominal_performance"] = rep.nominal_performance();
    j["robust_stability"] = rep.robust_stability();
    j["robust_performance"] = rep.robust_performance();
    return j;
}

inline Json controller_to_json(const Controller& c, const MuReport& rep) {
    Json j;
    j["K"] = ss_to_json(c.K);
    j["K_reduced"] = ss_to_json(c.K_reduced);
    j["K_discrete"] = ss_to_json(c.K_discrete);
    j["gamma"] = c.gamma;
    j["order_full"] = c.order_full;
    j["order_reduced"] = c.order_reduced;
    j["report"] = report_summary_to_json(rep);
    return j;
}

inline Controller controller_from_json(const Json& j) {
    for (const char* key : {"K", "K_reduced", "K_discrete", "gamma"})
        if (!j.contains(key))
            throw ConfigError(std::string("controller JSON: missing \"") + key +
                              "\"");
    Controller c;
    c.K = ss_from_json(j["K"]);
    c.K_reduced = ss_from_json(j["K_reduced"]);
    c.K_discrete = ss_from_json(j["K_discrete"]);
    c.gamma = j["gamma"].get<double>();
    c.order_full = static_cast<int>(c.K.order());
    c.order_reduced = static_cast<int>(c.K_reduced.order());
    return c;
}

// ---------------------------------------------------------------------------
// CSV writers ('.' decimal, comma separator, header row)

namespace detail {

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    f << std::setprecision(12);
    return f;
}

} // namespace detail

/// MuReport CSV: omega, mu_rs, mu_rp, sigma_max_Nzw.
inline void write_mu_csv(const std::string& path, const MuReport& rep) {
    std::ofstream f = detail::open_csv(path);
    f << "omega,mu_rs,mu_rp,sigma_max_Nzw\n";
    for (std::size_t k = 0; k < rep.grid.size(); ++k)
        f << rep.grid.points[k] << ',' << rep.mu_rs[k] << ',' << rep.mu_rp[k]
          << ',' << rep.sigma_nzw[k] << '\n';
}

/// Bode CSV for a SISO system: omega, magnitude in dB, phase in degrees.
inline void write_bode_csv(const std::string& path, const StateSpace& sys,
                           const FreqGrid& grid) {
    if (sys.ninputs() != 1 || sys.noutputs() != 1)
        throw Error("write_bode_csv: SISO systems only");
    std::ofstream f = detail::open_csv(path);
    f << "omega,mag_db,phase_deg\n";
    for (double w : grid.points) {
        const Complex h = sys.eval_jw(w)(0, 0);
        f << w << ',' << 20.0 * std::log10(std::abs(h)) << ','
          << std::arg(h) * 180.0 / M_PI << '\n';
    }
}

/// Bode CSV of a transfer function (used for the weights).
inline void write_bode_csv(const std::string& path, const RationalTF& tf,
                           const FreqGrid& grid) {
    std::ofstream f = detail::open_csv(path);
    f << "omega,mag_db,phase_deg\n";
    for (double w : grid.points) {
        const Complex h = tf.eval_jw(w);
        f << w << ',' << 20.0 * std::log10(std::abs(h)) << ','
          << std::arg(h) * 180.0 / M_PI << '\n';
    }
}

/// SimTrace CSV: t, ref, out, v_inv, dist; one row per controller step.
inline void write_trace_csv(const std::string& path, const SimTrace& tr) {
    std::ofstream f = detail::open_csv(path);
    f << "t,ref,out,v_inv,dist\n";
    for (std::size_t k = 0; k < tr.t.size(); ++k)
        f << tr.t[k] << ',' << tr.ref[k] << ',' << tr.out[k] << ','
          << tr.v_inv[k] << ',' << tr.dist[k] << '\n';
}

inline Json metrics_to_json(Mode mode, const Metrics& m) {
    Json j;
    if (mode == Mode::GFL) {
        j["ricte"] = m.ricte;
        j["tdd_i"] = m.tdd_i;
    } else {
        j["rivte"] = m.rivte;
        j["thd_v"] = m.thd_v;
    }
    return j;
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path);
    if (!f) throw Error("cannot open for writing: " + path);
    f << text;
}

inline Json read_json_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw MissingArtifact("cannot open: " + path);
    Json j;
    try {
        f >> j;
    } catch (const Json::parse_error& e) {
        throw ConfigError(std::string("bad JSON in ") + path + ": " + e.what());
    }
    return j;
}

} // namespace invctl
