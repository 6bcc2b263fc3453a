#pragma once

// JSON and CSV serialisation. JSON numbers use nlohmann's shortest
// round-trip formatting; CSV columns are printed with 17 significant digits.

#include "bandctl/error.hpp"
#include "bandctl/fd_oracle.hpp"
#include "bandctl/model.hpp"
#include "bandctl/policy.hpp"
#include "bandctl/qvi.hpp"
#include "bandctl/simulate.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>

namespace bandctl::io {

using nlohmann::json;

inline constexpr const char* kParamKeys[] = {"mu",      "sigma",   "r",      "c_plus",
                                             "c_minus", "k_plus",  "k_minus"};

/// Parses a flat parameter record. Every key is required and must be a
/// finite number; unknown keys are rejected. The result is validated.
inline ModelParams params_from_json(const json& j) {
    if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "parameter file must hold an object");
    const std::set<std::string> known(std::begin(kParamKeys), std::end(kParamKeys));
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw Error(ErrorKind::InvalidConfig, "unknown parameter key '" + key + "'");
    auto get = [&](const char* key) {
        if (!j.contains(key)) throw Error(ErrorKind::InvalidConfig, std::string("missing parameter '") + key + "'");
        const json& v = j.at(key);
        if (!v.is_number()) throw Error(ErrorKind::InvalidConfig, std::string("parameter '") + key + "' is not a number");
        return v.get<double>();
    };
    ModelParams p{get("mu"),      get("sigma"),  get("r"),      get("c_plus"),
                  get("c_minus"), get("k_plus"), get("k_minus")};
    return validate_params(p);
}

inline json to_json(const ModelParams& p) {
    return {{"mu", p.mu},           {"sigma", p.sigma},    {"r", p.r},
            {"c_plus", p.c_plus},   {"c_minus", p.c_minus}, {"k_plus", p.K_plus},
            {"k_minus", p.K_minus}};
}

inline ModelParams read_params(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::InvalidConfig, "cannot open parameter file '" + path + "'");
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidConfig, "malformed JSON in '" + path + "': " + e.what());
    }
    return params_from_json(j);
}

inline json to_json(const DerivedConstants& c) {
    return {{"gamma", c.gamma}, {"rho1", c.rho1},         {"rho2", c.rho2},
            {"beta", c.beta},   {"lambda", c.lambda_const}, {"x_tilde0", c.x_tilde0}};
}

inline json to_json(const ValueFunction& vf) {
    const BandPolicy& pol = vf.policy;
    const AuxSolution& s = vf.aux;
    json j = {{"regime", to_string(pol.regime)},
              {"a", pol.a},
              {"A", pol.A},
              {"B", pol.B},
              {"b", pol.b},
              {"S_star", pol.S_star},
              {"x0", pol.x0},
              {"M_star", s.M_star},
              {"K_plus_bar", s.K_plus_bar},
              {"A_bar", s.A_bar},
              {"B_bar", s.B_bar},
              {"b_bar", s.b_bar},
              {"x_bar", s.x_bar},
              {"a1", s.a1},
              {"a2", s.a2},
              {"V0", V_eval(0.0, vf).value},
              {"constants", to_json(s.constants)},
              {"params", to_json(s.params)}};
    if (!vf.note.empty()) j["note"] = vf.note;
    return j;
}

inline Regime regime_from_string(const std::string& s) {
    if (s == "BandFull") return Regime::BandFull;
    if (s == "DividendOnly") return Regime::DividendOnly;
    throw Error(ErrorKind::InvalidConfig, "unknown regime '" + s + "'");
}

inline BandPolicy policy_from_json(const json& j) {
    BandPolicy pol;
    pol.regime = regime_from_string(j.at("regime").get<std::string>());
    pol.a = j.at("a").get<double>();
    pol.A = j.at("A").get<double>();
    pol.B = j.at("B").get<double>();
    pol.b = j.at("b").get<double>();
    pol.S_star = j.at("S_star").get<double>();
    pol.x0 = j.at("x0").get<double>();
    return pol;
}

inline json to_json(const QviReport& r, bool with_points = false) {
    json boundary = json::array();
    for (const auto& b : r.boundary) boundary.push_back({{"check", b.name}, {"residual", b.residual}});
    json j = {{"pass", r.pass},
              {"tol", r.tol},
              {"n_grid", r.points.size()},
              {"intervention_at_zero", r.intervention_at_zero},
              {"worst_continuation", {{"value", r.worst_continuation}, {"x", r.worst_continuation_x}}},
              {"worst_equation", {{"value", r.worst_equation}, {"x", r.worst_equation_x}}},
              {"worst_intervention", {{"value", r.worst_intervention}, {"x", r.worst_intervention_x}}},
              {"worst_tightness", {{"value", r.worst_tightness}, {"x", r.worst_tightness_x}}},
              {"worst_boundary", r.worst_boundary},
              {"boundary", boundary}};
    json kinks = json::array();
    for (const auto& pt : r.points)
        if (pt.kink) kinks.push_back(pt.x);
    j["kink_points"] = kinks;
    if (with_points) {
        json pts = json::array();
        for (const auto& pt : r.points)
            pts.push_back({{"x", pt.x},
                           {"continuation", pt.continuation},
                           {"u", pt.argmin_u},
                           {"intervention", pt.intervention},
                           {"tightness", pt.tightness}});
        j["points"] = pts;
    }
    return j;
}

inline json to_json(const SimResult& r) {
    return {{"method", to_string(r.method)},
            {"n_paths", r.n_paths},
            {"mean_cost", r.mean_cost},
            {"std_error", r.std_error},
            {"ruin_fraction", r.ruin_fraction},
            {"n_calls", r.n_calls},
            {"n_refunds", r.n_refunds},
            {"truncation_bound", r.truncation_bound}};
}

inline json to_json(const FdComparison& c, const GridSolution& g) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"h", g.h},
            {"x_max", g.x_max},
            {"nodes", g.size()},
            {"outer_iterations", g.outer_iterations},
            {"last_change", g.last_change},
            {"sup_error", c.sup_error},
            {"sup_error_x", c.sup_error_x},
            {"rms_error", c.rms_error},
            {"b_detected", num(c.b_detected)},
            {"B_detected", num(c.B_detected)},
            {"A_detected", num(c.A_detected)},
            {"lower_set_empty", c.lower_set_empty},
            {"bands_within_2h", c.bands_within_2h}};
}

/// Formats a double with 17 significant digits.
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// x, V, V', V'', u over [from, to] with the given step.
inline void write_table_csv(std::ostream& os, const ValueFunction& vf, double from, double to,
                            double step) {
    if (!(step > 0.0) || !(to >= from) || !(from >= 0.0))
        throw Error(ErrorKind::InvalidConfig, "table needs 0 <= from <= to and step > 0");
    os << "x,V,Vp,Vpp,u\n";
    const auto n = static_cast<long long>(std::floor((to - from) / step + 1e-9));
    for (long long i = 0; i <= n; ++i) {
        const double x = from + static_cast<double>(i) * step;
        const Derivs d = V_eval(x, vf);
        os << fmt17(x) << ',' << fmt17(d.value) << ',' << fmt17(d.slope) << ','
           << fmt17(d.curvature) << ',' << fmt17(feedback_u(x, vf)) << '\n';
    }
}

inline void write_residuals_csv(std::ostream& os, const QviReport& r) {
    os << "x,continuation,u,intervention,tightness,kink\n";
    for (const auto& pt : r.points)
        os << fmt17(pt.x) << ',' << fmt17(pt.continuation) << ',' << fmt17(pt.argmin_u) << ','
           << fmt17(pt.intervention) << ',' << fmt17(pt.tightness) << ',' << (pt.kink ? 1 : 0)
           << '\n';
}

inline void write_fd_csv(std::ostream& os, const GridSolution& g, const ValueFunction& vf) {
    os << "x,V_fd,V_analytic,u_fd,action\n";
    for (std::size_t i = 0; i < g.size(); ++i) {
        const double x = g.x(i);
        os << fmt17(x) << ',' << fmt17(g.values[i]) << ',' << fmt17(V_eval(x, vf).value) << ','
           << fmt17(g.u[i]) << ',' << to_string(g.action[i]) << '\n';
    }
}

/// Intervention log rows: path, time, xi, discounted cost term.
inline void write_intervention_header(std::ostream& os) {
    os << "path,time,xi,discounted_cost_term\n";
}

inline void write_interventions_csv(std::ostream& os, std::uint64_t path, const PathOutcome& o) {
    for (const auto& iv : o.log)
        os << path << ',' << fmt17(iv.time) << ',' << fmt17(iv.xi) << ',' << fmt17(iv.cost_term)
           << '\n';
}

} // namespace bandctl::io
