#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "collar/analysis.hpp"
#include "collar/barriers.hpp"
#include "collar/errors.hpp"
#include "collar/models.hpp"
#include "collar/solver.hpp"

namespace collar {

using json = nlohmann::ordered_json;

/// Shortest round-trip decimal form; identical input gives identical text.
inline std::string format_number(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON cannot carry inf/NaN; they become strings.
inline json number_json(double v) {
    if (std::isfinite(v)) return v;
    return format_number(v);
}

/// Header `t,x_<i>,...` over the computational nodes (i indexes the grid), one row per stored time.
inline void write_field_csv(std::ostream& out, const SpaceTimeField& f) {
    out << "t";
    for (std::size_t i = f.dec.lo; i <= f.dec.hi; ++i) out << ",x_" << i;
    out << '\n';
    for (std::size_t k = 0; k < f.times.size(); ++k) {
        out << format_number(f.times[k]);
        for (std::size_t i = f.dec.lo; i <= f.dec.hi; ++i) out << ',' << format_number(f.values[k][i]);
        out << '\n';
    }
}

inline json field_metadata(const SpaceTimeField& f) {
    json coords = json::array();
    for (std::size_t i = f.dec.lo; i <= f.dec.hi; ++i) coords.push_back(f.grid.node(i));
    return json{
        {"eps", f.eps},
        {"eta", f.eta},
        {"dt", f.dt},
        {"K", number_json(f.bound)},
        {"nodes", f.grid.size()},
        {"h", f.grid.spacing()},
        {"first_node", f.dec.lo},
        {"coordinates", coords},
        {"stored_times", f.times.size()},
        {"newton",
         {{"steps", f.stats.steps},
          {"iterations", f.stats.newton_iterations},
          {"max_iterations", f.stats.max_newton_iterations},
          {"halvings", f.stats.halvings},
          {"max_residual", f.stats.max_residual}}},
        {"max_principle", {{"ok", f.max_principle_ok}, {"min", f.min_value}, {"max", f.max_value}}},
    };
}

inline void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::config, "cannot write '" + path + "'");
    out << text;
}

inline void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

inline void write_field(const std::string& stem, const SpaceTimeField& f) {
    std::ofstream out(stem + ".csv", std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::config, "cannot write '" + stem + ".csv'");
    write_field_csv(out, f);
    write_json(stem + ".json", field_metadata(f));
}

inline json to_json(const Verdict& v) {
    return json{{"name", v.name},         {"pass", v.pass},       {"applicable", v.applicable},
                {"method", v.method},     {"samples", v.samples}, {"evidence", number_json(v.evidence)},
                {"detail", v.detail}};
}

inline json to_json(const HypothesisReport& r) {
    json verdicts = json::array();
    for (const auto& v : r.verdicts) verdicts.push_back(to_json(v));
    return json{{"verdicts", verdicts},
                {"h4", {{"finite", r.h4.finite}, {"value", number_json(r.h4.value)}, {"method", r.h4.method}}},
                {"eps_hat", r.eps_hat},
                {"flags", r.flags}};
}

inline json to_json(const BarrierConstants& k) {
    json j{{"M", k.M}, {"M_raw", k.M_raw}};
    if (k.has_lambda) {
        j["lambda"] = k.lambda;
        j["lambda_raw"] = k.lambda_raw;
    }
    if (k.has_beta) {
        j["beta"] = k.beta;
        j["beta_raw"] = k.beta_raw;
    }
    return j;
}

inline json to_json(const ResidualReport& r) {
    return json{{"max_residual", number_json(r.max_residual)},
                {"min_residual", number_json(r.min_residual)},
                {"worst_x", r.worst_axial},
                {"worst_t", r.worst_time},
                {"tolerance", r.tolerance},
                {"c_res", r.c_res},
                {"nodes", r.nodes},
                {"times", r.times},
                {"pass", r.pass}};
}

inline json to_json(const OrderVerdict& v) {
    return json{{"pass", v.pass}, {"worst", v.worst}, {"x", v.worst_node}, {"t", v.worst_time}, {"checked", v.checked}};
}

inline json to_json(const AttainmentReport& r) {
    return json{{"eps_levels", r.eps_levels}, {"sups", r.sups},         {"tau", r.tau},
                {"threshold", r.threshold},   {"decreasing", r.decreasing}, {"attained", r.attained}};
}

inline json to_json(const LimitDiagnostics& d) {
    return json{{"eps_levels", d.eps_levels},
                {"eta_levels", d.eta_levels},
                {"eps_differences", d.eps_differences},
                {"eta_differences", d.eta_differences},
                {"probe_nodes", d.probe.size()},
                {"eps_converged", d.eps_converged},
                {"eta_converged", d.eta_converged},
                {"converged", d.converged}};
}

} // namespace collar
