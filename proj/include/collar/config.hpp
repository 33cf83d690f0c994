#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "collar/errors.hpp"
#include "collar/io.hpp"
#include "collar/solver.hpp"

namespace collar {

// ---------------------------------------------------------------------------
// Typed configuration
// ---------------------------------------------------------------------------

enum class ExperimentKind { solve, family, barrier_certify, duality, attainment, dichotomy_sweep, hypothesis_report };

constexpr std::string_view to_string(ExperimentKind k) {
    switch (k) {
    case ExperimentKind::solve: return "solve";
    case ExperimentKind::family: return "family";
    case ExperimentKind::barrier_certify: return "barrier-certify";
    case ExperimentKind::duality: return "duality";
    case ExperimentKind::attainment: return "attainment";
    case ExperimentKind::dichotomy_sweep: return "dichotomy-sweep";
    case ExperimentKind::hypothesis_report: return "hypothesis-report";
    }
    return "?";
}

struct DomainSpec {
    DomainKind kind = DomainKind::interval;
    double lower = 0.0;       // interval start or annulus inner radius
    double upper = 1.0;       // interval end or outer radius
    int dimension = 1;
    std::optional<double> collar_cap;
};

struct DensitySpec {
    std::string kind = "constant";   // constant | power-law | table
    double value = 1.0;
    double alpha = 0.0;
    double coefficient = 1.0;
    std::string file;
};

struct NonlinearitySpec {
    std::string kind = "linear";     // linear | porous-medium | nondegenerate | table
    double slope = 1.0;
    double exponent = 2.0;
    std::string file;
    std::optional<double> surrogate_threshold;
    std::optional<double> surrogate_floor;
};

struct BoundarySpec {
    std::string kind = "constant";   // constant | per-side | oscillating | pme-exact
    double value = 0.0;
    double value_lower = 0.0;
    double value_upper = 0.0;
    double amplitude = 0.0;
    double frequency = 1.0;
    double positivity_floor = 0.0;
    double blowup = 1.0;
};

struct InitialSpec {
    std::string kind = "constant";   // constant | sine | pme-exact | ramp
    double value = 0.0;
    double amplitude = 1.0;
    double value_lower = 0.0;
    double value_upper = 0.0;
    double blowup = 1.0;
};

struct NumericsSpec {
    std::size_t nodes = 101;
    double dt = 1e-3;
    double horizon = 1.0;
    double newton_tol = 1e-10;
    int max_iterations = 50;
    double kappa = 1e-8;
    Stepping stepping = Stepping::implicit_newton;
    std::size_t store_stride = 1;
    double eta0 = 0.1;
    std::optional<double> blend_width;
};

struct ExperimentSpec {
    ExperimentKind kind = ExperimentKind::solve;
    double eps = 0.0;
    double eta = 0.0;
    std::vector<double> eps_levels;
    std::vector<double> eta_levels;
    std::vector<double> alpha_levels;
    std::optional<double> tau;
    double threshold = 0.05;
    std::optional<double> probe_distance;
    // barrier-certify
    BarrierCase barrier_case = BarrierCase::v_timed;
    std::string side = "both";        // lower | upper | both
    double anchor = 0.0;
    double anchor_time = 0.5;
    double sigma = 0.1;
    std::optional<double> delta;
    std::optional<double> potential_scale;
    double curvature_margin = 2.0;
    std::optional<double> miller_radius;
    std::optional<double> miller_steepness;
    std::vector<double> residual_nodes;
    std::optional<double> residual_dt;
    bool negative_control = true;
    // duality
    std::vector<std::string> sources = {"indicator", "hat", "bump"};
    double source_center = 0.5;
    double source_half_width = 0.1;
    // dichotomy-sweep
    double phi_alternate = 1.0;
};

struct ExperimentConfig {
    DomainSpec domain;
    DensitySpec density;
    NonlinearitySpec nonlinearity;
    BoundarySpec boundary;
    InitialSpec initial;
    NumericsSpec numerics;
    ExperimentSpec experiment;
    std::string base_dir = ".";       // relative table paths resolve against the config's directory

    double tau() const { return experiment.tau.value_or(numerics.horizon / 10.0); }
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

[[noreturn]] inline void parse_fail(int line, const std::string& msg) {
    fail(ErrorKind::parse, "line " + std::to_string(line) + ": " + msg);
}

inline double to_double(const std::string& v, int line) {
    double out = 0.0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end || !std::isfinite(out)) parse_fail(line, "expected a number, got '" + v + "'");
    return out;
}

inline long to_integer(const std::string& v, int line) {
    long out = 0;
    const auto* end = v.data() + v.size();
    auto [p, ec] = std::from_chars(v.data(), end, out);
    if (ec != std::errc() || p != end) parse_fail(line, "expected an integer, got '" + v + "'");
    return out;
}

inline bool to_bool(const std::string& v, int line) {
    if (v == "true" || v == "yes" || v == "1") return true;
    if (v == "false" || v == "no" || v == "0") return false;
    parse_fail(line, "expected true or false, got '" + v + "'");
}

inline std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

inline std::vector<double> to_list(const std::string& v, int line) {
    std::vector<double> out;
    for (const auto& item : split_list(v)) out.push_back(to_double(item, line));
    if (out.empty()) parse_fail(line, "empty list");
    return out;
}

inline std::string one_of(const std::string& v, std::initializer_list<const char*> allowed, int line) {
    for (const char* a : allowed) {
        if (v == a) return v;
    }
    std::string msg = "'" + v + "' is not one of:";
    for (const char* a : allowed) msg += std::string(" ") + a;
    parse_fail(line, msg);
}

using Setter = std::function<void(const std::string&, int)>;
using SectionTable = std::map<std::string, Setter>;

} // namespace detail

/// Strict INI-style parser: sections [domain] [density] [nonlinearity] [boundary]
/// [initial] [numerics] [experiment]; `key = value`; '#' and ';' start comments.
inline ExperimentConfig parse_config(const std::string& text) {
    using namespace detail;
    ExperimentConfig c;
    auto& D = c.domain;
    auto& R = c.density;
    auto& G = c.nonlinearity;
    auto& B = c.boundary;
    auto& I = c.initial;
    auto& N = c.numerics;
    auto& E = c.experiment;
    bool have_kind = false;

    auto num = [](double& dst) { return [&dst](const std::string& v, int l) { dst = to_double(v, l); }; };
    auto opt = [](std::optional<double>& dst) { return [&dst](const std::string& v, int l) { dst = to_double(v, l); }; };
    auto list = [](std::vector<double>& dst) { return [&dst](const std::string& v, int l) { dst = to_list(v, l); }; };
    auto str = [](std::string& dst) { return [&dst](const std::string& v, int) { dst = v; }; };
    auto positive = [](double& dst, const char* what) {
        return [&dst, what](const std::string& v, int l) {
            dst = to_double(v, l);
            if (!(dst > 0.0)) parse_fail(l, std::string(what) + " must be positive");
        };
    };

    std::map<std::string, SectionTable> schema;
    schema["domain"] = {
        {"kind", [&](const std::string& v, int l) {
             const auto k = one_of(v, {"interval", "ball", "annulus"}, l);
             D.kind = k == "interval" ? DomainKind::interval : k == "ball" ? DomainKind::ball : DomainKind::annulus;
         }},
        {"lower", num(D.lower)},
        {"upper", num(D.upper)},
        {"inner_radius", num(D.lower)},
        {"outer_radius", num(D.upper)},
        {"radius", num(D.upper)},
        {"dimension", [&](const std::string& v, int l) {
             const long n = to_integer(v, l);
             if (n < 1 || n > 16) parse_fail(l, "dimension must lie in [1, 16]");
             D.dimension = static_cast<int>(n);
         }},
        {"collar_cap", opt(D.collar_cap)},
    };
    schema["density"] = {
        {"kind", [&](const std::string& v, int l) { R.kind = one_of(v, {"constant", "power-law", "table"}, l); }},
        {"value", positive(R.value, "density value")},
        {"alpha", num(R.alpha)},
        {"coefficient", positive(R.coefficient, "density coefficient")},
        {"file", str(R.file)},
    };
    schema["nonlinearity"] = {
        {"kind", [&](const std::string& v, int l) {
             G.kind = one_of(v, {"linear", "porous-medium", "nondegenerate", "table"}, l);
         }},
        {"slope", positive(G.slope, "slope")},
        {"exponent", num(G.exponent)},
        {"file", str(G.file)},
        {"surrogate_threshold", opt(G.surrogate_threshold)},
        {"surrogate_floor", opt(G.surrogate_floor)},
    };
    schema["boundary"] = {
        {"kind", [&](const std::string& v, int l) {
             B.kind = one_of(v, {"constant", "per-side", "oscillating", "pme-exact"}, l);
         }},
        {"value", num(B.value)},
        {"value_lower", num(B.value_lower)},
        {"value_upper", num(B.value_upper)},
        {"amplitude", num(B.amplitude)},
        {"frequency", num(B.frequency)},
        {"positivity_floor", num(B.positivity_floor)},
        {"blowup", positive(B.blowup, "blowup time")},
    };
    schema["initial"] = {
        {"kind", [&](const std::string& v, int l) {
             I.kind = one_of(v, {"constant", "sine", "pme-exact", "ramp"}, l);
         }},
        {"value", num(I.value)},
        {"amplitude", num(I.amplitude)},
        {"value_lower", num(I.value_lower)},
        {"value_upper", num(I.value_upper)},
        {"blowup", positive(I.blowup, "blowup time")},
    };
    schema["numerics"] = {
        {"nodes", [&](const std::string& v, int l) {
             const long n = to_integer(v, l);
             if (n < static_cast<long>(Grid::min_nodes)) parse_fail(l, "nodes must be at least 16");
             N.nodes = static_cast<std::size_t>(n);
         }},
        {"dt", positive(N.dt, "dt")},
        {"horizon", positive(N.horizon, "horizon")},
        {"newton_tol", positive(N.newton_tol, "newton_tol")},
        {"max_iterations", [&](const std::string& v, int l) {
             const long n = to_integer(v, l);
             if (n < 1) parse_fail(l, "max_iterations must be positive");
             N.max_iterations = static_cast<int>(n);
         }},
        {"kappa", [&](const std::string& v, int l) {
             N.kappa = to_double(v, l);
             if (N.kappa < 0.0) parse_fail(l, "kappa must be nonnegative");
         }},
        {"stepping", [&](const std::string& v, int l) {
             N.stepping = one_of(v, {"implicit", "semi-implicit"}, l) == "implicit" ? Stepping::implicit_newton
                                                                                     : Stepping::semi_implicit_lagged;
         }},
        {"store_stride", [&](const std::string& v, int l) {
             const long n = to_integer(v, l);
             if (n < 1) parse_fail(l, "store_stride must be positive");
             N.store_stride = static_cast<std::size_t>(n);
         }},
        {"eta0", positive(N.eta0, "eta0")},
        {"blend_width", opt(N.blend_width)},
    };
    schema["experiment"] = {
        {"kind", [&](const std::string& v, int l) {
             const auto k = one_of(v, {"solve", "family", "barrier-certify", "duality", "attainment",
                                       "dichotomy-sweep", "hypothesis-report"}, l);
             for (auto e : {ExperimentKind::solve, ExperimentKind::family, ExperimentKind::barrier_certify,
                            ExperimentKind::duality, ExperimentKind::attainment, ExperimentKind::dichotomy_sweep,
                            ExperimentKind::hypothesis_report}) {
                 if (to_string(e) == k) E.kind = e;
             }
             have_kind = true;
         }},
        {"eps", num(E.eps)},
        {"eta", num(E.eta)},
        {"eps_levels", list(E.eps_levels)},
        {"eta_levels", list(E.eta_levels)},
        {"alpha_levels", list(E.alpha_levels)},
        {"tau", opt(E.tau)},
        {"threshold", positive(E.threshold, "threshold")},
        {"probe_distance", opt(E.probe_distance)},
        {"case", [&](const std::string& v, int l) {
             const auto k = one_of(v, {"v-timed", "miller-timed", "v-stationary", "miller-stationary"}, l);
             for (auto b : {BarrierCase::v_timed, BarrierCase::miller_timed, BarrierCase::v_stationary,
                            BarrierCase::miller_stationary}) {
                 if (to_string(b) == k) E.barrier_case = b;
             }
         }},
        {"side", [&](const std::string& v, int l) { E.side = one_of(v, {"lower", "upper", "both"}, l); }},
        {"anchor", num(E.anchor)},
        {"anchor_time", num(E.anchor_time)},
        {"sigma", positive(E.sigma, "sigma")},
        {"delta", opt(E.delta)},
        {"potential_scale", opt(E.potential_scale)},
        {"curvature_margin", num(E.curvature_margin)},
        {"miller_radius", opt(E.miller_radius)},
        {"miller_steepness", opt(E.miller_steepness)},
        {"residual_nodes", list(E.residual_nodes)},
        {"residual_dt", opt(E.residual_dt)},
        {"negative_control", [&](const std::string& v, int l) { E.negative_control = to_bool(v, l); }},
        {"sources", [&](const std::string& v, int l) {
             E.sources.clear();
             for (const auto& s : split_list(v)) E.sources.push_back(one_of(s, {"indicator", "hat", "bump"}, l));
             if (E.sources.empty()) parse_fail(l, "empty list");
         }},
        {"source_center", num(E.source_center)},
        {"source_half_width", positive(E.source_half_width, "source_half_width")},
        {"phi_alternate", num(E.phi_alternate)},
    };

    std::istringstream in(text);
    std::string raw, section;
    int line = 0;
    std::map<std::string, int> seen;
    while (std::getline(in, raw)) {
        ++line;
        std::string s = raw;
        if (const auto pos = s.find_first_of("#;"); pos != std::string::npos) s.erase(pos);
        s = trim(s);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') parse_fail(line, "malformed section header");
            section = trim(s.substr(1, s.size() - 2));
            if (!schema.count(section)) parse_fail(line, "unknown section [" + section + "]");
            continue;
        }
        const auto eq = s.find('=');
        if (eq == std::string::npos) parse_fail(line, "expected 'key = value'");
        if (section.empty()) parse_fail(line, "key outside any section");
        const std::string key = trim(s.substr(0, eq));
        const std::string value = trim(s.substr(eq + 1));
        auto& table = schema[section];
        const auto it = table.find(key);
        if (it == table.end()) parse_fail(line, "unknown key '" + key + "' in [" + section + "]");
        const std::string full = section + "." + key;
        if (seen.count(full)) parse_fail(line, "duplicate key '" + key + "' (first on line " + std::to_string(seen[full]) + ")");
        seen[full] = line;
        if (value.empty()) parse_fail(line, "missing value for '" + key + "'");
        it->second(value, line);
    }
    if (!have_kind) fail(ErrorKind::parse, "missing required key 'kind' in [experiment]");

    auto need = [&](const char* key, const char* why) {
        if (!seen.count(key)) fail(ErrorKind::parse, std::string("missing required key '") + key + "' " + why);
    };
    if (R.kind == "table") need("density.file", "for a table density");
    if (G.kind == "table") need("nonlinearity.file", "for a table nonlinearity");
    if (R.kind == "power-law") need("density.alpha", "for a power-law density");
    if (D.kind != DomainKind::interval) need("domain.dimension", "for a radial domain");
    if (G.surrogate_threshold.has_value() != G.surrogate_floor.has_value()) {
        fail(ErrorKind::parse, "surrogate_threshold and surrogate_floor must be given together");
    }

    switch (E.kind) {
    case ExperimentKind::family:
        require(E.eps_levels.size() >= 4, ErrorKind::config, "family needs at least four eps_levels");
        require(E.eta_levels.size() >= 3, ErrorKind::config, "family needs at least three eta_levels");
        break;
    case ExperimentKind::attainment:
        require(!E.eps_levels.empty(), ErrorKind::config, "attainment needs eps_levels");
        require(E.eta_levels.empty() || E.eta_levels.size() == 1 || E.eta_levels.size() == E.eps_levels.size(),
                ErrorKind::config, "eta_levels must hold one value or one per eps-level");
        break;
    case ExperimentKind::dichotomy_sweep:
        require(!E.alpha_levels.empty(), ErrorKind::config, "dichotomy-sweep needs alpha_levels");
        require(E.eps_levels.size() >= 2, ErrorKind::config, "dichotomy-sweep needs at least two eps_levels");
        break;
    default: break;
    }
    if (E.tau) require(*E.tau > 0.0 && *E.tau < N.horizon, ErrorKind::config, "tau must lie in (0, horizon)");
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::parse, "cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ExperimentConfig c = parse_config(ss.str());
    if (const auto slash = path.find_last_of('/'); slash != std::string::npos) c.base_dir = path.substr(0, slash);
    return c;
}

/// The fully resolved configuration, defaults included.
inline json resolved_json(const ExperimentConfig& c) {
    auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    const auto& E = c.experiment;
    return json{
        {"domain",
         {{"kind", std::string(to_string(c.domain.kind))},
          {"lower", c.domain.lower},
          {"upper", c.domain.upper},
          {"dimension", c.domain.dimension},
          {"collar_cap", opt(c.domain.collar_cap)}}},
        {"density",
         {{"kind", c.density.kind},
          {"value", c.density.value},
          {"alpha", c.density.alpha},
          {"coefficient", c.density.coefficient},
          {"file", c.density.file}}},
        {"nonlinearity",
         {{"kind", c.nonlinearity.kind},
          {"slope", c.nonlinearity.slope},
          {"exponent", c.nonlinearity.exponent},
          {"file", c.nonlinearity.file},
          {"surrogate_threshold", opt(c.nonlinearity.surrogate_threshold)},
          {"surrogate_floor", opt(c.nonlinearity.surrogate_floor)}}},
        {"boundary",
         {{"kind", c.boundary.kind},
          {"value", c.boundary.value},
          {"value_lower", c.boundary.value_lower},
          {"value_upper", c.boundary.value_upper},
          {"amplitude", c.boundary.amplitude},
          {"frequency", c.boundary.frequency},
          {"positivity_floor", c.boundary.positivity_floor},
          {"blowup", c.boundary.blowup}}},
        {"initial",
         {{"kind", c.initial.kind},
          {"value", c.initial.value},
          {"amplitude", c.initial.amplitude},
          {"value_lower", c.initial.value_lower},
          {"value_upper", c.initial.value_upper},
          {"blowup", c.initial.blowup}}},
        {"numerics",
         {{"nodes", c.numerics.nodes},
          {"dt", c.numerics.dt},
          {"horizon", c.numerics.horizon},
          {"newton_tol", c.numerics.newton_tol},
          {"max_iterations", c.numerics.max_iterations},
          {"kappa", c.numerics.kappa},
          {"stepping", c.numerics.stepping == Stepping::implicit_newton ? "implicit" : "semi-implicit"},
          {"store_stride", c.numerics.store_stride},
          {"eta0", c.numerics.eta0},
          {"blend_width", opt(c.numerics.blend_width)}}},
        {"experiment",
         {{"kind", std::string(to_string(E.kind))},
          {"eps", E.eps},
          {"eta", E.eta},
          {"eps_levels", E.eps_levels},
          {"eta_levels", E.eta_levels},
          {"alpha_levels", E.alpha_levels},
          {"tau", c.tau()},
          {"threshold", E.threshold},
          {"probe_distance", opt(E.probe_distance)},
          {"case", std::string(to_string(E.barrier_case))},
          {"side", E.side},
          {"anchor", E.anchor},
          {"anchor_time", E.anchor_time},
          {"sigma", E.sigma},
          {"delta", opt(E.delta)},
          {"potential_scale", opt(E.potential_scale)},
          {"curvature_margin", E.curvature_margin},
          {"miller_radius", opt(E.miller_radius)},
          {"miller_steepness", opt(E.miller_steepness)},
          {"residual_nodes", E.residual_nodes},
          {"residual_dt", opt(E.residual_dt)},
          {"negative_control", E.negative_control},
          {"sources", E.sources},
          {"source_center", E.source_center},
          {"source_half_width", E.source_half_width},
          {"phi_alternate", E.phi_alternate}}},
    };
}

} // namespace collar
