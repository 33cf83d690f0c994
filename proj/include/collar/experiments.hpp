#pragma once

#include <chrono>
#include <cmath>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "collar/analysis.hpp"
#include "collar/barriers.hpp"
#include "collar/config.hpp"
#include "collar/io.hpp"
#include "collar/models.hpp"
#include "collar/solver.hpp"

namespace collar {

// ---------------------------------------------------------------------------
// Builders
// ---------------------------------------------------------------------------

inline Domain build_domain(const DomainSpec& s) {
    switch (s.kind) {
    case DomainKind::interval:
        require(s.dimension == 1, ErrorKind::config, "intervals are one-dimensional");
        return Domain::interval(s.lower, s.upper, s.collar_cap);
    case DomainKind::ball: return Domain::ball(s.upper, s.dimension, s.collar_cap);
    case DomainKind::annulus: return Domain::annulus(s.lower, s.upper, s.dimension, s.collar_cap);
    }
    fail(ErrorKind::config, "unknown domain kind");
}

inline std::string resolve_path(const std::string& base, const std::string& file) {
    if (file.empty() || file.front() == '/') return file;
    return (std::filesystem::path(base) / file).string();
}

inline DensityModel build_density(const DensitySpec& s, const Domain& dom, const std::string& base_dir = ".") {
    if (s.kind == "constant") return DensityModel::constant(dom, s.value);
    if (s.kind == "power-law") return DensityModel::power_law(dom, s.alpha, s.coefficient);
    return DensityModel::tabulated(dom, load_table(resolve_path(base_dir, s.file)));
}

inline Nonlinearity build_nonlinearity(const NonlinearitySpec& s, double working_max,
                                       const std::string& base_dir = ".") {
    Nonlinearity g = s.kind == "linear"          ? Nonlinearity::linear(s.slope)
                     : s.kind == "porous-medium" ? Nonlinearity::porous_medium(s.exponent)
                     : s.kind == "nondegenerate" ? Nonlinearity::nondegenerate(s.slope, s.exponent)
                                                 : Nonlinearity::table(load_table(resolve_path(base_dir, s.file)));
    if (s.surrogate_threshold) {
        g = build_nondegenerate_surrogate(g, *s.surrogate_threshold, *s.surrogate_floor, working_max);
    }
    return g;
}

inline BoundaryData build_boundary(const BoundarySpec& s, const Domain& dom) {
    if (s.kind == "constant") {
        return BoundaryData([v = s.value](double, double) { return v; }, false,
                            "constant(" + std::to_string(s.value) + ")", s.positivity_floor);
    }
    if (s.kind == "per-side") {
        const double mid = 0.5 * (dom.lower() + dom.upper());
        return BoundaryData([=](double sb, double) { return sb < mid ? s.value_lower : s.value_upper; }, false,
                            "per-side", s.positivity_floor);
    }
    if (s.kind == "oscillating") {
        return BoundaryData(
            [=](double, double t) { return s.value + s.amplitude * std::sin(2.0 * M_PI * s.frequency * t); }, true,
            "oscillating", s.positivity_floor);
    }
    // x^2 / (12 (T* - t)), the separable porous-medium (m = 2) solution
    return BoundaryData([T = s.blowup](double sb, double t) { return sb * sb / (12.0 * (T - t)); }, true,
                        "pme-exact", s.positivity_floor);
}

inline InitialData build_initial(const InitialSpec& s, const Domain& dom) {
    const double a = dom.lower(), w = dom.width();
    if (s.kind == "constant") return InitialData::constant(s.value);
    if (s.kind == "sine") {
        return InitialData([=](double x) { return s.value + s.amplitude * std::sin(M_PI * (x - a) / w); }, "sine");
    }
    if (s.kind == "ramp") {
        return InitialData([=](double x) { return s.value_lower + (s.value_upper - s.value_lower) * (x - a) / w; },
                           "ramp");
    }
    return InitialData([T = s.blowup](double x) { return x * x / (12.0 * T); }, "pme-exact");
}

inline ModelSet build_models(const ExperimentConfig& c, const Domain& dom) {
    auto phi = build_boundary(c.boundary, dom);
    auto u0 = build_initial(c.initial, dom);
    const double work = std::max(u0.sup_norm(dom), phi.sup_norm(dom, c.numerics.horizon)) + c.numerics.eta0;
    return ModelSet{build_density(c.density, dom, c.base_dir), build_nonlinearity(c.nonlinearity, work, c.base_dir),
                    std::move(phi), std::move(u0)};
}

inline SolverScheme build_scheme(const NumericsSpec& n) {
    SolverScheme s;
    s.stepping = n.stepping;
    s.tolerance = n.newton_tol;
    s.max_iterations = n.max_iterations;
    s.kappa = n.kappa;
    return s;
}

inline ApproxProblem build_problem(const ExperimentConfig& c) {
    const Domain dom = build_domain(c.domain);
    Grid grid(dom, c.numerics.nodes);
    ApproxProblem p{grid, build_models(c, dom)};
    p.eps = c.experiment.eps;
    p.eta = c.experiment.eta;
    p.eta0 = c.numerics.eta0;
    p.horizon = c.numerics.horizon;
    p.dt = c.numerics.dt;
    p.blend_width = c.numerics.blend_width;
    p.store_stride = c.numerics.store_stride;
    return p;
}

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

inline constexpr int exit_pass = 0;
inline constexpr int exit_verdict = 1;
inline constexpr int exit_config = 2;
inline constexpr int exit_numerical = 3;

inline int exit_code_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::step:
    case ErrorKind::solve:
    case ErrorKind::range: return exit_numerical;
    case ErrorKind::hypothesis: return exit_verdict;
    default: return exit_config;
    }
}

struct ExperimentOutcome {
    int exit_code = exit_pass;
    json report;
};

namespace detail {

struct Context {
    const ExperimentConfig& config;
    std::string out;
    unsigned threads;
    json& report;
};

inline std::string path_in(const Context& ctx, const std::string& name) {
    return (std::filesystem::path(ctx.out) / name).string();
}

inline HypothesisReport hypotheses_for(const ApproxProblem& p) {
    return check_hypotheses(p.models.rho, p.models.G, p.models.phi, p.models.u0, p.grid, p.horizon, p.eta0);
}

inline void add_regime_warnings(const HypothesisReport& h, json& report) {
    for (const auto& f : h.flags) report["warnings"].push_back("H4 diverges: " + f);
    if (!h.passes("H5") && !h.passes("ipopositiva")) {
        report["warnings"].push_back("neither H5 nor the positivity condition holds");
    }
}

inline bool run_hypothesis_report(Context& ctx) {
    const auto p = build_problem(ctx.config);
    const auto h = hypotheses_for(p);
    ctx.report["hypotheses"] = to_json(h);
    add_regime_warnings(h, ctx.report);
    write_json(path_in(ctx, "hypotheses.json"), to_json(h));
    return h.passes("H1") && h.passes("H2") && h.passes("H3");
}

inline bool run_solve(Context& ctx) {
    const auto p = build_problem(ctx.config);
    const auto h = hypotheses_for(p);
    ctx.report["hypotheses"] = to_json(h);
    add_regime_warnings(h, ctx.report);
    const auto field = solve_eps_eta(p, build_scheme(ctx.config.numerics));
    write_field(path_in(ctx, "trajectory"), field);
    ctx.report["solve"] = field_metadata(field);
    ctx.report["solve"].erase("coordinates");
    return field.max_principle_ok;
}

inline bool run_family(Context& ctx) {
    const auto& E = ctx.config.experiment;
    const auto p = build_problem(ctx.config);
    const auto h = hypotheses_for(p);
    add_regime_warnings(h, ctx.report);
    const auto r = extract_limit_solution(p, E.eps_levels, E.eta_levels, build_scheme(ctx.config.numerics),
                                          ctx.threads, E.probe_distance);
    write_field(path_in(ctx, "limit"), r.limit);
    write_field(path_in(ctx, "finest"), r.finest);
    ctx.report["family"] = to_json(r.diagnostics);
    if (!r.diagnostics.converged) ctx.report["family"]["divergence_report"] = "differences do not decay by 1.5 per halving";
    return r.diagnostics.converged;
}

inline std::vector<double> eta_schedule(const ExperimentSpec& E) {
    if (E.eta_levels.empty()) return std::vector<double>(E.eps_levels.size(), E.eta);
    if (E.eta_levels.size() == 1) return std::vector<double>(E.eps_levels.size(), E.eta_levels[0]);
    return E.eta_levels;
}

inline bool run_attainment(Context& ctx) {
    const auto& E = ctx.config.experiment;
    const auto base = build_problem(ctx.config);
    const auto h = hypotheses_for(base);
    add_regime_warnings(h, ctx.report);
    const auto etas = eta_schedule(E);
    std::vector<ApproxProblem> problems;
    for (std::size_t k = 0; k < E.eps_levels.size(); ++k) {
        ApproxProblem p = base;
        p.eps = E.eps_levels[k];
        p.eta = etas[k];
        problems.push_back(p);
    }
    const auto fields = solve_family(problems, build_scheme(ctx.config.numerics), ctx.threads);
    const auto rep = boundary_attainment(fields, base.models.phi, ctx.config.tau(), E.threshold);
    std::ostringstream csv;
    csv << "eps,eta,sup\n";
    for (std::size_t k = 0; k < rep.eps_levels.size(); ++k) {
        double eta = 0.0;
        for (const auto& f : fields) {
            if (f.eps == rep.eps_levels[k]) eta = f.eta;
        }
        csv << format_number(rep.eps_levels[k]) << ',' << format_number(eta) << ',' << format_number(rep.sups[k]) << '\n';
    }
    write_text(path_in(ctx, "attainment.csv"), csv.str());
    ctx.report["attainment"] = to_json(rep);
    return rep.attained;
}

inline bool run_duality(Context& ctx) {
    const auto& E = ctx.config.experiment;
    const Domain dom = build_domain(ctx.config.domain);
    const Grid grid(dom, ctx.config.numerics.nodes);
    bool ok = true;
    json rows = json::array();
    for (const auto& name : E.sources) {
        const SourceKind kind = name == "indicator" ? SourceKind::indicator
                                : name == "hat"     ? SourceKind::hat
                                                    : SourceKind::bump;
        const auto F = make_source(grid, kind, E.source_center, E.source_half_width);
        const auto pot = solve_duality_potential(grid, E.eps, F);
        const double gap = std::abs(pot.flux_sum - pot.source_integral);
        bool negative = true;
        for (double dn : pot.normal_derivatives) negative = negative && dn < 0.0;
        const bool pass = gap < 1e-6 * pot.source_integral && pot.min_interior_psi > 0.0 && negative;
        ok = ok && pass;
        rows.push_back({{"source", name},
                        {"integral", pot.source_integral},
                        {"flux_sum", pot.flux_sum},
                        {"relative_gap", gap / pot.source_integral},
                        {"min_interior_psi", pot.min_interior_psi},
                        {"normal_derivatives", pot.normal_derivatives},
                        {"pass", pass}});
    }
    ctx.report["duality"] = rows;
    return ok;
}

inline bool run_barrier_certify(Context& ctx) {
    const auto& c = ctx.config;
    const auto& E = c.experiment;
    const auto p = build_problem(c);
    const Domain& dom = p.grid.domain();
    const auto& m = p.models;
    const bool timed = is_timed(E.barrier_case);
    const double K = global_bound(p);

    double cap = dom.max_distance();
    if (timed) cap = std::min(cap, E.anchor_time);
    if (!uses_potential_v(E.barrier_case)) cap = std::min(cap, E.miller_radius.value_or(dom.max_distance()));
    const double delta = E.delta.value_or(
        localization_radius(dom, m.phi, m.G, E.anchor, E.anchor_time, E.eta, E.sigma, cap, p.horizon, timed));

    std::optional<BoundaryPotential> V;
    std::optional<MillerBarrier> hm;
    std::function<double(const Point&)> potential;
    if (uses_potential_v(E.barrier_case)) {
        V = BoundaryPotential::for_density(m.rho, E.potential_scale.value_or(std::max(delta, dom.max_distance())),
                                           E.curvature_margin);
        potential = [&](const Point& q) { return (*V)(dom.distance(q)); };
    } else {
        const double R = E.miller_radius.value_or(dom.max_distance());
        require(delta <= R * (1.0 + 1e-12), ErrorKind::geometry, "localization radius exceeds the Miller radius");
        hm = MillerBarrier::build(dom, E.anchor, R, E.miller_steepness);
        potential = [&](const Point& q) { return (*hm)(q); };
    }

    ConstantInputs in;
    in.inf_rho = m.rho.infimum();
    in.sup_rho = m.rho.supremum();
    in.alpha0 = m.G.floor();
    in.delta = delta;
    in.phi_norm = m.phi.sup_norm(dom, p.horizon);
    in.phi_anchor = m.phi(E.anchor, 0.0);
    in.eta0 = p.eta0;
    in.K = K;
    in.N = dom.dimension();
    in.lateral_inf = lateral_infimum(dom, E.anchor, delta, potential);
    in.h4_finite = h4_integral(m.rho, dom.collar_cap()).finite;

    std::vector<Side> sides;
    if (E.side != "upper") sides.push_back(Side::lower);
    if (E.side != "lower") sides.push_back(Side::upper);
    std::vector<double> node_counts = E.residual_nodes;
    if (node_counts.empty()) node_counts = {static_cast<double>(c.numerics.nodes)};
    const double dt = E.residual_dt.value_or(c.numerics.dt);

    BarrierSpec spec{E.barrier_case, Side::lower, E.anchor, E.anchor_time, E.sigma, E.eta, p.horizon};
    bool ok = true;
    json certs = json::array();
    for (Side side : sides) {
        spec.side = side;
        const auto k = select_barrier_constants(E.barrier_case, side, in, m.G);
        const Barrier b(spec, k, delta, K, dom, m.G, m.phi, V, hm);
        json cert{{"case", std::string(to_string(E.barrier_case))},
                  {"side", std::string(to_string(side))},
                  {"constants", to_json(k)},
                  {"region", {{"x0", E.anchor}, {"delta", delta}, {"t_begin", b.t_begin()}, {"t_end", b.t_end()}}},
                  {"K", K},
                  {"sigma", E.sigma},
                  {"eta", E.eta}};
        bool side_ok = true;
        json checks = json::array();
        for (double n : node_counts) {
            const Grid g(dom, static_cast<std::size_t>(n));
            const auto r = verify_barrier_residual(b, g, m.rho, m.G, dt);
            side_ok = side_ok && r.pass;
            json row = to_json(r);
            row["grid_nodes"] = g.size();
            row["h"] = g.spacing();
            checks.push_back(row);
        }
        cert["residuals"] = checks;
        if (E.negative_control) {
            BarrierConstants weak = k;
            weak.M /= 100.0;
            const Barrier wb(spec, weak, delta, K, dom, m.G, m.phi, V, hm);
            const Grid g(dom, static_cast<std::size_t>(node_counts.front()));
            const auto r = verify_barrier_residual(wb, g, m.rho, m.G, dt);
            cert["negative_control"] = to_json(r);
            cert["negative_control"]["expected"] = "fail";
            side_ok = side_ok && !r.pass;
        }
        cert["verdict"] = side_ok ? "pass" : "fail";
        ok = ok && side_ok;
        certs.push_back(cert);
    }
    write_json(path_in(ctx, "barrier.json"), certs);
    ctx.report["barriers"] = certs;
    return ok;
}

inline bool run_dichotomy(Context& ctx) {
    const auto& c = ctx.config;
    const auto& E = c.experiment;
    const auto base = build_problem(c);
    const Domain& dom = base.grid.domain();
    std::vector<double> eps = E.eps_levels;
    std::sort(eps.begin(), eps.end(), std::greater<>());
    const auto probe = probe_nodes(base.grid, E.probe_distance.value_or(2.0 * eps.front()));
    require(!probe.empty(), ErrorKind::config, "probe set is empty");
    const double tau = c.tau();

    std::vector<ApproxProblem> problems;
    for (double alpha : E.alpha_levels) {
        for (double e : eps) {
            for (double value : {c.boundary.value, E.phi_alternate}) {
                ApproxProblem p = base;
                p.models.rho = DensityModel::power_law(dom, alpha, c.density.coefficient);
                p.models.phi = BoundaryData::constant(value);
                p.eps = e;
                problems.push_back(p);
            }
        }
    }
    const auto fields = solve_family(problems, build_scheme(c.numerics), ctx.threads);

    std::ostringstream csv;
    csv << "alpha,eps,probe_difference,sup_a,sup_b\n";
    json rows = json::array();
    bool all_expected = true;
    std::size_t idx = 0;
    for (double alpha : E.alpha_levels) {
        const bool finite = h4_integral_power_law(alpha, dom.collar_cap()).finite;
        std::vector<double> diffs, sup_a, sup_b;
        std::vector<const SpaceTimeField*> fam_a, fam_b;
        for (double e : eps) {
            const auto& fa = fields[idx++];
            const auto& fb = fields[idx++];
            double worst = 0.0;
            for (std::size_t k = fa.time_index(tau); k < fa.times.size(); ++k) {
                for (auto i : probe) worst = std::max(worst, std::abs(fa.values[k][i] - fb.values[k][i]));
            }
            diffs.push_back(worst);
            sup_a.push_back(near_interface_sup(fa, BoundaryData::constant(c.boundary.value), tau));
            sup_b.push_back(near_interface_sup(fb, BoundaryData::constant(E.phi_alternate), tau));
            fam_a.push_back(&fa);
            fam_b.push_back(&fb);
            csv << format_number(alpha) << ',' << format_number(e) << ',' << format_number(worst) << ','
                << format_number(sup_a.back()) << ',' << format_number(sup_b.back()) << '\n';
        }
        const auto att_a = boundary_attainment(fam_a, BoundaryData::constant(c.boundary.value), tau, E.threshold);
        const auto att_b = boundary_attainment(fam_b, BoundaryData::constant(E.phi_alternate), tau, E.threshold);
        bool diffs_decrease = true;
        for (std::size_t k = 1; k < diffs.size(); ++k) diffs_decrease = diffs_decrease && diffs[k] < diffs[k - 1];
        const bool expected = finite ? (att_a.attained && att_b.attained) : diffs_decrease;
        all_expected = all_expected && expected;
        rows.push_back({{"alpha", alpha},
                        {"h4_finite", finite},
                        {"eps_levels", eps},
                        {"probe_differences", diffs},
                        {"differences_decrease", diffs_decrease},
                        {"attainment_a", to_json(att_a)},
                        {"attainment_b", to_json(att_b)},
                        {"behaviour", finite ? (att_a.attained && att_b.attained ? "each run attains its data"
                                                                                 : "attainment not observed")
                                             : (diffs_decrease ? "boundary conflict fades in the interior"
                                                               : "interior differences persist")},
                        {"matches_expectation", expected}});
    }
    write_text(path_in(ctx, "dichotomy.csv"), csv.str());
    ctx.report["dichotomy"] = rows;
    ctx.report["dichotomy_note"] = "exploratory: rows are recorded; the exit status does not depend on them";
    (void)all_expected;
    return true;
}

} // namespace detail

/// Runs one experiment, writes its artifacts and report.json into `out_dir`.
inline ExperimentOutcome run_experiment(const ExperimentConfig& config, const std::string& out_dir,
                                        unsigned threads = 1, std::optional<ExperimentKind> override_kind = {}) {
    ExperimentOutcome outcome;
    json& report = outcome.report;
    const ExperimentKind kind = override_kind.value_or(config.experiment.kind);
    report["experiment"] = std::string(to_string(kind));
    report["config"] = resolved_json(config);
    report["warnings"] = json::array();
    const auto start = std::chrono::steady_clock::now();
    try {
        std::filesystem::create_directories(out_dir);
        detail::Context ctx{config, out_dir, std::max(1u, threads), report};
        bool pass = false;
        switch (kind) {
        case ExperimentKind::solve: pass = detail::run_solve(ctx); break;
        case ExperimentKind::family: pass = detail::run_family(ctx); break;
        case ExperimentKind::barrier_certify: pass = detail::run_barrier_certify(ctx); break;
        case ExperimentKind::duality: pass = detail::run_duality(ctx); break;
        case ExperimentKind::attainment: pass = detail::run_attainment(ctx); break;
        case ExperimentKind::dichotomy_sweep: pass = detail::run_dichotomy(ctx); break;
        case ExperimentKind::hypothesis_report: pass = detail::run_hypothesis_report(ctx); break;
        }
        report["verdict"] = pass ? "pass" : "fail";
        outcome.exit_code = pass ? exit_pass : exit_verdict;
    } catch (const Error& e) {
        report["verdict"] = "error";
        report["error"] = {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}};
        outcome.exit_code = exit_code_for(e.kind());
    } catch (const std::filesystem::filesystem_error& e) {
        report["verdict"] = "error";
        report["error"] = {{"kind", "config-error"}, {"message", e.what()}};
        outcome.exit_code = exit_config;
    }
    const auto secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    report["timing_seconds"] = secs;
    report["exit_code"] = outcome.exit_code;
    try {
        write_json((std::filesystem::path(out_dir) / "report.json").string(), report);
    } catch (const Error&) {
        if (outcome.exit_code == exit_pass) outcome.exit_code = exit_config;
    }
    return outcome;
}

} // namespace collar
