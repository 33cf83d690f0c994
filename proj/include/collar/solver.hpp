#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "collar/errors.hpp"
#include "collar/geometry.hpp"
#include "collar/models.hpp"
#include "collar/tridiagonal.hpp"

namespace collar {

inline constexpr double nan_value = std::numeric_limits<double>::quiet_NaN();

struct ModelSet {
    DensityModel rho;
    Nonlinearity G;
    BoundaryData phi;
    InitialData u0;
};

// ---------------------------------------------------------------------------
// Discrete operator
// ---------------------------------------------------------------------------

/// Conservative finite-volume form of u_rr + (N-1)/r u_r on the grid:
///   vol_i * Lap(g)_i = [w(i+1/2)(g_{i+1} - g_i) - w(i-1/2)(g_i - g_{i-1})] / h
/// with face weights w = r^(N-1). The sphere-area constant is dropped everywhere,
/// so sums of vol_i * Lap(g)_i telescope exactly to the two end-face fluxes.
class RadialLaplacian {
public:
    explicit RadialLaplacian(const Grid& grid) : h_(grid.spacing()) {
        const auto n = grid.size();
        const int N = grid.domain().dimension();
        const bool radial = grid.domain().radial();
        face_.resize(n > 0 ? n - 1 : 0);
        vol_.resize(n);
        for (std::size_t i = 0; i + 1 < n; ++i) {
            const double s = 0.5 * (grid.node(i) + grid.node(i + 1));
            face_[i] = radial ? std::pow(s, N - 1) : 1.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double s = grid.node(i);
            if (radial && s <= 1e-12 * h_) {
                vol_[i] = face_[0] * h_ / (2.0 * N);   // regular centre of a ball
                centre_ = true;
            } else {
                vol_[i] = (radial ? std::pow(s, N - 1) : 1.0) * h_;
            }
        }
    }

    double spacing() const noexcept { return h_; }
    /// Weight of the face between nodes i and i+1.
    double face(std::size_t i) const { return face_[i]; }
    double volume(std::size_t i) const { return vol_[i]; }
    bool has_centre() const noexcept { return centre_; }

    double lower_coefficient(std::size_t i) const {
        return (i == 0) ? 0.0 : face_[i - 1] / (vol_[i] * h_);
    }
    double upper_coefficient(std::size_t i) const {
        return (i + 1 >= vol_.size()) ? 0.0 : face_[i] / (vol_[i] * h_);
    }

    /// Lap(g)_i. Neighbours must be finite where the coefficient is nonzero.
    double apply(const std::vector<double>& g, std::size_t i) const {
        double v = 0.0;
        if (const double a = lower_coefficient(i); a != 0.0) v += a * (g[i - 1] - g[i]);
        if (const double c = upper_coefficient(i); c != 0.0) v += c * (g[i + 1] - g[i]);
        return v;
    }

    /// Flux w(i+1/2) (g_{i+1} - g_i) / h through the face between i and i+1.
    double face_flux(const std::vector<double>& g, std::size_t i) const {
        return face_[i] * (g[i + 1] - g[i]) / h_;
    }

private:
    double h_;
    std::vector<double> face_;
    std::vector<double> vol_;
    bool centre_ = false;
};

// ---------------------------------------------------------------------------
// Problem, scheme and trajectory
// ---------------------------------------------------------------------------

struct ApproxProblem {
    Grid grid;
    ModelSet models;
    double eps = 0.0;          // 0 selects the full domain with data on the boundary nodes
    double eta = 0.0;
    double eta0 = 0.1;
    double horizon = 1.0;
    double dt = 1e-3;
    std::optional<double> blend_width;  // defaults to eps
    std::size_t store_stride = 1;
};

enum class Stepping { implicit_newton, semi_implicit_lagged };

struct SolverScheme {
    Stepping stepping = Stepping::implicit_newton;
    double tolerance = 1e-10;
    int max_iterations = 50;
    double kappa = 1e-8;
    int max_halvings = 10;
    int restore_after = 20;
    bool line_search = true;
};

struct SolveStats {
    std::size_t steps = 0;
    std::size_t newton_iterations = 0;
    int max_newton_iterations = 0;
    std::size_t halvings = 0;
    double max_residual = 0.0;
};

/// u(x, t) on the grid at stored times. Rows are time levels; nodes outside the
/// computational domain hold NaN.
struct SpaceTimeField {
    Grid grid;
    CollarDecomposition dec;
    std::vector<double> times;
    std::vector<std::vector<double>> values;
    double eps = 0.0;
    double eta = 0.0;
    double dt = 0.0;
    double bound = 0.0;               // K
    SolveStats stats;
    bool max_principle_ok = true;
    double min_value = 0.0;
    double max_value = 0.0;

    std::size_t time_count() const noexcept { return times.size(); }
    std::size_t node_count() const noexcept { return grid.size(); }
    bool active(std::size_t i) const { return i >= dec.lo && i <= dec.hi; }
    double at(std::size_t k, std::size_t i) const { return values[k][i]; }
    const std::vector<double>& final_row() const { return values.back(); }

    /// Index of the stored time closest to t.
    std::size_t time_index(double t) const {
        const auto it = std::lower_bound(times.begin(), times.end(), t);
        if (it == times.begin()) return 0;
        if (it == times.end()) return times.size() - 1;
        const auto k = static_cast<std::size_t>(it - times.begin());
        return (times[k] - t < t - times[k - 1]) ? k : k - 1;
    }
};

// ---------------------------------------------------------------------------
// Initial data
// ---------------------------------------------------------------------------

inline double smoothstep(double x) {
    x = std::clamp(x, 0.0, 1.0);
    return x * x * (3.0 - 2.0 * x);
}

/// zeta u0 + (1 - zeta) phi(., 0), zeta rising from 0 at d = eps to 1 at
/// d = eps + width. Values are returned for every grid node.
inline std::vector<double> blend_initial_data(const InitialData& u0, const BoundaryData& phi, double eps,
                                              const Grid& grid, std::optional<double> width = {}) {
    const double h = grid.spacing();
    require(eps == 0.0 || eps >= 2.0 * h * (1.0 - 1e-9), ErrorKind::resolution,
            "collar width below two cells");
    const double w = width.value_or(eps);
    require(w >= 0.0 && w <= eps * (1.0 + 1e-12), ErrorKind::config, "blend width must lie in [0, eps]");
    const Domain& dom = grid.domain();
    std::vector<double> out(grid.size());
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = grid.distance(i);
        double zeta;
        if (w > 0.0) {
            zeta = smoothstep((d - eps) / w);
        } else {
            zeta = d > eps + 1e-9 * h ? 1.0 : 0.0;
        }
        const double s = grid.node(i);
        if (zeta >= 1.0) out[i] = u0(s);
        else if (zeta <= 0.0) out[i] = phi.extended(dom, s, 0.0);
        else out[i] = zeta * u0(s) + (1.0 - zeta) * phi.extended(dom, s, 0.0);
    }
    return out;
}

/// K = max(|u0|_inf, |phi|_inf) + eta0.
inline double global_bound(const ApproxProblem& p) {
    const Domain& dom = p.grid.domain();
    return std::max(p.models.u0.sup_norm(dom), p.models.phi.sup_norm(dom, p.horizon)) + p.eta0;
}

// ---------------------------------------------------------------------------
// Stepping
// ---------------------------------------------------------------------------

struct StepInfo {
    int iterations = 0;
    double residual = 0.0;
};

/// Implicit Euler on one eps-level. The state vector spans the whole grid;
/// only the computational block [dec.lo, dec.hi] is touched.
class CollarSolver {
public:
    CollarSolver(const ApproxProblem& problem, SolverScheme scheme)
        : p_(problem), scheme_(scheme), lap_(problem.grid),
          dec_(problem.eps > 0.0 ? collar_decomposition(problem.grid, problem.eps)
                                 : full_domain_decomposition(problem.grid)) {
        require(problem.dt > 0.0, ErrorKind::config, "time step must be positive");
        require(problem.horizon > 0.0, ErrorKind::config, "horizon must be positive");
        require(problem.eta >= 0.0 && (problem.eta < problem.eta0 || problem.eta == 0.0), ErrorKind::config,
                "lift eta must lie in [0, eta0)");
        require(problem.store_stride >= 1, ErrorKind::config, "storage stride must be at least 1");
        require(scheme.kappa >= 0.0, ErrorKind::config, "Jacobian floor must be nonnegative");
        rho_.assign(p_.grid.size(), nan_value);
        for (std::size_t i = dec_.lo; i <= dec_.hi; ++i) {
            if (!dec_.unknown(i)) continue;
            rho_[i] = p_.models.rho.at(p_.grid.node(i));
            require(std::isfinite(rho_[i]) && rho_[i] > 0.0, ErrorKind::model,
                    "density is not positive and finite at node " + std::to_string(i));
        }
        for (std::size_t i = dec_.lo; i <= dec_.hi; ++i) {
            if (dec_.unknown(i)) unknowns_.push_back(i);
        }
        require(!unknowns_.empty(), ErrorKind::resolution, "no unknowns at this collar width");
    }

    const CollarDecomposition& decomposition() const noexcept { return dec_; }
    const RadialLaplacian& laplacian() const noexcept { return lap_; }
    const ApproxProblem& problem() const noexcept { return p_; }

    double dirichlet_value(std::size_t i, double t) const {
        return p_.models.phi.extended(p_.grid.domain(), p_.grid.node(i), t) + p_.eta;
    }

    std::vector<double> initial_state() const {
        auto blend = blend_initial_data(p_.models.u0, p_.models.phi, p_.eps, p_.grid, p_.blend_width);
        std::vector<double> u(p_.grid.size(), nan_value);
        for (std::size_t i = dec_.lo; i <= dec_.hi; ++i) u[i] = blend[i] + p_.eta;
        set_dirichlet(u, 0.0);
        return u;
    }

    void set_dirichlet(std::vector<double>& u, double t) const {
        if (dec_.lo_dirichlet) u[dec_.lo] = dirichlet_value(dec_.lo, t);
        if (dec_.hi_dirichlet) u[dec_.hi] = dirichlet_value(dec_.hi, t);
    }

    /// Max over unknowns of |F_i| dt / rho_i for F_i = rho_i (u_i - old_i)/dt - Lap G(u)_i.
    double scaled_residual(const std::vector<double>& u, const std::vector<double>& old, double dt,
                           std::vector<double>* g_out = nullptr, std::vector<double>* f_out = nullptr) const {
        std::vector<double> g(u.size(), nan_value);
        for (std::size_t i = dec_.lo; i <= dec_.hi; ++i) g[i] = p_.models.G(u[i]);
        double worst = 0.0;
        if (f_out) f_out->assign(unknowns_.size(), 0.0);
        for (std::size_t j = 0; j < unknowns_.size(); ++j) {
            const auto i = unknowns_[j];
            const double f = rho_[i] * (u[i] - old[i]) / dt - lap_.apply(g, i);
            if (f_out) (*f_out)[j] = f;
            worst = std::max(worst, std::abs(f) * dt / rho_[i]);
        }
        if (g_out) *g_out = std::move(g);
        return std::isfinite(worst) ? worst : inf;
    }

    /// One implicit step from `old` (time t) to t + dt; throws StepError on
    /// Newton failure.
    StepInfo step(const std::vector<double>& old, double t, double dt, std::vector<double>& out) const {
        try {
            return step_impl(old, t, dt, out);
        } catch (const StepError&) {
            throw;
        } catch (const Error& e) {
            throw StepError(std::string("Newton iterate left the model range: ") + e.what(), inf);
        }
    }

    /// Full trajectory on [0, T] with the halving/restoring step controller.
    SpaceTimeField run() const {
        SpaceTimeField field{p_.grid, dec_, {}, {}, p_.eps, p_.eta, p_.dt, global_bound(p_), {}, true, 0.0, 0.0};
        std::vector<double> u = initial_state();
        field.times.push_back(0.0);
        field.values.push_back(u);

        const double dt0 = p_.dt;
        const auto n_steps = static_cast<std::size_t>(std::ceil(p_.horizon / dt0 - 1e-9));
        double sub = dt0;
        int clean = 0;
        double t = 0.0;
        std::vector<double> next;
        for (std::size_t k = 1; k <= n_steps; ++k) {
            const double target = (k == n_steps) ? p_.horizon : dt0 * static_cast<double>(k);
            while (t < target - 1e-14 * std::max(1.0, target)) {
                double dt = std::min(sub, target - t);
                if (target - (t + dt) < 1e-12 * dt0) dt = target - t;
                try {
                    const StepInfo info = step(u, t, dt, next);
                    u.swap(next);
                    t = (dt == target - t) ? target : t + dt;
                    ++field.stats.steps;
                    field.stats.newton_iterations += static_cast<std::size_t>(info.iterations);
                    field.stats.max_newton_iterations = std::max(field.stats.max_newton_iterations, info.iterations);
                    field.stats.max_residual = std::max(field.stats.max_residual, info.residual);
                    if (++clean >= scheme_.restore_after && sub < dt0) {
                        sub = std::min(2.0 * sub, dt0);
                        clean = 0;
                    }
                } catch (const StepError& e) {
                    clean = 0;
                    sub *= 0.5;
                    ++field.stats.halvings;
                    if (sub < dt0 / std::ldexp(1.0, scheme_.max_halvings) * (1.0 - 1e-12)) {
                        fail(ErrorKind::solve, "time step exhausted after " + std::to_string(scheme_.max_halvings) +
                                                   " halvings at t = " + std::to_string(t) + " (" + e.what() + ")");
                    }
                }
            }
            if (k % p_.store_stride == 0 || k == n_steps) {
                field.times.push_back(target);
                field.values.push_back(u);
            }
        }
        certify(field);
        return field;
    }

private:
    StepInfo step_impl(const std::vector<double>& old, double t, double dt, std::vector<double>& u) const {
        const auto& G = p_.models.G;
        u = old;
        set_dirichlet(u, t + dt);
        const std::size_t m = unknowns_.size();
        std::vector<double> g, f;
        double res = scaled_residual(u, old, dt, &g, &f);
        StepInfo info;
        const int max_it = scheme_.stepping == Stepping::semi_implicit_lagged ? 1 : scheme_.max_iterations;
        std::vector<double> trial;
        while (res > scheme_.tolerance) {
            if (info.iterations >= max_it) {
                if (scheme_.stepping == Stepping::semi_implicit_lagged) break;
                throw StepError("Newton did not converge in " + std::to_string(max_it) + " iterations", res);
            }
            ++info.iterations;
            Tridiagonal J(m);
            std::vector<double> rhs(m);
            for (std::size_t j = 0; j < m; ++j) {
                const auto i = unknowns_[j];
                const double a = lap_.lower_coefficient(i), c = lap_.upper_coefficient(i);
                J.diag[j] = rho_[i] / dt + (a + c) * std::max(G.derivative(u[i]), scheme_.kappa);
                if (j > 0 && unknowns_[j - 1] == i - 1) J.sub[j] = -a * std::max(G.derivative(u[i - 1]), scheme_.kappa);
                if (j + 1 < m && unknowns_[j + 1] == i + 1) J.sup[j] = -c * std::max(G.derivative(u[i + 1]), scheme_.kappa);
                rhs[j] = -f[j];
            }
            const auto delta = solve_tridiagonal(J, std::move(rhs));
            double lambda = 1.0;
            double new_res = inf;
            std::vector<double> new_f;
            for (int bt = 0; bt < (scheme_.line_search ? 12 : 1); ++bt) {
                trial = u;
                for (std::size_t j = 0; j < m; ++j) trial[unknowns_[j]] += lambda * delta[j];
                try {
                    new_res = scaled_residual(trial, old, dt, nullptr, &new_f);
                } catch (const Error&) {
                    new_res = inf;
                }
                if (new_res < res || scheme_.stepping == Stepping::semi_implicit_lagged) break;
                lambda *= 0.5;
            }
            if (!std::isfinite(new_res)) throw StepError("Newton update produced a non-finite residual", res);
            u.swap(trial);
            f.swap(new_f);
            res = new_res;
        }
        info.residual = res;
        return info;
    }

    void certify(SpaceTimeField& field) const {
        const double tol = 1e-6;
        const Domain& dom = p_.grid.domain();
        auto [u0_lo, u0_hi] = p_.models.u0.sampled_range(dom);
        auto [phi_lo, phi_hi] = p_.models.phi.sampled_range(dom, p_.horizon);
        const double lower = std::min(u0_lo, phi_lo) - p_.eta0 - tol;
        const double upper = field.bound + tol;
        double lo = inf, hi = -inf;
        for (const auto& row : field.values) {
            for (std::size_t i = dec_.lo; i <= dec_.hi; ++i) {
                lo = std::min(lo, row[i]);
                hi = std::max(hi, row[i]);
            }
        }
        field.min_value = lo;
        field.max_value = hi;
        field.max_principle_ok = lo >= lower && hi <= upper;
        (void)u0_hi;
        (void)phi_hi;
    }

    ApproxProblem p_;
    SolverScheme scheme_;
    RadialLaplacian lap_;
    CollarDecomposition dec_;
    std::vector<double> rho_;
    std::vector<std::size_t> unknowns_;
};

/// Single implicit step of the problem from `state` at time t.
inline std::vector<double> step_implicit(const std::vector<double>& state, double t, const ApproxProblem& problem,
                                         const SolverScheme& scheme, StepInfo* info = nullptr) {
    CollarSolver solver(problem, scheme);
    std::vector<double> out;
    StepInfo i = solver.step(state, t, problem.dt, out);
    if (info) *info = i;
    return out;
}

inline SpaceTimeField solve_eps_eta(const ApproxProblem& problem, const SolverScheme& scheme = {}) {
    return CollarSolver(problem, scheme).run();
}

// ---------------------------------------------------------------------------
// Families and the limit
// ---------------------------------------------------------------------------

/// Runs fn(0..count-1) on up to `threads` workers; the first exception is rethrown.
template <class Fn>
void parallel_for(std::size_t count, unsigned threads, Fn&& fn) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
    if (threads <= 1) {
        for (std::size_t k = 0; k < count; ++k) fn(k);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w) {
        pool.emplace_back([&] {
            for (std::size_t k = next++; k < count; k = next++) {
                try {
                    fn(k);
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

inline std::vector<SpaceTimeField> solve_family(const std::vector<ApproxProblem>& problems,
                                                const SolverScheme& scheme, unsigned threads = 1) {
    std::vector<std::optional<SpaceTimeField>> slots(problems.size());
    parallel_for(problems.size(), threads, [&](std::size_t k) { slots[k] = solve_eps_eta(problems[k], scheme); });
    std::vector<SpaceTimeField> out;
    out.reserve(slots.size());
    for (auto& s : slots) out.push_back(std::move(*s));
    return out;
}

/// Shape check shared by every pairwise field operation.
inline void require_same_shape(const SpaceTimeField& a, const SpaceTimeField& b) {
    require(a.grid.size() == b.grid.size() && std::abs(a.grid.spacing() - b.grid.spacing()) <= 1e-12 * a.grid.spacing() &&
                a.grid.domain().lower() == b.grid.domain().lower(),
            ErrorKind::shape, "fields live on different grids");
    require(a.times.size() == b.times.size(), ErrorKind::shape, "fields have different numbers of time stamps");
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        require(std::abs(a.times[k] - b.times[k]) <= 1e-12 * std::max(1.0, a.times[k]), ErrorKind::shape,
                "fields have different time stamps");
    }
}

/// Nodes with d >= min_distance, the fixed compact set used for Cauchy differences.
inline std::vector<std::size_t> probe_nodes(const Grid& grid, double min_distance) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.distance(i) >= min_distance - 1e-9 * grid.spacing()) out.push_back(i);
    }
    return out;
}

/// sup over probe nodes and all stored times of |a - b|.
inline double probe_sup_difference(const SpaceTimeField& a, const SpaceTimeField& b,
                                   const std::vector<std::size_t>& probe) {
    require_same_shape(a, b);
    double worst = 0.0;
    for (std::size_t k = 0; k < a.times.size(); ++k) {
        for (auto i : probe) {
            require(a.active(i) && b.active(i), ErrorKind::shape, "probe node outside a computational domain");
            worst = std::max(worst, std::abs(a.values[k][i] - b.values[k][i]));
        }
    }
    return worst;
}

struct LimitDiagnostics {
    std::vector<double> eps_levels;
    std::vector<double> eta_levels;
    std::vector<double> eps_differences;  // consecutive eps-levels at the finest eta
    std::vector<double> eta_differences;  // consecutive eta-levels at the finest eps
    std::vector<std::size_t> probe;
    bool eps_converged = false;
    bool eta_converged = false;
    bool converged = false;
};

struct LimitResult {
    SpaceTimeField finest;
    SpaceTimeField limit;
    LimitDiagnostics diagnostics;
    std::vector<SpaceTimeField> eps_fields;
    std::vector<SpaceTimeField> eta_fields;
};

/// Differences d_k must shrink by `factor` per halving; an all-zero sequence counts as converged.
inline bool decays_geometrically(const std::vector<double>& diffs, double factor = 1.5, double floor = 1e-12) {
    for (std::size_t k = 0; k + 1 < diffs.size(); ++k) {
        if (diffs[k + 1] <= floor) continue;
        if (diffs[k] < factor * diffs[k + 1]) return false;
    }
    return true;
}

/// Solves the eps-family at the finest eta and the eta-family at the finest eps,
/// measures Cauchy differences on the probe set, and forms the limit candidate by
/// Richardson extrapolation: (8u_e - 6u_2e + u_4e)/3 in eps and 2u_n - u_2n in eta.
inline LimitResult extract_limit_solution(const ApproxProblem& base, std::vector<double> eps_levels,
                                          std::vector<double> eta_levels, const SolverScheme& scheme = {},
                                          unsigned threads = 1, std::optional<double> probe_distance = {}) {
    require(eps_levels.size() >= 4, ErrorKind::config, "limit extraction needs at least four eps-levels");
    require(eta_levels.size() >= 3, ErrorKind::config, "limit extraction needs at least three eta-levels");
    std::sort(eps_levels.begin(), eps_levels.end(), std::greater<>());
    std::sort(eta_levels.begin(), eta_levels.end(), std::greater<>());
    const double eps_f = eps_levels.back(), eta_f = eta_levels.back();

    std::vector<ApproxProblem> problems;
    for (double e : eps_levels) {
        ApproxProblem p = base;
        p.eps = e;
        p.eta = eta_f;
        problems.push_back(p);
    }
    for (std::size_t k = 0; k + 1 < eta_levels.size(); ++k) {
        ApproxProblem p = base;
        p.eps = eps_f;
        p.eta = eta_levels[k];
        problems.push_back(p);
    }
    auto fields = solve_family(problems, scheme, threads);

    LimitResult r{fields[eps_levels.size() - 1], fields[eps_levels.size() - 1], {}, {}, {}};
    for (std::size_t k = 0; k < eps_levels.size(); ++k) r.eps_fields.push_back(fields[k]);
    for (std::size_t k = 0; k + 1 < eta_levels.size(); ++k) r.eta_fields.push_back(fields[eps_levels.size() + k]);
    r.eta_fields.push_back(r.finest);

    auto& diag = r.diagnostics;
    diag.eps_levels = eps_levels;
    diag.eta_levels = eta_levels;
    diag.probe = probe_nodes(base.grid, probe_distance.value_or(2.0 * eps_levels.front()));
    require(!diag.probe.empty(), ErrorKind::config, "probe set is empty");
    for (std::size_t k = 0; k + 1 < r.eps_fields.size(); ++k) {
        diag.eps_differences.push_back(probe_sup_difference(r.eps_fields[k], r.eps_fields[k + 1], diag.probe));
    }
    for (std::size_t k = 0; k + 1 < r.eta_fields.size(); ++k) {
        diag.eta_differences.push_back(probe_sup_difference(r.eta_fields[k], r.eta_fields[k + 1], diag.probe));
    }
    diag.eps_converged = decays_geometrically(diag.eps_differences);
    diag.eta_converged = decays_geometrically(diag.eta_differences);
    diag.converged = diag.eps_converged && diag.eta_converged;

    const auto ne = r.eps_fields.size();
    const SpaceTimeField& u1 = r.eps_fields[ne - 1];
    const SpaceTimeField& u2 = r.eps_fields[ne - 2];
    const SpaceTimeField& u4 = r.eps_fields[ne - 3];
    const SpaceTimeField& v2 = r.eta_fields[r.eta_fields.size() - 2];
    for (std::size_t k = 0; k < r.limit.times.size(); ++k) {
        for (std::size_t i = r.limit.dec.lo; i <= r.limit.dec.hi; ++i) {
            const double base_v = u1.values[k][i];
            double eps_part = base_v;
            if (u4.active(i)) {
                eps_part = (8.0 * base_v - 6.0 * u2.values[k][i] + u4.values[k][i]) / 3.0;
            } else if (u2.active(i)) {
                eps_part = 2.0 * base_v - u2.values[k][i];
            }
            const double eta_part = 2.0 * base_v - v2.values[k][i];
            r.limit.values[k][i] = eps_part + eta_part - base_v;
        }
    }
    r.limit.eta = 0.0;
    return r;
}

} // namespace collar
