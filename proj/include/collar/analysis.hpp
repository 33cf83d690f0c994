#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collar/barriers.hpp"
#include "collar/errors.hpp"
#include "collar/geometry.hpp"
#include "collar/models.hpp"
#include "collar/solver.hpp"
#include "collar/tridiagonal.hpp"

namespace collar {

// ---------------------------------------------------------------------------
// Sources
// ---------------------------------------------------------------------------

enum class SourceKind { indicator, hat, bump };

constexpr std::string_view to_string(SourceKind k) {
    switch (k) {
    case SourceKind::indicator: return "indicator";
    case SourceKind::hat: return "hat";
    case SourceKind::bump: return "bump";
    }
    return "?";
}

/// Weighted sum of a nodal vector: sum_i vol_i f_i (sphere-area constant dropped).
inline double integrate_nodal(const Grid& grid, const std::vector<double>& f) {
    const RadialLaplacian lap(grid);
    double sum = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (f[i] != 0.0) sum += lap.volume(i) * f[i];
    }
    return sum;
}

/// Nodal source from cell averages over [s_i - h/2, s_i + h/2]. The indicator
/// of (center - half_width, center + half_width) has height 1; hat and bump are
/// scaled so that the weighted sum equals `mass`.
inline std::vector<double> make_source(const Grid& grid, SourceKind kind, double center, double half_width,
                                       double mass = 1.0) {
    require(half_width > 0.0, ErrorKind::source, "source half-width must be positive");
    const double a = center - half_width, b = center + half_width;
    auto profile = [&](double s) {
        const double r = (s - center) / half_width;
        if (std::abs(r) >= 1.0) return 0.0;
        switch (kind) {
        case SourceKind::indicator: return 1.0;
        case SourceKind::hat: return 1.0 - std::abs(r);
        case SourceKind::bump: return std::exp(-1.0 / (1.0 - r * r));
        }
        return 0.0;
    };
    const double h = grid.spacing();
    std::vector<double> f(grid.size(), 0.0);
    using boost::math::quadrature::gauss_kronrod;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double lo = std::max(grid.node(i) - 0.5 * h, a), hi = std::min(grid.node(i) + 0.5 * h, b);
        if (hi <= lo) continue;
        double integral = 0.0;
        if (kind == SourceKind::indicator) {
            integral = hi - lo;
        } else {
            // split at the hat's apex so each piece is smooth
            if (lo < center && center < hi) {
                integral = gauss_kronrod<double, 31>::integrate(profile, lo, center, 0, 1e-14) +
                           gauss_kronrod<double, 31>::integrate(profile, center, hi, 0, 1e-14);
            } else {
                integral = gauss_kronrod<double, 31>::integrate(profile, lo, hi, 0, 1e-14);
            }
        }
        f[i] = integral / h;
    }
    if (kind != SourceKind::indicator) {
        const double total = integrate_nodal(grid, f);
        require(total > 0.0, ErrorKind::source, "source support misses every node");
        for (auto& v : f) v *= mass / total;
    }
    return f;
}

// ---------------------------------------------------------------------------
// Duality potential
// ---------------------------------------------------------------------------

struct DualityPotential {
    double eps = 0.0;
    CollarDecomposition dec;
    std::vector<double> source;
    std::vector<double> psi;          // NaN outside the computational domain
    std::vector<double> normal_derivatives;  // one-sided, outward from Omega^eps, per Dirichlet interface node
    std::vector<double> interface_nodes;     // reduced coordinates matching normal_derivatives
    double flux_sum = 0.0;            // -sum of face-weighted normal derivatives
    double source_integral = 0.0;     // sum vol_i F_i
    double min_interior_psi = 0.0;
};

/// Solves -Lap psi = F on the eps-level computational domain with psi = 0 on the
/// interface. The flux sum uses the same face weights as the operator, so it
/// equals the weighted source integral up to the linear-solve tolerance.
inline DualityPotential solve_duality_potential(const Grid& grid, double eps, const std::vector<double>& F) {
    require(F.size() == grid.size(), ErrorKind::shape, "source length does not match the grid");
    const auto dec = eps > 0.0 ? collar_decomposition(grid, eps) : full_domain_decomposition(grid);
    bool any = false;
    for (std::size_t i = 0; i < F.size(); ++i) {
        require(std::isfinite(F[i]) && F[i] >= 0.0, ErrorKind::source, "source has a negative or non-finite entry");
        if (F[i] > 0.0) {
            any = true;
            require(dec.unknown(i) && dec.classes[i] == NodeClass::core, ErrorKind::source,
                    "source support reaches the interface or collar at node " + std::to_string(i));
        }
    }
    require(any, ErrorKind::source, "source vanishes identically");

    const RadialLaplacian lap(grid);
    std::vector<std::size_t> unknowns;
    for (std::size_t i = dec.lo; i <= dec.hi; ++i) {
        if (dec.unknown(i)) unknowns.push_back(i);
    }
    const auto m = unknowns.size();
    Tridiagonal A(m);
    std::vector<double> rhs(m);
    for (std::size_t j = 0; j < m; ++j) {
        const auto i = unknowns[j];
        const double a = lap.lower_coefficient(i), c = lap.upper_coefficient(i);
        A.diag[j] = a + c;
        if (j > 0) A.sub[j] = -a;
        if (j + 1 < m) A.sup[j] = -c;
        rhs[j] = F[i];
    }
    const auto x = solve_tridiagonal(A, std::move(rhs));

    DualityPotential out;
    out.eps = eps;
    out.dec = dec;
    out.source = F;
    out.psi.assign(grid.size(), nan_value);
    for (std::size_t i = dec.lo; i <= dec.hi; ++i) out.psi[i] = 0.0;
    for (std::size_t j = 0; j < m; ++j) out.psi[unknowns[j]] = x[j];

    const double h = grid.spacing();
    if (dec.lo_dirichlet) {
        const double dn = (out.psi[dec.lo] - out.psi[dec.lo + 1]) / h;
        out.normal_derivatives.push_back(dn);
        out.interface_nodes.push_back(grid.node(dec.lo));
        out.flux_sum -= lap.face(dec.lo) * dn;
    }
    if (dec.hi_dirichlet) {
        const double dn = (out.psi[dec.hi] - out.psi[dec.hi - 1]) / h;
        out.normal_derivatives.push_back(dn);
        out.interface_nodes.push_back(grid.node(dec.hi));
        out.flux_sum -= lap.face(dec.hi - 1) * dn;
    }
    out.source_integral = 0.0;
    for (auto i : unknowns) out.source_integral += lap.volume(i) * F[i];
    out.min_interior_psi = inf;
    for (auto i : unknowns) out.min_interior_psi = std::min(out.min_interior_psi, out.psi[i]);
    return out;
}

// ---------------------------------------------------------------------------
// Uniqueness functional
// ---------------------------------------------------------------------------

/// int_0^T sum_i vol_i [G(u1) - G(u2)] F_i dt, trapezoidal in time.
inline double uniqueness_functional(const SpaceTimeField& u1, const SpaceTimeField& u2, const std::vector<double>& F,
                                    const Nonlinearity& G) {
    require_same_shape(u1, u2);
    require(F.size() == u1.grid.size(), ErrorKind::shape, "source length does not match the grid");
    const RadialLaplacian lap(u1.grid);
    std::vector<double> slice(u1.times.size(), 0.0);
    for (std::size_t k = 0; k < u1.times.size(); ++k) {
        double s = 0.0;
        for (std::size_t i = 0; i < F.size(); ++i) {
            if (F[i] == 0.0) continue;
            require(u1.active(i) && u2.active(i), ErrorKind::shape, "source support leaves a computational domain");
            s += lap.volume(i) * (G(u1.values[k][i]) - G(u2.values[k][i])) * F[i];
        }
        slice[k] = s;
    }
    double total = 0.0;
    for (std::size_t k = 1; k < slice.size(); ++k) {
        total += 0.5 * (slice[k] + slice[k - 1]) * (u1.times[k] - u1.times[k - 1]);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Boundary attainment
// ---------------------------------------------------------------------------

struct AttainmentReport {
    std::vector<double> eps_levels;   // strictly decreasing
    std::vector<double> sups;
    double tau = 0.0;
    double threshold = 0.0;
    bool decreasing = false;
    bool attained = false;
};

/// sup over t in [tau, T] of |u - phi(x_b, t)| one node inside each Dirichlet
/// interface node, x_b the nearest boundary point.
inline double near_interface_sup(const SpaceTimeField& f, const BoundaryData& phi, double tau) {
    const Domain& dom = f.grid.domain();
    std::vector<std::size_t> probe;
    if (f.dec.lo_dirichlet) probe.push_back(f.dec.lo + 1);
    if (f.dec.hi_dirichlet) probe.push_back(f.dec.hi - 1);
    double worst = 0.0;
    for (std::size_t k = 0; k < f.times.size(); ++k) {
        if (f.times[k] < tau - 1e-12) continue;
        for (auto i : probe) {
            const double target = phi.extended(dom, f.grid.node(i), f.times[k]);
            worst = std::max(worst, std::abs(f.values[k][i] - target));
        }
    }
    return worst;
}

inline AttainmentReport boundary_attainment(std::vector<const SpaceTimeField*> family, const BoundaryData& phi,
                                            double tau, double threshold = 0.05) {
    require(!family.empty(), ErrorKind::config, "attainment needs at least one eps-level");
    const double T = family.front()->times.back();
    require(tau > 0.0 && tau < T, ErrorKind::config, "tau must lie in (0, T)");
    std::sort(family.begin(), family.end(), [](auto a, auto b) { return a->eps > b->eps; });
    AttainmentReport r;
    r.tau = tau;
    r.threshold = threshold;
    for (std::size_t k = 0; k < family.size(); ++k) {
        require(k == 0 || family[k]->eps < family[k - 1]->eps, ErrorKind::config, "eps-levels must be distinct");
        r.eps_levels.push_back(family[k]->eps);
        r.sups.push_back(near_interface_sup(*family[k], phi, tau));
    }
    r.decreasing = true;
    for (std::size_t k = 1; k < r.sups.size(); ++k) r.decreasing = r.decreasing && r.sups[k] < r.sups[k - 1];
    r.attained = r.decreasing && r.sups.back() < threshold;
    return r;
}

inline AttainmentReport boundary_attainment(const std::vector<SpaceTimeField>& family, const BoundaryData& phi,
                                            double tau, double threshold = 0.05) {
    std::vector<const SpaceTimeField*> ptrs;
    for (const auto& f : family) ptrs.push_back(&f);
    return boundary_attainment(std::move(ptrs), phi, tau, threshold);
}

// ---------------------------------------------------------------------------
// Comparison and maximality
// ---------------------------------------------------------------------------

struct CollarHypothesis {
    double tau = 0.0;
    double eps_min = 0.0;
    double eps_max = 0.0;
};

struct OrderVerdict {
    bool pass = true;
    double worst = 0.0;        // largest violation (positive means the ordering fails there)
    double worst_node = 0.0;
    double worst_time = 0.0;
    std::size_t checked = 0;
};

namespace detail {

/// max over (node, time) of below - above - tol, restricted by `use`.
template <class Use>
OrderVerdict order_scan(const SpaceTimeField& below, const SpaceTimeField& above, double tol, Use use) {
    OrderVerdict v;
    v.worst = -inf;
    for (std::size_t k = 0; k < below.times.size(); ++k) {
        for (std::size_t i = 0; i < below.grid.size(); ++i) {
            if (!below.active(i) || !above.active(i) || !use(i, below.times[k])) continue;
            ++v.checked;
            const double gap = below.values[k][i] - above.values[k][i];
            if (gap > v.worst) {
                v.worst = gap;
                v.worst_node = below.grid.node(i);
                v.worst_time = below.times[k];
            }
        }
    }
    v.pass = v.checked == 0 || v.worst <= tol;
    if (v.checked == 0) v.worst = 0.0;
    return v;
}

} // namespace detail

/// u_low <= u_high + 1e-8 on the common core. When a collar hypothesis is given
/// it is checked first on d in [eps_min, eps_max], t > tau.
inline OrderVerdict comparison_check(const SpaceTimeField& u_low, const SpaceTimeField& u_high,
                                     std::optional<CollarHypothesis> hyp = {}, double tol = 1e-8) {
    require_same_shape(u_low, u_high);
    const Grid& g = u_low.grid;
    if (hyp) {
        const auto pre = detail::order_scan(u_low, u_high, tol, [&](std::size_t i, double t) {
            const double d = g.distance(i);
            return t > hyp->tau && d >= hyp->eps_min - 1e-9 * g.spacing() && d <= hyp->eps_max + 1e-9 * g.spacing();
        });
        require(pre.pass, ErrorKind::hypothesis,
                "ordering fails on the collar hypothesis range at x = " + std::to_string(pre.worst_node) +
                    ", t = " + std::to_string(pre.worst_time));
    }
    const double core = std::max(u_low.eps, u_high.eps);
    return detail::order_scan(u_low, u_high, tol, [&](std::size_t i, double) {
        return g.distance(i) > core + 1e-9 * g.spacing();
    });
}

/// candidate >= alternate - tol at every common active node and time, for every alternate.
inline OrderVerdict maximality_check(const SpaceTimeField& candidate, const std::vector<const SpaceTimeField*>& alternates,
                                     double tol = 1e-6) {
    OrderVerdict all;
    all.worst = -inf;
    for (const auto* alt : alternates) {
        require_same_shape(candidate, *alt);
        const auto v = detail::order_scan(*alt, candidate, tol, [](std::size_t, double) { return true; });
        all.checked += v.checked;
        if (v.worst > all.worst) {
            all.worst = v.worst;
            all.worst_node = v.worst_node;
            all.worst_time = v.worst_time;
        }
    }
    if (all.checked == 0) all.worst = 0.0;
    all.pass = all.worst <= tol;
    return all;
}

/// lower <= u <= upper within tol at stored nodes and times inside both barriers' validity sets.
inline OrderVerdict barrier_sandwich(const SpaceTimeField& u, const Barrier& lower, const Barrier& upper,
                                     double tol = 1e-6) {
    require(lower.spec().side == Side::lower && upper.spec().side == Side::upper, ErrorKind::config,
            "sandwich needs a lower and an upper barrier");
    OrderVerdict v;
    v.worst = -inf;
    for (std::size_t k = 0; k < u.times.size(); ++k) {
        const double t = u.times[k];
        if (!lower.in_window(t) || !upper.in_window(t)) continue;
        for (std::size_t i = u.dec.lo; i <= u.dec.hi; ++i) {
            const Point p{u.grid.node(i), 0.0};
            if (!lower.in_region(p) || !upper.in_region(p)) continue;
            ++v.checked;
            const double val = u.values[k][i];
            const double gap = std::max(lower(p, t) - val, val - upper(p, t));
            if (gap > v.worst) {
                v.worst = gap;
                v.worst_node = p.axial;
                v.worst_time = t;
            }
        }
    }
    if (v.checked == 0) v.worst = 0.0;
    v.pass = v.checked > 0 && v.worst <= tol;
    return v;
}

// ---------------------------------------------------------------------------
// Flux balance
// ---------------------------------------------------------------------------

struct FluxBalance {
    double max_defect = 0.0;    // max over stored steps of |d/dt sum vol rho u - boundary flux|
    double max_flux = 0.0;      // scale of the boundary flux
};

/// Discrete integral identity on consecutive stored rows (meaningful with store stride 1).
inline FluxBalance flux_balance(const SpaceTimeField& f, const DensityModel& rho, const Nonlinearity& G) {
    const RadialLaplacian lap(f.grid);
    const auto& dec = f.dec;
    FluxBalance out;
    std::vector<double> g(f.grid.size(), nan_value);
    for (std::size_t k = 1; k < f.times.size(); ++k) {
        const double dt = f.times[k] - f.times[k - 1];
        double mass_rate = 0.0;
        for (std::size_t i = dec.lo; i <= dec.hi; ++i) {
            g[i] = G(f.values[k][i]);
            if (!dec.unknown(i)) continue;
            mass_rate += lap.volume(i) * rho.at(f.grid.node(i)) * (f.values[k][i] - f.values[k - 1][i]) / dt;
        }
        double flux = 0.0;
        if (dec.hi_dirichlet) flux += lap.face_flux(g, dec.hi - 1);
        if (dec.lo_dirichlet) flux -= lap.face_flux(g, dec.lo);
        out.max_defect = std::max(out.max_defect, std::abs(mass_rate - flux));
        out.max_flux = std::max(out.max_flux, std::abs(flux));
    }
    return out;
}

} // namespace collar
