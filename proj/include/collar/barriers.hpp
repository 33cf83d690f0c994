#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collar/errors.hpp"
#include "collar/geometry.hpp"
#include "collar/models.hpp"

namespace collar {

// ---------------------------------------------------------------------------
// Boundary potential V(d)
// ---------------------------------------------------------------------------

/// V(d) = margin * int_0^d int_s^eps_hat rho_bar(r) dr ds
///      = margin * int_0^eps_hat rho_bar(r) min(r, d) dr,
/// so V'' = -margin * rho_bar on (0, eps_hat). Beyond eps_hat V is held constant.
class BoundaryPotential {
public:
    /// Closed form for rho_bar = c * eta^(-alpha).
    static BoundaryPotential power_law(double alpha, double eps_hat, double margin = 2.0, double c = 1.0) {
        check(h4_integral_power_law(alpha, eps_hat, c), eps_hat, margin);
        BoundaryPotential v;
        v.eps_hat_ = eps_hat;
        v.margin_ = margin;
        v.closed_form_ = true;
        v.majorant_ = [=](double eta) { return c * std::pow(eta, -alpha); };
        v.value_ = [=](double d) {
            if (d <= 0.0) return 0.0;
            double tail;
            if (std::abs(alpha - 1.0) < 1e-14) tail = d * std::log(eps_hat / d);
            else tail = d * (std::pow(eps_hat, 1.0 - alpha) - std::pow(d, 1.0 - alpha)) / (1.0 - alpha);
            return c * margin * (std::pow(d, 2.0 - alpha) / (2.0 - alpha) + tail);
        };
        v.slope_ = [=](double d) {
            if (std::abs(alpha - 1.0) < 1e-14) return c * margin * std::log(eps_hat / d);
            return c * margin * (std::pow(eps_hat, 1.0 - alpha) - std::pow(d, 1.0 - alpha)) / (1.0 - alpha);
        };
        return v;
    }

    /// Generic majorant: both inner integrals by Gauss-Kronrod over dyadic pieces.
    static BoundaryPotential from_majorant(std::function<double(double)> majorant, double eps_hat,
                                           double margin = 2.0) {
        check(h4_integral(majorant, eps_hat), eps_hat, margin);
        BoundaryPotential v;
        v.eps_hat_ = eps_hat;
        v.margin_ = margin;
        v.closed_form_ = false;
        v.majorant_ = majorant;
        v.slope_ = [=](double d) { return margin * upper_integral(majorant, d, eps_hat); };
        v.value_ = [=](double d) {
            if (d <= 0.0) return 0.0;
            return margin * (h4_integral(majorant, d).value + d * upper_integral(majorant, d, eps_hat));
        };
        return v;
    }

    /// Closed form where the density allows it, quadrature otherwise.
    static BoundaryPotential for_density(const DensityModel& rho, double eps_hat, double margin = 2.0) {
        switch (rho.kind()) {
        case DensityKind::constant: return power_law(0.0, eps_hat, margin, rho.coefficient());
        case DensityKind::power_law: return power_law(rho.exponent(), eps_hat, margin, rho.coefficient());
        case DensityKind::tabulated: return from_majorant(rho.majorant_function(), eps_hat, margin);
        }
        fail(ErrorKind::model, "unknown density kind");
    }

    double operator()(double d) const { return value_(std::min(std::max(d, 0.0), eps_hat_)); }
    /// V'(d) for 0 < d < eps_hat, zero beyond.
    double derivative(double d) const { return d >= eps_hat_ ? 0.0 : slope_(d); }
    double majorant(double eta) const { return majorant_(eta); }
    double eps_hat() const noexcept { return eps_hat_; }
    double margin() const noexcept { return margin_; }
    bool closed_form() const noexcept { return closed_form_; }

private:
    BoundaryPotential() = default;

    static void check(const H4Result& h4, double eps_hat, double margin) {
        require(eps_hat > 0.0, ErrorKind::config, "potential scale must be positive");
        require(margin >= 1.0, ErrorKind::config, "curvature margin must be at least 1");
        require(h4.finite, ErrorKind::regime, "H4 integral diverges; the boundary potential does not exist");
    }

    static double upper_integral(const std::function<double(double)>& f, double a, double b) {
        using boost::math::quadrature::gauss_kronrod;
        double sum = 0.0;
        for (double lo = a; lo < b;) {
            const double hi = std::min(b, 2.0 * lo);
            sum += gauss_kronrod<double, 61>::integrate(f, lo, hi, 12, 1e-14);
            lo = hi;
        }
        return sum;
    }

    double eps_hat_ = 0.0;
    double margin_ = 1.0;
    bool closed_form_ = false;
    std::function<double(double)> majorant_;
    std::function<double(double)> value_;
    std::function<double(double)> slope_;
};

inline BoundaryPotential build_boundary_potential(std::function<double(double)> majorant, double eps_hat,
                                                  double margin = 2.0) {
    return BoundaryPotential::from_majorant(std::move(majorant), eps_hat, margin);
}

// ---------------------------------------------------------------------------
// Miller barrier h(x)
// ---------------------------------------------------------------------------

/// h(x) = C [exp(-a R^2) - exp(-a |x - x1|^2)] with x1 the centre of the
/// exterior ball of radius R touching the boundary at x0.
class MillerBarrier {
public:
    static MillerBarrier build(const Domain& domain, double x0, double R, std::optional<double> steepness = {}) {
        require(R > 0.0, ErrorKind::geometry, "sphere radius must be positive");
        const auto bnd = domain.boundary_coordinates();
        require(std::any_of(bnd.begin(), bnd.end(), [&](double b) { return std::abs(b - x0) <= 1e-12 * domain.width(); }),
                ErrorKind::geometry, "anchor " + std::to_string(x0) + " is not a boundary point");
        const double inward = domain.inward_direction(x0);
        if (domain.kind() == DomainKind::annulus && inward > 0.0) {
            require(R <= domain.lower() * (1.0 + 1e-12), ErrorKind::geometry,
                    "exterior sphere radius exceeds the inner radius");
        }
        const int N = domain.dimension();
        MillerBarrier m;
        m.x0_ = x0;
        m.x1_ = x0 - inward * R;
        m.R_ = R;
        m.N_ = N;
        m.a_ = steepness.value_or(N / (R * R));
        require(m.a_ > N / (2.0 * R * R) * (1.0 + 1e-12), ErrorKind::geometry,
                "steepness must exceed N/(2R^2) for a negative Laplacian");
        // min over r in [R, 2R] of exp(-a r^2)(4a^2 r^2 - 2aN)
        double worst = inf;
        constexpr int samples = 4000;
        for (int k = 0; k <= samples; ++k) {
            const double r = R * (1.0 + static_cast<double>(k) / samples);
            worst = std::min(worst, profile_curvature(m.a_, N, r));
        }
        require(worst > 0.0 && std::isfinite(1.0 / worst), ErrorKind::geometry,
                "Laplacian of the Miller profile does not stay negative on the region");
        m.C_ = 1.05 / worst;
        return m;
    }

    double operator()(const Point& p) const {
        const double r2 = sq(p.axial - x1_) + sq(p.transverse);
        return C_ * (std::exp(-a_ * R_ * R_) - std::exp(-a_ * r2));
    }
    double at(double axial) const { return (*this)(Point{axial, 0.0}); }

    /// Continuous Laplacian C exp(-a r^2)(2aN - 4a^2 r^2).
    double laplacian(const Point& p) const {
        const double r2 = sq(p.axial - x1_) + sq(p.transverse);
        return C_ * std::exp(-a_ * r2) * (2.0 * a_ * N_ - 4.0 * a_ * a_ * r2);
    }

    bool in_region(const Domain& domain, const Point& p) const {
        return std::hypot(p.axial - x0_, p.transverse) < R_ && domain.contains(domain.reduced(p));
    }

    double anchor() const noexcept { return x0_; }
    double centre() const noexcept { return x1_; }
    double radius() const noexcept { return R_; }
    double steepness() const noexcept { return a_; }
    double amplitude() const noexcept { return C_; }

    static double profile_curvature(double a, int N, double r) {
        return std::exp(-a * r * r) * (4.0 * a * a * r * r - 2.0 * a * N);
    }

private:
    static double sq(double v) { return v * v; }
    double x0_ = 0.0, x1_ = 0.0, R_ = 0.0, a_ = 0.0, C_ = 0.0;
    int N_ = 1;
};

inline MillerBarrier build_miller_barrier(const Domain& domain, double x0, double R,
                                          std::optional<double> steepness = {}) {
    return MillerBarrier::build(domain, x0, R, steepness);
}

// ---------------------------------------------------------------------------
// Constants
// ---------------------------------------------------------------------------

enum class BarrierCase { v_timed, miller_timed, v_stationary, miller_stationary };
enum class Side { lower, upper };

constexpr std::string_view to_string(BarrierCase c) {
    switch (c) {
    case BarrierCase::v_timed: return "v-timed";
    case BarrierCase::miller_timed: return "miller-timed";
    case BarrierCase::v_stationary: return "v-stationary";
    case BarrierCase::miller_stationary: return "miller-stationary";
    }
    return "?";
}
constexpr std::string_view to_string(Side s) { return s == Side::lower ? "lower" : "upper"; }

constexpr bool is_timed(BarrierCase c) { return c == BarrierCase::v_timed || c == BarrierCase::miller_timed; }
constexpr bool uses_potential_v(BarrierCase c) {
    return c == BarrierCase::v_timed || c == BarrierCase::v_stationary;
}

inline constexpr double safety_factor = 1.05;

struct ConstantInputs {
    double inf_rho = 1.0;
    double sup_rho = 1.0;
    double alpha0 = 0.0;
    double delta = 0.0;
    double phi_norm = 0.0;       // |phi|_inf
    double phi_anchor = 0.0;     // phi(x0), used by the stationary rules
    double eta0 = 0.0;
    double K = 0.0;
    int N = 1;
    double lateral_inf = inf;    // inf of V or h over the lateral boundary (inf when that set is empty)
    bool h4_finite = true;
};

struct BarrierConstants {
    double M = 0.0;
    double lambda = 0.0;
    double beta = 0.0;
    bool has_lambda = false;
    bool has_beta = false;
    // smallest values meeting the inequalities, before the safety factor
    double M_raw = 0.0;
    double lambda_raw = 0.0;
    double beta_raw = 0.0;
};

/// Smallest constants meeting the inequalities of the case, then scaled by 1.05.
/// M is computed from the already-scaled beta and lambda.
inline BarrierConstants select_barrier_constants(BarrierCase c, Side side, const ConstantInputs& in,
                                                 const Nonlinearity& G) {
    require(in.delta > 0.0, ErrorKind::config, "localization radius must be positive");
    if (is_timed(c)) {
        require(in.alpha0 > 0.0, ErrorKind::regime,
                "timed barriers need G' >= alpha0 > 0; use the nondegenerate surrogate");
    }
    if (uses_potential_v(c)) {
        require(in.inf_rho > 0.0, ErrorKind::regime, "V barriers need inf rho > 0");
        require(in.h4_finite, ErrorKind::regime, "V barriers need a finite H4 integral");
    } else {
        require(std::isfinite(in.sup_rho), ErrorKind::regime, "Miller barriers need a bounded density");
    }
    const double d2 = in.delta * in.delta;
    const double lower_gap = G(in.phi_norm + in.eta0) - G(-in.K);
    const double upper_gap = G(in.K) - G(-in.phi_norm);
    const double timed_gap = side == Side::lower ? lower_gap : upper_gap;
    const double stat_gap = side == Side::lower ? G(std::abs(in.phi_anchor) + in.eta0) - G(-in.K)
                                                : G(in.K) - G(in.phi_anchor);
    const double lateral = in.lateral_inf;

    BarrierConstants k;
    auto finish = [&](auto rule) {
        k.M_raw = rule(k.beta_raw, k.lambda_raw);
        k.beta = safety_factor * k.beta_raw;
        k.lambda = safety_factor * k.lambda_raw;
        k.M = safety_factor * rule(k.beta, k.lambda);
    };
    auto lateral_rule = [&](double gap) {
        if (!std::isfinite(lateral)) return 0.0;
        require(lateral > 0.0, ErrorKind::geometry, "potential vanishes on the lateral boundary");
        return std::max(gap, 0.0) / lateral;
    };

    switch (c) {
    case BarrierCase::v_timed:
        k.has_beta = k.has_lambda = true;
        k.beta_raw = k.lambda_raw = std::max(timed_gap, 0.0) / d2;
        finish([&](double b, double l) { return 2.0 * b * in.N / in.inf_rho + 2.0 * l * in.delta / in.alpha0; });
        break;
    case BarrierCase::miller_timed:
        k.has_lambda = true;
        k.lambda_raw = std::max(timed_gap, 0.0) / d2;
        finish([&](double, double l) {
            return std::max(2.0 * l * in.delta * in.sup_rho / in.alpha0, lateral_rule(timed_gap));
        });
        break;
    case BarrierCase::v_stationary:
        if (side == Side::lower) {
            k.has_beta = true;
            k.beta_raw = std::max(stat_gap, 0.0) / d2;
            finish([&](double b, double) { return 2.0 * b * in.N / in.inf_rho; });
        } else {
            finish([&](double, double) { return lateral_rule(stat_gap); });
        }
        break;
    case BarrierCase::miller_stationary:
        k.has_beta = true;
        k.beta_raw = std::max(stat_gap, 0.0) / d2;
        finish([&](double b, double) { return 2.0 * b * in.N; });
        break;
    }
    return k;
}

// ---------------------------------------------------------------------------
// Barrier
// ---------------------------------------------------------------------------

struct BarrierSpec {
    BarrierCase kind = BarrierCase::v_timed;
    Side side = Side::lower;
    double x0 = 0.0;          // boundary point, reduced coordinate (on the e1 axis)
    double t0 = 0.0;
    double sigma = 0.1;
    double eta = 0.0;
    double horizon = 1.0;
};

/// One sub- or supersolution of the case's formula with its constants and region.
class Barrier {
public:
    Barrier(BarrierSpec spec, BarrierConstants constants, double delta, double K, Domain domain, Nonlinearity G,
            BoundaryData phi, std::optional<BoundaryPotential> V, std::optional<MillerBarrier> h)
        : spec_(spec), k_(constants), delta_(delta), K_(K), domain_(std::move(domain)), G_(std::move(G)),
          phi_(std::move(phi)), V_(std::move(V)), h_(std::move(h)) {
        require(spec_.sigma > 0.0, ErrorKind::config, "shift sigma must be positive");
        require(spec_.eta >= 0.0, ErrorKind::config, "lift eta must be nonnegative");
        require(delta_ > 0.0, ErrorKind::config, "localization radius must be positive");
        if (uses_potential_v(spec_.kind)) require(V_.has_value(), ErrorKind::config, "V barrier without a potential");
        else require(h_.has_value(), ErrorKind::config, "Miller barrier without h");
        if (is_timed(spec_.kind)) {
            require(spec_.t0 > 0.0 && spec_.t0 <= spec_.horizon, ErrorKind::config, "anchor time must lie in (0, T]");
        }
        anchor_value_ = G_(phi_(spec_.x0, is_timed(spec_.kind) ? spec_.t0 : 0.0) + spec_.eta);
    }

    const BarrierSpec& spec() const noexcept { return spec_; }
    const BarrierConstants& constants() const noexcept { return k_; }
    double delta() const noexcept { return delta_; }
    double bound() const noexcept { return K_; }
    const Domain& domain() const noexcept { return domain_; }
    const Nonlinearity& nonlinearity() const noexcept { return G_; }

    double t_begin() const { return is_timed(spec_.kind) ? spec_.t0 - delta_ : 0.0; }
    double t_end() const { return is_timed(spec_.kind) ? std::min(spec_.t0 + delta_, spec_.horizon) : spec_.horizon; }

    double potential(const Point& p) const {
        if (V_) return (*V_)(domain_.distance(p));
        return (*h_)(p);
    }

    /// Argument of G^-1 in the barrier formula.
    double g_value(const Point& p, double t) const {
        const double sgn = spec_.side == Side::lower ? -1.0 : 1.0;
        double penalty = k_.M * potential(p) + spec_.sigma;
        const double dx2 = (p.axial - spec_.x0) * (p.axial - spec_.x0) + p.transverse * p.transverse;
        if (k_.has_beta) penalty += k_.beta * dx2;
        if (k_.has_lambda) penalty += k_.lambda * (t - spec_.t0) * (t - spec_.t0);
        return anchor_value_ + sgn * penalty;
    }

    double operator()(const Point& p, double t) const {
        const double y = g_value(p, t);
        if (!(y >= G_.range_lo() && y <= G_.range_hi())) {
            fail(ErrorKind::range, "barrier argument " + std::to_string(y) + " outside the range of G at x = (" +
                                       std::to_string(p.axial) + ", " + std::to_string(p.transverse) +
                                       "), t = " + std::to_string(t));
        }
        return G_.inverse(y);
    }
    double at(double s, double t) const { return (*this)(Point{s, 0.0}, t); }

    bool in_region(const Point& p) const {
        const double r = std::hypot(p.axial - spec_.x0, p.transverse);
        return r < delta_ && domain_.contains(domain_.reduced(p)) && domain_.distance(p) > 0.0;
    }
    bool in_window(double t) const { return t > t_begin() && t < t_end(); }

private:
    BarrierSpec spec_;
    BarrierConstants k_;
    double delta_;
    double K_;
    Domain domain_;
    Nonlinearity G_;
    BoundaryData phi_;
    std::optional<BoundaryPotential> V_;
    std::optional<MillerBarrier> h_;
    double anchor_value_ = 0.0;
};

/// Barrier from already-selected constants.
inline Barrier build_barrier(const BarrierSpec& spec, const BarrierConstants& constants, double delta, double K,
                             const Domain& domain, const Nonlinearity& G, const BoundaryData& phi,
                             std::optional<BoundaryPotential> V, std::optional<MillerBarrier> h) {
    return Barrier(spec, constants, delta, K, domain, G, phi, std::move(V), std::move(h));
}

/// inf of the potential over the part of the sphere |x - x0| = delta inside
/// Omega (and at distance >= eps from the boundary when eps > 0). Sampled on a
/// half circle of the (axial, transverse) plane; inf when that set is empty.
inline double lateral_infimum(const Domain& domain, double x0, double delta,
                              const std::function<double(const Point&)>& potential, double eps = 0.0) {
    double best = inf;
    const int samples = domain.radial() ? 721 : 2;
    for (int k = 0; k < samples; ++k) {
        const double th = domain.radial() ? M_PI * k / (samples - 1) : M_PI * k;
        const Point p{x0 + delta * std::cos(th), domain.radial() ? delta * std::sin(th) : 0.0};
        const double s = domain.reduced(p);
        if (!domain.contains(s)) continue;
        const double d = domain.distance(s);
        if (d <= 0.0 || d < eps) continue;
        best = std::min(best, potential(p));
    }
    return best;
}

/// Largest delta <= cap such that G(phi + eta) oscillates by at most sigma over
/// boundary points within delta of x0 and times within delta of t0.
inline double localization_radius(const Domain& domain, const BoundaryData& phi, const Nonlinearity& G, double x0,
                                  double t0, double eta, double sigma, double cap, double horizon, bool timed) {
    require(cap > 0.0, ErrorKind::config, "localization radius cap must be positive");
    auto oscillation = [&](double delta) {
        double lo = inf, hi = -inf;
        const int nt = timed && phi.time_dependent() ? 201 : 1;
        for (double b : domain.boundary_coordinates()) {
            // radial data are constant on each sphere component, so only the anchor's component counts
            const double reach = domain.radial() ? 1e-12 * domain.width() : delta;
            if (std::abs(b - x0) > reach) continue;
            for (int k = 0; k < nt; ++k) {
                const double t = nt == 1 ? t0 : std::clamp(t0 - delta + 2.0 * delta * k / (nt - 1), 0.0, horizon);
                const double v = G(phi(b, t) + eta);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        return hi - lo;
    };
    if (oscillation(cap) <= sigma) return cap;
    double lo = 0.0, hi = cap;
    for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (oscillation(mid) <= sigma) lo = mid; else hi = mid;
    }
    require(lo > 0.0, ErrorKind::config, "no localization radius keeps the oscillation below sigma");
    return lo;
}

// ---------------------------------------------------------------------------
// Residual verification
// ---------------------------------------------------------------------------

struct ResidualReport {
    double max_residual = -inf;
    double min_residual = inf;
    double worst_axial = 0.0;   // where the one-sided bound is closest to failing
    double worst_time = 0.0;
    double tolerance = 0.0;
    double c_res = 0.0;
    std::size_t nodes = 0;
    std::size_t times = 0;
    bool pass = false;
};

/// Discrete rho * dw/dt - Lap G(w) at grid nodes inside the validity region,
/// centred differences in space (the axisymmetric N-D stencil on the e1 axis)
/// and in time. Lower barriers pass when max <= tol, upper when min >= -tol.
inline ResidualReport verify_barrier_residual(const std::function<double(const Point&, double)>& w, Side side,
                                              const std::function<bool(const Point&)>& in_region, double t_begin,
                                              double t_end, const Grid& grid, const DensityModel& rho,
                                              const Nonlinearity& G, double dt, int time_samples = 21) {
    const Domain& dom = grid.domain();
    const int N = dom.dimension();
    const double h = grid.spacing();
    require(t_end > t_begin, ErrorKind::config, "empty time window");
    const double step = (t_end - t_begin) / (time_samples + 1);
    dt = std::min(dt, 0.5 * step);

    std::vector<std::size_t> nodes;
    for (std::size_t i = 1; i + 1 < grid.size(); ++i) {
        const Point p{grid.node(i), 0.0};
        if (in_region(p)) nodes.push_back(i);
    }
    ResidualReport rep;
    rep.nodes = nodes.size();
    rep.times = static_cast<std::size_t>(time_samples);
    if (nodes.empty()) {
        rep.pass = true;
        return rep;
    }

    auto Gw = [&](double a, double tr, double t) { return G(w(Point{a, tr}, t)); };
    double third_x = 0.0, third_t = 0.0, round = 0.0;
    double worst = side == Side::lower ? -inf : inf;
    for (int j = 1; j <= time_samples; ++j) {
        const double t = t_begin + step * j;
        for (auto i : nodes) {
            const double s = grid.node(i);
            const double r = rho.at(s);
            const double g0 = Gw(s, 0.0, t), gp = Gw(s + h, 0.0, t), gm = Gw(s - h, 0.0, t);
            double lap = (gp - 2.0 * g0 + gm) / (h * h);
            if (N > 1) lap += (N - 1) * 2.0 * (Gw(s, h, t) - g0) / (h * h);
            const double wp = w(Point{s, 0.0}, t + dt), wm = w(Point{s, 0.0}, t - dt);
            const double res = r * (wp - wm) / (2.0 * dt) - lap;
            rep.max_residual = std::max(rep.max_residual, res);
            rep.min_residual = std::min(rep.min_residual, res);
            const bool worse = side == Side::lower ? res > worst : res < worst;
            if (worse) {
                worst = res;
                rep.worst_axial = s;
                rep.worst_time = t;
            }
            // third differences for the truncation scale, where the stencil stays in the domain
            if (in_region(Point{s + 2.0 * h, 0.0})) {
                const double gp2 = Gw(s + 2.0 * h, 0.0, t);
                third_x = std::max(third_x, std::abs(gp2 - 3.0 * gp + 3.0 * g0 - gm) / (h * h * h));
            }
            const double w0 = w(Point{s, 0.0}, t), wp2 = w(Point{s, 0.0}, t + 2.0 * dt);
            third_t = std::max(third_t, r * std::abs(wp2 - 3.0 * wp + 3.0 * w0 - wm) / (dt * dt * dt));
            round = std::max(round, 16.0 * 2.2e-16 * (std::abs(g0) * (2.0 * N) / (h * h) + r * std::abs(w0) / dt));
        }
    }
    rep.c_res = std::max(third_x, third_t);
    rep.tolerance = rep.c_res * (h + dt) + round + 1e-10;
    rep.pass = side == Side::lower ? rep.max_residual <= rep.tolerance : rep.min_residual >= -rep.tolerance;
    return rep;
}

inline ResidualReport verify_barrier_residual(const Barrier& b, const Grid& grid, const DensityModel& rho,
                                              const Nonlinearity& G, double dt) {
    return verify_barrier_residual([&](const Point& p, double t) { return b(p, t); }, b.spec().side,
                                   [&](const Point& p) { return b.in_region(p); }, b.t_begin(), b.t_end(), grid,
                                   rho, G, dt);
}

} // namespace collar
