#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include <boost/math/special_functions/fpclassify.hpp>
// pchip.hpp in Boost 1.74 calls unqualified isnan; fpclassify must come first.
#include <boost/math/interpolators/pchip.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "collar/errors.hpp"
#include "collar/geometry.hpp"

namespace collar {

inline constexpr double inf = std::numeric_limits<double>::infinity();

// ---------------------------------------------------------------------------
// Tables
// ---------------------------------------------------------------------------

struct Table {
    std::vector<double> x;
    std::vector<double> y;
};

/// Reads a two-column numeric file; '#' starts a comment. The first column must
/// be strictly increasing.
inline Table load_table(const std::string& path) {
    std::ifstream in(path);
    require(static_cast<bool>(in), ErrorKind::model, "cannot open table file '" + path + "'");
    Table t;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        double a = 0.0, b = 0.0;
        if (!(ls >> a)) continue;
        require(static_cast<bool>(ls >> b), ErrorKind::model,
                path + ":" + std::to_string(lineno) + ": expected two columns");
        if (!t.x.empty()) {
            require(a > t.x.back(), ErrorKind::model,
                    path + ":" + std::to_string(lineno) + ": first column must be strictly increasing");
        }
        t.x.push_back(a);
        t.y.push_back(b);
    }
    require(t.x.size() >= 2, ErrorKind::model, "table '" + path + "' needs at least two rows");
    return t;
}

inline double interpolate_linear(const Table& t, double x) {
    if (x <= t.x.front()) return t.y.front();
    if (x >= t.x.back()) return t.y.back();
    const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
    const auto j = static_cast<std::size_t>(it - t.x.begin());
    const double w = (x - t.x[j - 1]) / (t.x[j] - t.x[j - 1]);
    return (1.0 - w) * t.y[j - 1] + w * t.y[j];
}

// ---------------------------------------------------------------------------
// Density rho(x)
// ---------------------------------------------------------------------------

enum class DensityKind { constant, power_law, tabulated };

/// rho(x) bound to a domain. Power law means rho = c * d(x)^(-alpha).
class DensityModel {
public:
    static DensityModel constant(const Domain& domain, double c) {
        require(c > 0.0, ErrorKind::model, "constant density must be positive");
        DensityModel m(domain, DensityKind::constant);
        m.c_ = c;
        return m;
    }

    static DensityModel power_law(const Domain& domain, double alpha, double c = 1.0) {
        require(c > 0.0, ErrorKind::model, "power-law coefficient must be positive");
        require(std::isfinite(alpha), ErrorKind::model, "power-law exponent must be finite");
        DensityModel m(domain, DensityKind::power_law);
        m.c_ = c;
        m.alpha_ = alpha;
        return m;
    }

    /// Piecewise-linear table over the reduced coordinate covering the domain.
    static DensityModel tabulated(const Domain& domain, Table table) {
        require(table.x.front() <= domain.lower() && table.x.back() >= domain.upper(), ErrorKind::model,
                "density table does not cover the domain");
        for (double v : table.y) require(v > 0.0, ErrorKind::model, "density table has non-positive values");
        DensityModel m(domain, DensityKind::tabulated);
        m.table_ = std::make_shared<const Table>(std::move(table));
        return m;
    }

    DensityKind kind() const noexcept { return kind_; }
    double exponent() const noexcept { return alpha_; }
    double coefficient() const noexcept { return c_; }
    const Domain& domain() const noexcept { return domain_; }

    double at(double s) const {
        switch (kind_) {
        case DensityKind::constant: return c_;
        case DensityKind::power_law: return c_ * std::pow(domain_.distance(s), -alpha_);
        case DensityKind::tabulated: return interpolate_linear(*table_, s);
        }
        return 0.0;
    }
    double at(const Point& p) const { return at(domain_.reduced(p)); }

    /// One-variable majorant rho_bar(eta) with rho(x) <= rho_bar(d(x)).
    double majorant(double eta) const {
        switch (kind_) {
        case DensityKind::constant: return c_;
        case DensityKind::power_law: return c_ * std::pow(eta, -alpha_);
        case DensityKind::tabulated: {
            double best = 0.0;
            for (double b : domain_.boundary_coordinates()) {
                const double s = b + domain_.inward_direction(b) * eta;
                if (domain_.contains(s)) best = std::max(best, interpolate_linear(*table_, s));
            }
            return best;
        }
        }
        return 0.0;
    }

    std::function<double(double)> majorant_function() const {
        return [self = *this](double eta) { return self.majorant(eta); };
    }

    /// inf over the domain (exact for the closed-form kinds).
    double infimum() const {
        switch (kind_) {
        case DensityKind::constant: return c_;
        case DensityKind::power_law:
            return alpha_ < 0.0 ? 0.0 : c_ * std::pow(domain_.max_distance(), -alpha_);
        case DensityKind::tabulated: return *std::min_element(table_->y.begin(), table_->y.end());
        }
        return 0.0;
    }

    /// sup over the domain; +inf when rho blows up at the boundary.
    double supremum() const {
        switch (kind_) {
        case DensityKind::constant: return c_;
        case DensityKind::power_law:
            return alpha_ > 0.0 ? inf : c_ * std::pow(domain_.max_distance(), -alpha_);
        case DensityKind::tabulated: return *std::max_element(table_->y.begin(), table_->y.end());
        }
        return 0.0;
    }

    bool has_positive_inf() const { return infimum() > 0.0; }
    bool is_bounded() const { return std::isfinite(supremum()); }

    std::string describe() const {
        switch (kind_) {
        case DensityKind::constant: return "constant(" + std::to_string(c_) + ")";
        case DensityKind::power_law:
            return "power-law(c=" + std::to_string(c_) + ", alpha=" + std::to_string(alpha_) + ")";
        case DensityKind::tabulated: return "tabulated(" + std::to_string(table_->x.size()) + " rows)";
        }
        return "?";
    }

private:
    DensityModel(const Domain& domain, DensityKind kind) : domain_(domain), kind_(kind) {}

    Domain domain_;
    DensityKind kind_;
    double c_ = 1.0;
    double alpha_ = 0.0;
    std::shared_ptr<const Table> table_;
};

// ---------------------------------------------------------------------------
// Nonlinearity G(u)
// ---------------------------------------------------------------------------

enum class NonlinearityKind { linear, porous_medium, nondegenerate, table, surrogate };

constexpr std::string_view to_string(NonlinearityKind k) {
    switch (k) {
    case NonlinearityKind::linear: return "linear";
    case NonlinearityKind::porous_medium: return "porous-medium";
    case NonlinearityKind::nondegenerate: return "nondegenerate";
    case NonlinearityKind::table: return "table";
    case NonlinearityKind::surrogate: return "surrogate";
    }
    return "?";
}

namespace detail {

struct NonlinearityImpl {
    virtual ~NonlinearityImpl() = default;
    virtual double value(double u) const = 0;
    virtual double derivative(double u) const = 0;
    virtual bool has_closed_inverse() const { return false; }
    virtual double closed_inverse(double) const { return 0.0; }
    virtual double domain_lo() const { return -inf; }
    virtual double domain_hi() const { return inf; }
};

/// Safeguarded Newton-bisection on a strictly increasing G. Pure bisection is
/// used wherever G' is too small for a trustworthy Newton step.
inline double invert_monotone(const NonlinearityImpl& g, double y) {
    const double dlo = g.domain_lo(), dhi = g.domain_hi();
    double lo = std::max(-1.0, dlo), hi = std::min(1.0, dhi);
    for (int k = 0; g.value(lo) > y; ++k) {
        require(k < 2000 && lo > dlo, ErrorKind::range, "G^-1 argument below the range of G");
        lo = std::max(dlo, lo * 2.0 - 1.0);
    }
    for (int k = 0; g.value(hi) < y; ++k) {
        require(k < 2000 && hi < dhi, ErrorKind::range, "G^-1 argument above the range of G");
        hi = std::min(dhi, hi * 2.0 + 1.0);
    }
    double u = 0.5 * (lo + hi);
    const double ytol = 1e-14 * std::max(1.0, std::abs(y));
    for (int it = 0; it < 400; ++it) {
        const double r = g.value(u) - y;
        if (std::abs(r) <= ytol) return u;
        if (r > 0.0) hi = u; else lo = u;
        if (hi - lo <= 1e-15 * std::max(1.0, std::abs(u))) return 0.5 * (lo + hi);
        const double dg = g.derivative(u);
        double next = (dg > 1e-12) ? u - r / dg : 0.5 * (lo + hi);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        u = next;
    }
    return u;
}

struct LinearG final : NonlinearityImpl {
    double k;
    explicit LinearG(double slope) : k(slope) {}
    double value(double u) const override { return k * u; }
    double derivative(double) const override { return k; }
    bool has_closed_inverse() const override { return true; }
    double closed_inverse(double y) const override { return y / k; }
};

struct PorousG final : NonlinearityImpl {
    double m;
    explicit PorousG(double exponent) : m(exponent) {}
    double value(double u) const override { return std::copysign(std::pow(std::abs(u), m), u); }
    double derivative(double u) const override { return m * std::pow(std::abs(u), m - 1.0); }
    bool has_closed_inverse() const override { return true; }
    double closed_inverse(double y) const override { return std::copysign(std::pow(std::abs(y), 1.0 / m), y); }
};

// k u + |u|^(m-1) u
struct NondegenerateG final : NonlinearityImpl {
    double k, m;
    NondegenerateG(double slope, double exponent) : k(slope), m(exponent) {}
    double value(double u) const override { return k * u + std::copysign(std::pow(std::abs(u), m), u); }
    double derivative(double u) const override { return k + m * std::pow(std::abs(u), m - 1.0); }
};

struct TableG final : NonlinearityImpl {
    double lo, hi;
    boost::math::interpolators::pchip<std::vector<double>> spline;
    TableG(std::vector<double> u, std::vector<double> g)
        : lo(u.front()), hi(u.back()), spline(std::move(u), std::move(g)) {}
    void check(double u) const {
        require(u >= lo && u <= hi, ErrorKind::model,
                "G table evaluated at " + std::to_string(u) + " outside its range");
    }
    double value(double u) const override { check(u); return spline(u); }
    double derivative(double u) const override { check(u); return spline.prime(u); }
    double domain_lo() const override { return lo; }
    double domain_hi() const override { return hi; }
};

} // namespace detail

/// Monotone nonlinearity with G, G', G^-1 and its degeneracy floor alpha_0
/// (inf G', zero when G degenerates).
class Nonlinearity {
public:
    static Nonlinearity linear(double slope = 1.0) {
        require(slope > 0.0, ErrorKind::model, "linear G needs a positive slope");
        return Nonlinearity(NonlinearityKind::linear, std::make_shared<detail::LinearG>(slope), slope,
                            "linear(" + std::to_string(slope) + ")");
    }

    static Nonlinearity porous_medium(double m) {
        require(m > 1.0, ErrorKind::model, "porous-medium exponent must exceed 1");
        return Nonlinearity(NonlinearityKind::porous_medium, std::make_shared<detail::PorousG>(m), 0.0,
                            "porous-medium(m=" + std::to_string(m) + ")");
    }

    static Nonlinearity nondegenerate(double slope, double m) {
        require(slope > 0.0 && m >= 1.0, ErrorKind::model, "nondegenerate G needs slope > 0 and m >= 1");
        return Nonlinearity(NonlinearityKind::nondegenerate,
                            std::make_shared<detail::NondegenerateG>(slope, m), slope,
                            "nondegenerate(slope=" + std::to_string(slope) + ", m=" + std::to_string(m) + ")");
    }

    /// Monotone C^1 (PCHIP) interpolation of a strictly increasing table through (0, 0).
    static Nonlinearity table(Table t) {
        require(t.x.size() >= 4, ErrorKind::model, "G table needs at least four rows");
        for (std::size_t i = 1; i < t.y.size(); ++i) {
            require(t.y[i] > t.y[i - 1], ErrorKind::model, "G table must be strictly increasing");
        }
        require(t.x.front() < 0.0 && t.x.back() > 0.0, ErrorKind::model, "G table must bracket u = 0");
        auto impl = std::make_shared<detail::TableG>(t.x, t.y);
        require(std::abs(impl->value(0.0)) <= 1e-12, ErrorKind::model, "G table must satisfy G(0) = 0");
        double floor = inf;
        for (std::size_t i = 0; i < 2001; ++i) {
            const double u = t.x.front() + (t.x.back() - t.x.front()) * static_cast<double>(i) / 2000.0;
            floor = std::min(floor, impl->derivative(u));
        }
        return Nonlinearity(NonlinearityKind::table, impl, std::max(floor, 0.0),
                            "table(" + std::to_string(t.x.size()) + " rows)");
    }

    NonlinearityKind kind() const noexcept { return kind_; }
    double operator()(double u) const { return impl_->value(u); }
    double value(double u) const { return impl_->value(u); }
    double derivative(double u) const { return impl_->derivative(u); }
    double floor() const noexcept { return alpha0_; }
    bool satisfies_h5() const noexcept { return alpha0_ > 0.0; }
    const std::string& describe() const noexcept { return name_; }
    double domain_lo() const { return impl_->domain_lo(); }
    double domain_hi() const { return impl_->domain_hi(); }
    double range_lo() const { return std::isfinite(domain_lo()) ? value(domain_lo()) : -inf; }
    double range_hi() const { return std::isfinite(domain_hi()) ? value(domain_hi()) : inf; }

    double inverse(double y) const {
        require(std::isfinite(y), ErrorKind::range, "G^-1 of a non-finite value");
        require(y >= range_lo() && y <= range_hi(), ErrorKind::range,
                "G^-1 argument " + std::to_string(y) + " outside the range of G");
        if (impl_->has_closed_inverse()) return impl_->closed_inverse(y);
        return detail::invert_monotone(*impl_, y);
    }

    /// Internal: wraps an arbitrary implementation (used by the surrogate builder).
    Nonlinearity(NonlinearityKind kind, std::shared_ptr<const detail::NonlinearityImpl> impl, double alpha0,
                 std::string name)
        : kind_(kind), impl_(std::move(impl)), alpha0_(alpha0), name_(std::move(name)) {}

private:
    NonlinearityKind kind_;
    std::shared_ptr<const detail::NonlinearityImpl> impl_;
    double alpha0_;
    std::string name_;
};

namespace detail {

// G1 = G on [t, inf); cubic Hermite on [t/2, t] with end slopes (floor, G'(t))
// and secant slope (floor + G'(t))/2, so G1' interpolates linearly between
// them; slope `floor` below t/2.
struct SurrogateG final : NonlinearityImpl {
    Nonlinearity base;
    double s, t, y0, y1, d0, d1;
    SurrogateG(Nonlinearity g, double threshold, double floor)
        : base(std::move(g)), s(0.5 * threshold), t(threshold) {
        d0 = floor;
        d1 = base.derivative(t);
        y1 = base.value(t);
        y0 = y1 - (t - s) * 0.5 * (d0 + d1);
    }
    double value(double u) const override {
        if (u >= t) return base.value(u);
        if (u <= s) return y0 + d0 * (u - s);
        const double H = t - s, th = (u - s) / H;
        const double h00 = 2 * th * th * th - 3 * th * th + 1, h10 = th * th * th - 2 * th * th + th;
        const double h01 = -2 * th * th * th + 3 * th * th, h11 = th * th * th - th * th;
        return h00 * y0 + h10 * H * d0 + h01 * y1 + h11 * H * d1;
    }
    double derivative(double u) const override {
        if (u >= t) return base.derivative(u);
        if (u <= s) return d0;
        const double H = t - s, th = (u - s) / H;
        return (6 * th * th - 6 * th) * (y0 - y1) / H + (3 * th * th - 4 * th + 1) * d0 +
               (3 * th * th - 2 * th) * d1;
    }
    double domain_hi() const override { return base.domain_hi(); }
};

} // namespace detail

/// G1 with G1 = G on [threshold, inf) and G1' >= floor everywhere. The splice
/// is feasible when floor <= G' on [threshold/2, working_max]. G1(0) is in
/// general nonzero; only differences of G1 enter the equation.
inline Nonlinearity build_nondegenerate_surrogate(const Nonlinearity& g, double threshold, double floor,
                                                  double working_max = 0.0) {
    require(threshold > 0.0, ErrorKind::splice, "surrogate threshold must be positive");
    require(floor > 0.0, ErrorKind::splice, "surrogate floor must be positive");
    if (g.floor() >= floor) return g;
    const double hi = std::max(working_max, threshold);
    constexpr int samples = 400;
    for (int i = 0; i <= samples; ++i) {
        const double u = 0.5 * threshold + (hi - 0.5 * threshold) * i / samples;
        if (u > g.domain_hi()) break;
        const double dg = g.derivative(u);
        require(dg >= floor, ErrorKind::splice,
                "floor " + std::to_string(floor) + " exceeds G'(" + std::to_string(u) + ") = " + std::to_string(dg));
    }
    return Nonlinearity(NonlinearityKind::surrogate, std::make_shared<detail::SurrogateG>(g, threshold, floor),
                        floor, "surrogate(" + g.describe() + ", threshold=" + std::to_string(threshold) +
                                   ", floor=" + std::to_string(floor) + ")");
}

// ---------------------------------------------------------------------------
// Boundary and initial data
// ---------------------------------------------------------------------------

/// phi(x0, t) on S x [0, T], indexed by the reduced coordinate of the boundary
/// point. Off the boundary it is extended by its value at the nearest boundary point.
class BoundaryData {
public:
    using Fn = std::function<double(double, double)>;

    BoundaryData(Fn fn, bool time_dependent, std::string name, double positivity_floor = 0.0)
        : fn_(std::move(fn)), time_dependent_(time_dependent), floor_(positivity_floor), name_(std::move(name)) {}

    static BoundaryData constant(double value) {
        return BoundaryData([value](double, double) { return value; }, false,
                            "constant(" + std::to_string(value) + ")");
    }

    /// Different constants on the lower and upper boundary components.
    static BoundaryData per_side(const Domain& domain, double lower, double upper) {
        const double mid = 0.5 * (domain.lower() + domain.upper());
        return BoundaryData([=](double sb, double) { return sb < mid ? lower : upper; }, false,
                            "per-side(" + std::to_string(lower) + ", " + std::to_string(upper) + ")");
    }

    /// value + amplitude * sin(2 pi frequency t), same on every boundary point.
    static BoundaryData oscillating(double value, double amplitude, double frequency) {
        return BoundaryData(
            [=](double, double t) { return value + amplitude * std::sin(2.0 * M_PI * frequency * t); }, true,
            "oscillating(" + std::to_string(value) + ", " + std::to_string(amplitude) + ", " +
                std::to_string(frequency) + ")");
    }

    double operator()(double s_boundary, double t) const { return fn_(s_boundary, t); }
    double extended(const Domain& domain, double s, double t) const { return fn_(domain.nearest_boundary(s), t); }
    bool time_dependent() const noexcept { return time_dependent_; }
    double positivity_floor() const noexcept { return floor_; }
    const std::string& describe() const noexcept { return name_; }

    /// Sampled sup and inf over S x [0, T].
    std::pair<double, double> sampled_range(const Domain& domain, double horizon, int time_samples = 1001) const {
        double lo = inf, hi = -inf;
        const int nt = time_dependent_ ? time_samples : 1;
        for (double sb : domain.boundary_coordinates()) {
            for (int k = 0; k < nt; ++k) {
                const double t = nt == 1 ? 0.0 : horizon * k / (nt - 1);
                const double v = fn_(sb, t);
                lo = std::min(lo, v);
                hi = std::max(hi, v);
            }
        }
        return {lo, hi};
    }

    double sup_norm(const Domain& domain, double horizon) const {
        auto [lo, hi] = sampled_range(domain, horizon);
        return std::max(std::abs(lo), std::abs(hi));
    }

private:
    Fn fn_;
    bool time_dependent_;
    double floor_;
    std::string name_;
};

/// u0 as a function of the reduced coordinate.
class InitialData {
public:
    using Fn = std::function<double(double)>;

    InitialData(Fn fn, std::string name) : fn_(std::move(fn)), name_(std::move(name)) {}

    static InitialData constant(double value) {
        return InitialData([value](double) { return value; }, "constant(" + std::to_string(value) + ")");
    }

    double operator()(double s) const { return fn_(s); }
    const std::string& describe() const noexcept { return name_; }

    /// Sampled (min, max) over the closed domain.
    std::pair<double, double> sampled_range(const Domain& domain, int samples = 2001) const {
        double lo = inf, hi = -inf;
        for (int i = 0; i < samples; ++i) {
            const double s = domain.lower() + domain.width() * i / (samples - 1);
            const double v = fn_(s);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        return {lo, hi};
    }

    double sup_norm(const Domain& domain) const {
        auto [lo, hi] = sampled_range(domain);
        return std::max(std::abs(lo), std::abs(hi));
    }

private:
    Fn fn_;
    std::string name_;
};

// ---------------------------------------------------------------------------
// Integral test on the majorant
// ---------------------------------------------------------------------------

struct H4Result {
    bool finite = false;
    double value = inf;
    std::string method;              // "closed-form" or "quadrature"
    std::vector<double> shells;      // quadrature path: integrals over dyadic shells
    double tail_ratio = 0.0;         // quadrature path: observed shell-to-shell ratio
};

/// Closed form of int_0^eps_hat eta * c eta^(-alpha) d eta.
inline H4Result h4_integral_power_law(double alpha, double eps_hat, double c = 1.0) {
    require(eps_hat > 0.0 && c > 0.0, ErrorKind::model, "power-law integral needs eps_hat > 0 and c > 0");
    H4Result r;
    r.method = "closed-form";
    r.finite = alpha < 2.0;
    r.value = r.finite ? c * std::pow(eps_hat, 2.0 - alpha) / (2.0 - alpha) : inf;
    return r;
}

/// Quadrature route: Gauss-Kronrod over the dyadic shells
/// [eps_hat 2^(-k-1), eps_hat 2^(-k)], then a geometric tail. The integral is
/// declared divergent when the shell integrals stop decaying geometrically.
inline H4Result h4_integral(const std::function<double(double)>& majorant, double eps_hat) {
    require(eps_hat > 0.0, ErrorKind::model, "eps_hat must be positive");
    using boost::math::quadrature::gauss_kronrod;
    auto integrand = [&](double eta) {
        const double v = majorant(eta);
        require(std::isfinite(v) && v > 0.0, ErrorKind::model,
                "majorant is not positive at eta = " + std::to_string(eta));
        return eta * v;
    };

    H4Result r;
    r.method = "quadrature";
    constexpr int max_shells = 64;
    constexpr int window = 6;
    double sum = 0.0;
    double hi = eps_hat;
    for (int k = 0; k < max_shells; ++k) {
        const double lo = 0.5 * hi;
        const double shell = gauss_kronrod<double, 61>::integrate(integrand, lo, hi, 5, 1e-12);
        r.shells.push_back(shell);
        sum += shell;
        hi = lo;
        if (k >= window && shell <= 1e-17 * sum) break;
        if (k >= window) {
            bool growing = true;
            for (int j = k - window + 1; j <= k; ++j) growing = growing && r.shells[j] >= r.shells[j - 1] * (1.0 - 1e-7);
            if (growing) break;
        }
    }

    const auto n = r.shells.size();
    std::vector<double> ratios;
    for (std::size_t k = n - window; k < n; ++k) ratios.push_back(r.shells[k] / r.shells[k - 1]);
    const auto [rmin, rmax] = std::minmax_element(ratios.begin(), ratios.end());
    const double ratio = ratios.back();
    r.tail_ratio = ratio;
    const double last = r.shells.back();
    auto divergent = [&] {
        r.finite = false;
        r.value = inf;
        return r;
    };
    if (!(*rmax < 1.0 - 1e-7)) return divergent();
    if (*rmax - *rmin <= 1e-6 || last <= 1e-17 * sum) {
        r.finite = true;
        r.value = sum + last * ratio / (1.0 - ratio);
        return r;
    }
    // Ratios still drifting towards 1: sub-geometric decay. Raabe's test on the
    // shell sequence, p = k (s_{k-1}/s_k - 1); p <= 1 diverges.
    const double k = static_cast<double>(n - 1);
    const double raabe = k * (r.shells[n - 2] / last - 1.0);
    if (raabe <= 1.0 + 1e-3) return divergent();
    r.finite = true;
    r.value = sum + last * k / (raabe - 1.0);
    return r;
}

/// Dispatch: closed form for constant and power-law densities, quadrature otherwise.
inline H4Result h4_integral(const DensityModel& rho, double eps_hat) {
    switch (rho.kind()) {
    case DensityKind::constant: return h4_integral_power_law(0.0, eps_hat, rho.coefficient());
    case DensityKind::power_law: return h4_integral_power_law(rho.exponent(), eps_hat, rho.coefficient());
    case DensityKind::tabulated: return h4_integral(rho.majorant_function(), eps_hat);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Hypothesis report
// ---------------------------------------------------------------------------

struct Verdict {
    std::string name;
    bool pass = false;
    bool applicable = true;
    std::string method;          // "closed-form", "sampled" or "quadrature"
    std::size_t samples = 0;
    double evidence = 0.0;       // the extreme sampled quantity behind the verdict
    std::string detail;
};

struct HypothesisReport {
    std::vector<Verdict> verdicts;
    H4Result h4;
    double eps_hat = 0.0;
    std::vector<std::string> flags;

    const Verdict& get(std::string_view name) const {
        for (const auto& v : verdicts) {
            if (v.name == name) return v;
        }
        fail(ErrorKind::model, "no verdict named " + std::string(name));
    }
    bool passes(std::string_view name) const { return get(name).pass; }
    bool has_flag(std::string_view f) const { return std::find(flags.begin(), flags.end(), f) != flags.end(); }
};

inline constexpr std::string_view uniqueness_without_bc_flag = "uniqueness-without-BC regime";

/// Dense-sample (and closed-form where available) verdicts for H1-H5, the H4
/// integral, and the compatibility conditions between u0 and phi.
inline HypothesisReport check_hypotheses(const DensityModel& rho, const Nonlinearity& G, const BoundaryData& phi,
                                         const InitialData& u0, const Grid& grid, double horizon = 1.0,
                                         double eta0 = 0.1, std::size_t samples = 2001) {
    const Domain& dom = grid.domain();
    require(samples >= 1000, ErrorKind::config, "hypothesis sampling needs at least 1000 points");
    HypothesisReport rep;
    rep.eps_hat = dom.collar_cap();
    auto interior = [&](std::size_t k) {
        return dom.lower() + dom.width() * (static_cast<double>(k) + 0.5) / static_cast<double>(samples);
    };
    auto guarded = [&](std::string_view hyp, auto&& fn) {
        try {
            fn();
        } catch (const Error& e) {
            fail(ErrorKind::model, std::string(hyp) + ": evaluator failed: " + e.what());
        }
    };

    // H1: rho positive and continuous
    {
        Verdict v{"H1"};
        v.samples = samples;
        guarded("H1", [&] {
            double lo = inf;
            for (std::size_t k = 0; k < samples; ++k) lo = std::min(lo, rho.at(interior(k)));
            v.evidence = lo;
            v.pass = lo > 0.0 && std::isfinite(lo);
        });
        v.method = rho.kind() == DensityKind::tabulated ? "sampled" : "closed-form";
        v.detail = "min rho over samples";
        rep.verdicts.push_back(v);
    }

    double phi_lo = 0.0, phi_hi = 0.0, u_lo = 0.0, u_hi = 0.0;
    guarded("e302", [&] { std::tie(phi_lo, phi_hi) = phi.sampled_range(dom, horizon); });
    guarded("H3", [&] { std::tie(u_lo, u_hi) = u0.sampled_range(dom); });
    const double work = std::max({std::abs(phi_lo), std::abs(phi_hi), std::abs(u_lo), std::abs(u_hi)}) + eta0;

    // H2: G(0) = 0, strictly increasing, G' > 0 away from 0
    {
        Verdict v{"H2"};
        v.method = "sampled";
        v.samples = samples;
        guarded("H2", [&] {
            const double lo = std::max(-work, G.domain_lo()), hi = std::min(work, G.domain_hi());
            bool mono = true;
            double min_slope = inf;
            double prev = G(lo);
            for (std::size_t k = 1; k < samples; ++k) {
                const double u = lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(samples - 1);
                const double g = G(u);
                mono = mono && g > prev;
                prev = g;
                if (std::abs(u) > 1e-12) min_slope = std::min(min_slope, G.derivative(u));
            }
            v.evidence = std::abs(G(0.0));
            v.pass = v.evidence <= 1e-12 && mono && min_slope > 0.0;
            v.detail = "|G(0)|; strict monotonicity and G' > 0 on [" + std::to_string(lo) + ", " +
                       std::to_string(hi) + "]";
        });
        rep.verdicts.push_back(v);
    }

    // H3: u0 bounded and continuous (finite values, no jumps beyond the sampled modulus)
    {
        Verdict v{"H3"};
        v.method = "sampled";
        v.samples = samples;
        guarded("H3", [&] {
            double jump = 0.0, prev = u0(interior(0));
            bool finite = std::isfinite(prev);
            for (std::size_t k = 1; k < samples; ++k) {
                const double val = u0(interior(k));
                finite = finite && std::isfinite(val);
                jump = std::max(jump, std::abs(val - prev));
                prev = val;
            }
            v.evidence = jump;
            v.pass = finite && jump <= 0.05 * std::max(1.0, u_hi - u_lo);
            v.detail = "largest jump between neighbouring samples";
        });
        rep.verdicts.push_back(v);
    }

    // H4: majorant dominates rho in the collar, and the integral test
    {
        Verdict v{"H4"};
        guarded("H4", [&] {
            bool dominated = true;
            for (std::size_t k = 0; k < samples; ++k) {
                const double s = interior(k);
                const double d = dom.distance(s);
                if (d <= 0.0 || d > rep.eps_hat) continue;
                dominated = dominated && rho.at(s) <= rho.majorant(d) * (1.0 + 1e-12);
            }
            rep.h4 = h4_integral(rho, rep.eps_hat);
            v.method = rep.h4.method;
            v.samples = samples;
            v.evidence = rep.h4.value;
            v.pass = dominated && rep.h4.finite;
            v.detail = rep.h4.finite ? "integral of eta * rho_bar over (0, eps_hat] is finite" : "integral diverges";
        });
        rep.verdicts.push_back(v);
        if (!rep.h4.finite) rep.flags.emplace_back(uniqueness_without_bc_flag);
    }

    // H5: G' >= alpha0 > 0
    {
        Verdict v{"H5"};
        v.method = G.kind() == NonlinearityKind::table ? "sampled" : "closed-form";
        v.samples = G.kind() == NonlinearityKind::table ? 2001 : 0;
        v.evidence = G.floor();
        v.pass = G.floor() > 0.0;
        v.detail = "alpha0 = inf G'";
        rep.verdicts.push_back(v);
    }

    // compatibility: u0 near each boundary point against phi(x0, 0)
    const double probe = 1e-6 * dom.width();
    const double band = 1e-3;
    double worst_gap = 0.0, near_min = inf;
    guarded("compatibility", [&] {
        for (double b : dom.boundary_coordinates()) {
            const double s = b + dom.inward_direction(b) * probe;
            worst_gap = std::max(worst_gap, std::abs(u0(s) - phi(b, 0.0)));
            near_min = std::min(near_min, u0(s));
        }
    });
    {
        Verdict v{"e301"};
        v.method = "sampled";
        v.samples = dom.boundary_coordinates().size();
        v.evidence = worst_gap;
        v.applicable = !phi.time_dependent();
        v.pass = v.applicable && worst_gap <= band;
        v.detail = v.applicable ? "|u0 - phi| at distance 1e-6 * width" : "phi depends on time";
        rep.verdicts.push_back(v);
    }
    {
        Verdict v{"e302"};
        v.method = "sampled";
        v.samples = dom.boundary_coordinates().size();
        v.evidence = worst_gap;
        v.pass = worst_gap <= band;
        v.detail = "|u0 - phi(., 0)| at distance 1e-6 * width";
        rep.verdicts.push_back(v);
    }
    {
        Verdict v{"ipopositiva"};
        v.method = "sampled";
        v.samples = dom.boundary_coordinates().size() * (phi.time_dependent() ? 1001 : 1);
        const double floor = phi.positivity_floor();
        v.evidence = std::min(phi_lo, near_min);
        v.pass = floor > 0.0 ? (phi_lo >= floor && near_min >= floor) : (phi_lo > 0.0 && near_min > 0.0);
        v.detail = "min of phi on S x [0, T] and of u0 next to S";
        rep.verdicts.push_back(v);
    }
    return rep;
}

} // namespace collar
