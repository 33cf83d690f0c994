#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "collar/errors.hpp"

namespace collar {

enum class DomainKind { interval, ball, annulus };

constexpr std::string_view to_string(DomainKind k) {
    switch (k) {
    case DomainKind::interval: return "interval";
    case DomainKind::ball: return "ball";
    case DomainKind::annulus: return "annulus";
    }
    return "?";
}

/// A point of R^N in the axisymmetric embedding used throughout: `axial` is the
/// coordinate along e_1 and `transverse` the distance from the e_1 axis. Every
/// domain, datum and barrier here is invariant under rotations about e_1, so two
/// numbers describe any point. For intervals `transverse` is always zero.
struct Point {
    double axial = 0.0;
    double transverse = 0.0;
};

/// Bounded domain with exact distance to the boundary. The reduced coordinate `s`
/// is x for intervals and |x| for radial kinds.
class Domain {
public:
    static Domain interval(double a, double b, std::optional<double> collar_cap = {}) {
        require(a < b, ErrorKind::config, "interval endpoints must satisfy a < b");
        return Domain(DomainKind::interval, a, b, 1, collar_cap);
    }

    static Domain ball(double r_out, int dimension, std::optional<double> collar_cap = {}) {
        require(r_out > 0.0, ErrorKind::config, "ball radius must be positive");
        require(dimension >= 2, ErrorKind::config, "radial domains need dimension >= 2");
        return Domain(DomainKind::ball, 0.0, r_out, dimension, collar_cap);
    }

    static Domain annulus(double r_in, double r_out, int dimension,
                          std::optional<double> collar_cap = {}) {
        require(0.0 < r_in && r_in < r_out, ErrorKind::config,
                "annulus radii must satisfy 0 < r_in < r_out");
        require(dimension >= 2, ErrorKind::config, "radial domains need dimension >= 2");
        return Domain(DomainKind::annulus, r_in, r_out, dimension, collar_cap);
    }

    DomainKind kind() const noexcept { return kind_; }
    int dimension() const noexcept { return dim_; }
    bool radial() const noexcept { return kind_ != DomainKind::interval; }
    double lower() const noexcept { return lo_; }
    double upper() const noexcept { return hi_; }
    double width() const noexcept { return hi_ - lo_; }
    double collar_cap() const noexcept { return cap_; }

    /// Largest distance to the boundary attained in the domain.
    double max_distance() const noexcept {
        return kind_ == DomainKind::ball ? hi_ : 0.5 * (hi_ - lo_);
    }

    /// Boundary points in the reduced coordinate.
    std::vector<double> boundary_coordinates() const {
        if (kind_ == DomainKind::ball) return {hi_};
        return {lo_, hi_};
    }

    bool contains(double s) const noexcept {
        const double slack = 1e-12 * width();
        return s >= lo_ - slack && s <= hi_ + slack;
    }

    /// d(s) = dist(s, S) on the closed domain.
    double distance(double s) const {
        if (!contains(s)) {
            fail(ErrorKind::domain, "coordinate " + std::to_string(s) + " outside the closed domain");
        }
        s = std::clamp(s, lo_, hi_);
        if (kind_ == DomainKind::ball) return hi_ - s;
        return std::min(s - lo_, hi_ - s);
    }

    double reduced(const Point& p) const noexcept {
        if (kind_ == DomainKind::interval) return p.axial;
        return std::hypot(p.axial, p.transverse);
    }

    double distance(const Point& p) const { return distance(reduced(p)); }

    /// Nearest boundary point of s (ties go to the lower end).
    double nearest_boundary(double s) const {
        if (kind_ == DomainKind::ball) return hi_;
        return (s - lo_ <= hi_ - s) ? lo_ : hi_;
    }

    /// +1 if the domain lies above the boundary point s_b in the reduced coordinate.
    double inward_direction(double s_b) const noexcept {
        if (kind_ == DomainKind::ball) return -1.0;
        return std::abs(s_b - lo_) <= std::abs(s_b - hi_) ? 1.0 : -1.0;
    }

private:
    Domain(DomainKind kind, double lo, double hi, int dim, std::optional<double> cap)
        : kind_(kind), lo_(lo), hi_(hi), dim_(dim) {
        const double dmax = max_distance();
        cap_ = cap.value_or(0.5 * dmax);
        require(cap_ > 0.0 && cap_ < dmax, ErrorKind::config,
                "collar cap must lie in (0, " + std::to_string(dmax) + ")");
    }

    DomainKind kind_;
    double lo_;
    double hi_;
    int dim_;
    double cap_ = 0.0;
};

/// Free-function form of Domain::distance.
inline double distance_to_boundary(const Domain& domain, double s) { return domain.distance(s); }

enum class NodeClass { exterior, collar, interface, core };

constexpr std::string_view to_string(NodeClass c) {
    switch (c) {
    case NodeClass::exterior: return "exterior";
    case NodeClass::collar: return "collar";
    case NodeClass::interface: return "interface";
    case NodeClass::core: return "core";
    }
    return "?";
}

/// Uniform grid over the reduced coordinate, boundary nodes included.
class Grid {
public:
    static constexpr std::size_t min_nodes = 16;

    Grid(Domain domain, std::size_t node_count) : domain_(std::move(domain)) {
        require(node_count >= min_nodes, ErrorKind::config,
                "node count " + std::to_string(node_count) + " below minimum 16");
        h_ = domain_.width() / static_cast<double>(node_count - 1);
        nodes_.resize(node_count);
        dist_.resize(node_count);
        for (std::size_t i = 0; i < node_count; ++i) {
            nodes_[i] = (i + 1 == node_count) ? domain_.upper()
                                              : domain_.lower() + h_ * static_cast<double>(i);
            dist_[i] = domain_.distance(nodes_[i]);
        }
    }

    const Domain& domain() const noexcept { return domain_; }
    std::size_t size() const noexcept { return nodes_.size(); }
    double spacing() const noexcept { return h_; }
    double node(std::size_t i) const { return nodes_[i]; }
    double distance(std::size_t i) const { return dist_[i]; }
    const std::vector<double>& nodes() const noexcept { return nodes_; }

    /// Index of the node closest to s.
    std::size_t nearest(double s) const {
        const double k = std::round((s - domain_.lower()) / h_);
        return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(size() - 1)));
    }

private:
    Domain domain_;
    std::vector<double> nodes_;
    std::vector<double> dist_;
    double h_ = 0.0;
};

inline Grid build_grid(const Domain& domain, std::size_t node_count) { return Grid(domain, node_count); }

/// Node classification for one collar width. The active range [lo, hi] is the
/// contiguous index block holding the core and interface nodes; its end nodes
/// carry Dirichlet data except the regular centre of a ball.
struct CollarDecomposition {
    double eps = 0.0;
    std::vector<NodeClass> classes;
    std::size_t lo = 0;
    std::size_t hi = 0;
    bool lo_dirichlet = true;
    bool hi_dirichlet = true;

    std::size_t count(NodeClass c) const {
        return static_cast<std::size_t>(std::count(classes.begin(), classes.end(), c));
    }
    bool active(std::size_t i) const {
        return classes[i] == NodeClass::core || classes[i] == NodeClass::interface;
    }
    bool dirichlet(std::size_t i) const {
        return (i == lo && lo_dirichlet) || (i == hi && hi_dirichlet);
    }
    bool unknown(std::size_t i) const { return i >= lo && i <= hi && !dirichlet(i); }
};

namespace detail {

inline void close_active_range(const Grid& grid, CollarDecomposition& dec) {
    const auto n = grid.size();
    std::size_t lo = n, hi = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (dec.active(i)) {
            lo = std::min(lo, i);
            hi = std::max(hi, i);
        }
    }
    require(lo < hi, ErrorKind::resolution, "empty computational domain");
    dec.lo = lo;
    dec.hi = hi;
    dec.lo_dirichlet = dec.classes[lo] == NodeClass::interface;
    dec.hi_dirichlet = dec.classes[hi] == NodeClass::interface;
    for (std::size_t i = lo; i <= hi; ++i) {
        require(dec.active(i), ErrorKind::resolution, "computational domain is not contiguous");
    }
    std::size_t core = dec.count(NodeClass::core);
    require(core > 0, ErrorKind::resolution, "no core nodes left at this collar width");
}

} // namespace detail

/// Splits the nodes into collar (d < eps), interface (nearest to d = eps) and
/// core (d > eps). Boundary nodes are `exterior`.
inline CollarDecomposition collar_decomposition(const Grid& grid, double eps) {
    const double h = grid.spacing();
    require(eps > 0.0, ErrorKind::config, "collar width must be positive");
    require(eps <= grid.domain().collar_cap() * (1.0 + 1e-12), ErrorKind::config,
            "collar width " + std::to_string(eps) + " exceeds the collar cap " +
                std::to_string(grid.domain().collar_cap()));
    require(eps >= 2.0 * h * (1.0 - 1e-9), ErrorKind::resolution,
            "collar width " + std::to_string(eps) + " is below two cells (h = " + std::to_string(h) + ")");

    CollarDecomposition dec;
    dec.eps = eps;
    dec.classes.resize(grid.size());
    const double zero_tol = 1e-9 * h;
    const double lo_band = eps - 0.5 * h - zero_tol;
    const double hi_band = eps + 0.5 * h - zero_tol;
    for (std::size_t i = 0; i < grid.size(); ++i) {
        const double d = grid.distance(i);
        if (d <= zero_tol) {
            dec.classes[i] = NodeClass::exterior;
        } else if (d < lo_band) {
            dec.classes[i] = NodeClass::collar;
        } else if (d < hi_band) {
            dec.classes[i] = NodeClass::interface;
        } else {
            dec.classes[i] = NodeClass::core;
        }
    }
    detail::close_active_range(grid, dec);
    return dec;
}

/// The eps = 0 layout: Dirichlet data sits on the boundary nodes themselves.
inline CollarDecomposition full_domain_decomposition(const Grid& grid) {
    CollarDecomposition dec;
    dec.eps = 0.0;
    dec.classes.resize(grid.size());
    const double zero_tol = 1e-9 * grid.spacing();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        dec.classes[i] = grid.distance(i) <= zero_tol ? NodeClass::interface : NodeClass::core;
    }
    detail::close_active_range(grid, dec);
    return dec;
}

} // namespace collar
