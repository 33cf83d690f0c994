#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>

#include "collar/barriers.hpp"

using namespace collar;

namespace {

template <class F>
ErrorKind kind_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    ADD_FAILURE() << "no error thrown";
    return ErrorKind::hypothesis;
}

const Domain unit = Domain::interval(0.0, 1.0);

// oracle: V(d) = margin int_0^d int_s^eps rho_bar(r) dr ds by nested tanh-sinh
double potential_oracle(const std::function<double(double)>& rho_bar, double eps_hat, double margin, double d) {
    boost::math::quadrature::tanh_sinh<double> q;
    auto inner = [&](double s) { return q.integrate(rho_bar, s, eps_hat); };
    return margin * q.integrate(inner, 0.0, d);
}

ConstantInputs worked_inputs() {
    ConstantInputs in;
    in.inf_rho = 1.0;
    in.sup_rho = 1.0;
    in.alpha0 = 1.0;
    in.delta = 0.5;
    in.phi_norm = 1.0;
    in.phi_anchor = 1.0;
    in.eta0 = 0.1;
    in.K = 1.1;
    in.N = 1;
    return in;
}

Barrier worked_barrier(Side side, double divide_M = 1.0) {
    auto k = select_barrier_constants(BarrierCase::v_timed, side, worked_inputs(), Nonlinearity::linear());
    k.M /= divide_M;
    BarrierSpec spec{BarrierCase::v_timed, side, 0.0, 0.5, 0.1, 0.0, 1.0};
    return build_barrier(spec, k, 0.5, 1.1, unit, Nonlinearity::linear(), BoundaryData::constant(1.0),
                         BoundaryPotential::power_law(0.0, 1.0, 1.0), std::nullopt);
}

} // namespace

TEST(Potential, ConstantDensity) {
    const auto V = BoundaryPotential::power_law(0.0, 1.0, 1.0);
    for (double d : {0.1, 0.37, 0.8}) EXPECT_NEAR(V(d), d - d * d / 2, 1e-14);
    EXPECT_DOUBLE_EQ(V(1.0), 0.5);
    const double h = 1e-3, d = 0.4;
    EXPECT_NEAR((V(d + h) - 2 * V(d) + V(d - h)) / (h * h), -1.0, 1e-6);
}

TEST(Potential, InverseDistanceDensity) {
    const auto V = BoundaryPotential::power_law(1.0, 1.0, 1.0);
    for (double d : {0.05, 0.3, 0.9}) {
        EXPECT_NEAR(V(d), d * (1.0 - std::log(d)), 1e-13);
        EXPECT_NEAR(V(d), potential_oracle([](double r) { return 1.0 / r; }, 1.0, 1.0, d), 1e-8);
    }
    EXPECT_NEAR(V(1.0), 1.0, 1e-14);
}

TEST(Potential, DivergentDensityIsRegimeError) {
    EXPECT_EQ(kind_of([] { (void)BoundaryPotential::power_law(3.0, 1.0); }), ErrorKind::regime);
    EXPECT_EQ(kind_of([] { (void)build_boundary_potential([](double e) { return std::pow(e, -2.5); }, 1.0); }),
              ErrorKind::regime);
    EXPECT_EQ(kind_of([] { (void)BoundaryPotential::power_law(1.0, 1.0, 0.5); }), ErrorKind::config);
}

TEST(Potential, VanishesAtBoundaryAlpha15) {
    const auto V = BoundaryPotential::power_law(1.5, 1.0, 1.0);
    double prev = V(1e-2);
    for (double d : {1e-4, 1e-6}) {
        EXPECT_LT(V(d), prev);
        prev = V(d);
    }
    EXPECT_LT(prev, 1e-2);
    EXPECT_EQ(V(0.0), 0.0);
}

TEST(Potential, QuadratureMatchesClosedForm) {
    for (double alpha : {-1.0, 0.0, 0.5, 1.0, 1.5}) {
        const auto closed = BoundaryPotential::power_law(alpha, 0.8, 2.0);
        const auto quad = build_boundary_potential([alpha](double e) { return std::pow(e, -alpha); }, 0.8, 2.0);
        EXPECT_FALSE(quad.closed_form());
        for (double d : {1e-3, 0.1, 0.5, 0.8}) EXPECT_NEAR(quad(d), closed(d), 1e-9 * closed(d)) << alpha << ' ' << d;
    }
}

TEST(Potential, PositiveAndConcave) {
    for (double alpha : {0.0, 1.0, 1.9}) {
        const auto V = BoundaryPotential::power_law(alpha, 0.5, 1.5);
        for (int k = 1; k <= 20; ++k) EXPECT_GT(V(0.5 * std::pow(2.0, -k)), 0.0);
        for (double d = 0.01; d < 0.49; d += 0.01) {
            const double h = 1e-4;
            const double second = (V(d + h) - 2 * V(d) + V(d - h)) / (h * h);
            EXPECT_NEAR(second, -1.5 * std::pow(d, -alpha), 1e-3 * std::pow(d, -alpha) + 1e-4);
        }
    }
}

TEST(Miller, ExampleCurvatureAndAnchor) {
    EXPECT_NEAR(MillerBarrier::profile_curvature(2.0, 2, 1.0), 8.0 * std::exp(-2.0), 1e-15);
    const auto dom = Domain::annulus(1.0, 3.0, 2);
    const auto m = build_miller_barrier(dom, 3.0, 1.0, 2.0);
    EXPECT_DOUBLE_EQ(m.centre(), 4.0);
    EXPECT_NEAR(m.at(3.0), 0.0, 1e-15);
    // Laplacian <= -1 throughout the region, h > 0 away from the anchor
    for (int i = 1; i < 200; ++i) {
        for (double tr : {0.0, 0.3, 0.7}) {
            const Point p{2.0 + i * 0.005, tr};
            if (!m.in_region(dom, p)) continue;
            EXPECT_LE(m.laplacian(p), -1.0);
            EXPECT_GT(m(p), 0.0);
        }
    }
}

TEST(Miller, DefaultSteepnessAndErrors) {
    const auto m = build_miller_barrier(unit, 0.0, 0.5);
    EXPECT_DOUBLE_EQ(m.steepness(), 1.0 / 0.25);
    EXPECT_DOUBLE_EQ(m.centre(), -0.5);
    EXPECT_EQ(kind_of([] { (void)build_miller_barrier(Domain::ball(1.0, 2), 1.0, 1.0, 2.0 / 2.0); }),
              ErrorKind::geometry);
    EXPECT_EQ(kind_of([] { (void)build_miller_barrier(Domain::annulus(1.0, 3.0, 2), 1.0, 1.5); }),
              ErrorKind::geometry);
    EXPECT_EQ(kind_of([] { (void)build_miller_barrier(unit, 0.3, 0.5); }), ErrorKind::geometry);
}

TEST(Constants, WorkedVTimedExample) {
    const auto k = select_barrier_constants(BarrierCase::v_timed, Side::lower, worked_inputs(), Nonlinearity::linear());
    EXPECT_NEAR(k.beta_raw, 8.8, 1e-12);
    EXPECT_NEAR(k.lambda_raw, 8.8, 1e-12);
    EXPECT_NEAR(k.M_raw, 26.4, 1e-12);
    EXPECT_NEAR(k.beta, 8.8 * 1.05, 1e-12);
    EXPECT_NEAR(k.M, 1.05 * 26.4 * 1.05, 1e-12);
}

TEST(Constants, StationaryLowerUsesAnchorValue) {
    auto in = worked_inputs();
    in.phi_anchor = 0.4;
    const auto k = select_barrier_constants(BarrierCase::v_stationary, Side::lower, in, Nonlinearity::linear());
    EXPECT_TRUE(k.has_beta);
    EXPECT_FALSE(k.has_lambda);
    EXPECT_NEAR(k.beta_raw, (0.4 + 0.1 + 1.1) / 0.25, 1e-12);
    EXPECT_NEAR(k.M, 1.05 * 2.0 * k.beta, 1e-12);
}

TEST(Constants, RegimeErrors) {
    auto in = worked_inputs();
    in.alpha0 = 0.0;
    const auto pm = Nonlinearity::porous_medium(2.0);
    EXPECT_EQ(kind_of([&] { (void)select_barrier_constants(BarrierCase::miller_timed, Side::lower, in, pm); }),
              ErrorKind::regime);
    in = worked_inputs();
    in.inf_rho = 0.0;
    EXPECT_EQ(kind_of([&] { (void)select_barrier_constants(BarrierCase::v_timed, Side::lower, in, pm); }),
              ErrorKind::regime);
    in = worked_inputs();
    in.sup_rho = inf;
    EXPECT_EQ(kind_of([&] { (void)select_barrier_constants(BarrierCase::miller_stationary, Side::upper, in, pm); }),
              ErrorKind::regime);
}

TEST(Constants, SafetyFactorScalesAllCases) {
    auto in = worked_inputs();
    in.lateral_inf = 0.3;
    for (auto c : {BarrierCase::v_timed, BarrierCase::miller_timed, BarrierCase::v_stationary,
                   BarrierCase::miller_stationary}) {
        for (auto s : {Side::lower, Side::upper}) {
            const auto k = select_barrier_constants(c, s, in, Nonlinearity::nondegenerate(1.0, 2.0));
            EXPECT_GT(k.M, k.M_raw) << to_string(c);
            if (k.has_beta) { EXPECT_DOUBLE_EQ(k.beta, safety_factor * k.beta_raw); }
            if (k.has_lambda) { EXPECT_DOUBLE_EQ(k.lambda, safety_factor * k.lambda_raw); }
        }
    }
}

TEST(Barrier, AnchorValues) {
    EXPECT_NEAR(worked_barrier(Side::lower).at(0.0, 0.5), 1.0 - 0.1, 1e-14);
    EXPECT_NEAR(worked_barrier(Side::upper).at(0.0, 0.5), 1.0 + 0.1, 1e-14);
}

TEST(Barrier, LateralEdgeBelowMinusK) {
    const auto b = worked_barrier(Side::lower);
    for (double t : {0.1, 0.5, 0.9}) EXPECT_LE(b.at(0.5, t), -1.1);
    const auto u = worked_barrier(Side::upper);
    for (double t : {0.1, 0.5, 0.9}) EXPECT_GE(u.at(0.5, t), 1.1);
    // and at the ends of the time window
    for (double x : {0.0, 0.2}) {
        EXPECT_LE(b.at(x, 0.0), -1.1);
        EXPECT_LE(b.at(x, 1.0), -1.1);
    }
}

TEST(Barrier, WindowAndRegion) {
    const auto b = worked_barrier(Side::lower);
    EXPECT_DOUBLE_EQ(b.t_begin(), 0.0);
    EXPECT_DOUBLE_EQ(b.t_end(), 1.0);
    EXPECT_TRUE(b.in_region(Point{0.3, 0.0}));
    EXPECT_FALSE(b.in_region(Point{0.0, 0.0}));
    EXPECT_FALSE(b.in_region(Point{0.6, 0.0}));
}

TEST(Barrier, RangeErrorOutsideGRange) {
    Table t{{-0.5, -0.1, 0.0, 0.1, 0.5}, {-0.5, -0.1, 0.0, 0.1, 0.5}};
    const auto G = Nonlinearity::table(t);
    BarrierConstants k;
    k.M = 10.0;
    BarrierSpec spec{BarrierCase::v_stationary, Side::lower, 0.0, 0.0, 0.1, 0.0, 1.0};
    const Barrier b(spec, k, 0.5, 1.0, unit, G, BoundaryData::constant(0.2), BoundaryPotential::power_law(0.0, 1.0),
                    std::nullopt);
    EXPECT_EQ(kind_of([&] { (void)b.at(0.4, 0.5); }), ErrorKind::range);
}

TEST(Residual, WorkedExamplePassesAndWeakMFails) {
    for (std::size_t n : {101u, 201u, 401u, 1001u}) {
        const Grid g(unit, n);
        for (auto side : {Side::lower, Side::upper}) {
            const auto r = verify_barrier_residual(worked_barrier(side), g, DensityModel::constant(unit, 1.0),
                                                   Nonlinearity::linear(), 1e-3);
            EXPECT_TRUE(r.pass) << n << ' ' << to_string(side) << ' ' << r.max_residual << ' ' << r.tolerance;
        }
    }
    const Grid g(unit, 101);
    for (auto side : {Side::lower, Side::upper}) {
        const auto r = verify_barrier_residual(worked_barrier(side, 100.0), g, DensityModel::constant(unit, 1.0),
                                               Nonlinearity::linear(), 1e-3);
        EXPECT_FALSE(r.pass) << to_string(side);
    }
}

TEST(Residual, ConstantFunctionIsExactlyZero) {
    const Grid g(Domain::ball(1.0, 3), 101);
    const auto rho = DensityModel::power_law(g.domain(), 1.0);
    for (auto side : {Side::lower, Side::upper}) {
        const auto r = verify_barrier_residual([](const Point&, double) { return 0.7; }, side,
                                               [](const Point& p) { return p.axial > 0.5 && p.axial < 0.99; }, 0.0,
                                               1.0, g, rho, Nonlinearity::porous_medium(2.0), 1e-3);
        EXPECT_EQ(r.max_residual, 0.0);
        EXPECT_EQ(r.min_residual, 0.0);
        EXPECT_TRUE(r.pass);
    }
}

TEST(Localization, OscillatingDataShrinksDelta) {
    const auto phi = BoundaryData::oscillating(0.5, 0.5, 1.0);
    const double d = localization_radius(unit, phi, Nonlinearity::linear(), 0.0, 0.5, 0.0, 0.1, 0.5, 1.0, true);
    // phi(t0 +- s) = 0.5 -+ 0.5 sin(2 pi s): oscillation sin(2 pi d) = 0.1
    EXPECT_NEAR(d, std::asin(0.1) / (2.0 * M_PI), 1e-9);
    EXPECT_DOUBLE_EQ(localization_radius(unit, BoundaryData::constant(1.0), Nonlinearity::linear(), 0.0, 0.5, 0.0,
                                         0.1, 0.4, 1.0, true),
                     0.4);
}

TEST(Localization, LateralInfimum) {
    const auto V = BoundaryPotential::power_law(0.0, 1.0, 1.0);
    const double v = lateral_infimum(unit, 0.0, 0.3, [&](const Point& p) { return V(unit.distance(p)); });
    EXPECT_NEAR(v, 0.3 - 0.045, 1e-14);
    const auto ball = Domain::ball(1.0, 2);
    const double b = lateral_infimum(ball, 1.0, 0.3, [&](const Point& p) { return V(ball.distance(p)); });
    EXPECT_GT(b, 0.0);
    EXPECT_LT(b, V(0.3) + 1e-12);
}
