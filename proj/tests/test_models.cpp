#include <gtest/gtest.h>

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cstdio>
#include <fstream>

#include "collar/models.hpp"

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

// Independent oracle: tanh-sinh on the integrand eta * c eta^-alpha.
double quadrature_oracle(double alpha, double eps_hat) {
    boost::math::quadrature::tanh_sinh<double> q;
    return q.integrate([alpha](double e) { return e * std::pow(e, -alpha); }, 0.0, eps_hat);
}

const Domain unit = Domain::interval(0.0, 1.0);

} // namespace

TEST(H4, ClosedFormExamples) {
    const auto a0 = h4_integral_power_law(0.0, 1.0);
    EXPECT_TRUE(a0.finite);
    EXPECT_NEAR(a0.value, quadrature_oracle(0.0, 1.0), 1e-12);
    EXPECT_DOUBLE_EQ(a0.value, 0.5);

    EXPECT_FALSE(h4_integral_power_law(2.0, 1.0).finite);

    const auto a1 = h4_integral_power_law(1.0, 1.0);
    EXPECT_TRUE(a1.finite);
    EXPECT_NEAR(a1.value, quadrature_oracle(1.0, 1.0), 1e-12);
}

TEST(H4, QuadratureRouteMatchesClosedForm) {
    for (double alpha : {-2.0, -1.0, 0.0, 0.5, 1.0, 1.5}) {
        const auto q = h4_integral([alpha](double e) { return std::pow(e, -alpha); }, 0.7);
        ASSERT_TRUE(q.finite) << alpha;
        EXPECT_EQ(q.method, "quadrature");
        EXPECT_NEAR(q.value, h4_integral_power_law(alpha, 0.7).value, 1e-8 * q.value) << alpha;
    }
}

TEST(H4, QuadratureDetectsDivergence) {
    for (double alpha : {2.0, 2.5, 3.0}) {
        EXPECT_FALSE(h4_integral([alpha](double e) { return std::pow(e, -alpha); }, 1.0).finite) << alpha;
    }
    // logarithmic growth on top of the threshold exponent
    EXPECT_FALSE(h4_integral([](double e) { return std::pow(e, -2.0) / (1.0 - std::log(e)); }, 0.5).finite);
}

TEST(H4, NonPositiveMajorantIsModelError) {
    EXPECT_EQ(kind_of([] { (void)h4_integral([](double e) { return e - 0.5; }, 1.0); }), ErrorKind::model);
}

TEST(H4, MonotoneInExponent) {
    double prev = 0.0;
    for (double alpha = -2.0; alpha < 1.99; alpha += 0.25) {
        const double v = h4_integral_power_law(alpha, 0.5).value;
        EXPECT_GT(v, prev);
        prev = v;
    }
}

TEST(Density, PowerLawBounds) {
    const auto rho = DensityModel::power_law(unit, 1.0);
    EXPECT_DOUBLE_EQ(rho.at(0.25), 4.0);
    EXPECT_DOUBLE_EQ(rho.infimum(), 2.0);
    EXPECT_FALSE(rho.is_bounded());
    EXPECT_TRUE(rho.has_positive_inf());
    const auto neg = DensityModel::power_law(unit, -1.0);
    EXPECT_FALSE(neg.has_positive_inf());
    EXPECT_EQ(kind_of([] { (void)DensityModel::constant(unit, 0.0); }), ErrorKind::model);
}

TEST(Density, TableMajorantAndH4ByQuadrature) {
    Table t;
    for (int i = 0; i <= 100; ++i) {
        const double x = i / 100.0;
        t.x.push_back(x);
        t.y.push_back(1.0 + x * (1.0 - x));
    }
    const auto rho = DensityModel::tabulated(unit, t);
    EXPECT_NEAR(rho.majorant(0.3), 1.21, 1e-12);
    const auto h4 = h4_integral(rho, 0.25);
    EXPECT_TRUE(h4.finite);
    EXPECT_EQ(h4.method, "quadrature");
    // exact integral of e times the piecewise-linear interpolant, segment by segment
    double exact = 0.0;
    for (int i = 0; i < 25; ++i) {
        const double a = t.x[i], b = t.x[i + 1];
        const double slope = (t.y[i + 1] - t.y[i]) / (b - a);
        const double c0 = t.y[i] - slope * a;
        exact += c0 * (b * b - a * a) / 2 + slope * (b * b * b - a * a * a) / 3;
    }
    EXPECT_NEAR(h4.value, exact, 1e-10);
}

TEST(Nonlinearity, ClosedFormsAndInverse) {
    const auto pm = Nonlinearity::porous_medium(2.0);
    EXPECT_DOUBLE_EQ(pm(-0.5), -0.25);
    EXPECT_DOUBLE_EQ(pm.derivative(0.0), 0.0);
    EXPECT_EQ(pm.floor(), 0.0);
    const auto nd = Nonlinearity::nondegenerate(1.0, 3.0);
    EXPECT_DOUBLE_EQ(nd(2.0), 10.0);
    EXPECT_DOUBLE_EQ(nd.floor(), 1.0);
    for (const auto& g : {pm, nd, Nonlinearity::linear(2.0)}) {
        for (double u : {-3.0, -0.2, 0.0, 0.01, 1.7}) EXPECT_NEAR(g.inverse(g(u)), u, 1e-12 * std::max(1.0, std::abs(u)));
    }
}

TEST(Nonlinearity, TableInterpolatesMonotonically) {
    Table t{{-1.0, -0.5, 0.0, 0.5, 1.0}, {-1.0, -0.125, 0.0, 0.125, 1.0}};
    const auto g = Nonlinearity::table(t);
    double prev = g(-1.0);
    for (int i = 1; i <= 200; ++i) {
        const double v = g(-1.0 + i / 100.0);
        EXPECT_GE(v, prev);
        prev = v;
    }
    EXPECT_NEAR(g.inverse(g(0.3)), 0.3, 1e-12);
    EXPECT_EQ(kind_of([&] { (void)g(1.5); }), ErrorKind::model);
    EXPECT_EQ(kind_of([&] { (void)g.inverse(2.0); }), ErrorKind::range);
}

TEST(Nonlinearity, LoadTableFromFile) {
    const std::string path = testing::TempDir() + "g_table.txt";
    {
        std::ofstream out(path);
        out << "# u G\n-1 -2\n0 0\n1 2\n2 4\n";
    }
    const auto t = load_table(path);
    EXPECT_EQ(t.x.size(), 4u);
    EXPECT_DOUBLE_EQ(interpolate_linear(t, 0.5), 1.0);
    {
        std::ofstream out(path);
        out << "0 0\n0 1\n";
    }
    EXPECT_EQ(kind_of([&] { (void)load_table(path); }), ErrorKind::model);
}

TEST(Surrogate, SquareWithHalfFloor) {
    const auto g = Nonlinearity::porous_medium(2.0);
    const auto g1 = build_nondegenerate_surrogate(g, 0.5, 0.5);
    EXPECT_DOUBLE_EQ(g1.floor(), 0.5);
    for (int i = 0; i <= 4000; ++i) {
        const double u = -2.0 + i * 0.001;
        EXPECT_GE(g1.derivative(u), 0.5 - 1e-12) << u;
        if (u >= 0.5) { EXPECT_DOUBLE_EQ(g1(u), u * u); }
        EXPECT_GT(g1(u + 1e-3), g1(u));
    }
    // linear below the splice region
    EXPECT_NEAR(g1(0.1) - g1(0.0), 0.05, 1e-14);
    // C^1 at both splice ends
    for (double s : {0.25, 0.5}) {
        EXPECT_NEAR(g1(s + 1e-9), g1(s - 1e-9), 1e-8);
        EXPECT_NEAR(g1.derivative(s + 1e-12), g1.derivative(s - 1e-12), 1e-9);
    }
}

TEST(Surrogate, AlreadyNondegenerateIsUnchanged) {
    const auto g = Nonlinearity::linear();
    const auto g1 = build_nondegenerate_surrogate(g, 0.7, 0.5);
    EXPECT_EQ(g1.kind(), NonlinearityKind::linear);
    EXPECT_EQ(g1(0.3), 0.3);
}

TEST(Surrogate, InfeasibleFloorIsSpliceError) {
    const auto cube = Nonlinearity::porous_medium(3.0);
    EXPECT_GT(0.1, cube.derivative(0.15));
    EXPECT_EQ(kind_of([&] { (void)build_nondegenerate_surrogate(cube, 0.3, 0.1); }), ErrorKind::splice);
    EXPECT_EQ(kind_of([&] { (void)build_nondegenerate_surrogate(cube, 0.3, 0.0); }), ErrorKind::splice);
}

TEST(Hypotheses, HeatBaselineAllPass) {
    const Grid grid(unit, 101);
    const auto rep = check_hypotheses(DensityModel::constant(unit, 1.0), Nonlinearity::linear(),
                                      BoundaryData::constant(0.0),
                                      InitialData([](double x) { return std::sin(M_PI * x); }, "sine"), grid);
    for (const char* h : {"H1", "H2", "H3", "H4", "H5", "e301", "e302"}) EXPECT_TRUE(rep.passes(h)) << h;
    EXPECT_TRUE(rep.h4.finite);
    EXPECT_FALSE(rep.has_flag(uniqueness_without_bc_flag));
    EXPECT_FALSE(rep.passes("ipopositiva"));
}

TEST(Hypotheses, PorousMediumFailsH5Only) {
    const Grid grid(unit, 101);
    const auto rep = check_hypotheses(DensityModel::constant(unit, 1.0), Nonlinearity::porous_medium(2.0),
                                      BoundaryData::constant(0.0), InitialData::constant(0.0), grid);
    EXPECT_TRUE(rep.passes("H2"));
    EXPECT_FALSE(rep.passes("H5"));
    EXPECT_EQ(rep.get("H5").evidence, 0.0);
}

TEST(Hypotheses, DivergentDensityIsFlagged) {
    const Grid grid(unit, 101);
    const auto rep = check_hypotheses(DensityModel::power_law(unit, 3.0), Nonlinearity::linear(),
                                      BoundaryData::constant(0.0), InitialData::constant(0.0), grid);
    EXPECT_FALSE(rep.passes("H4"));
    EXPECT_TRUE(rep.has_flag(uniqueness_without_bc_flag));
}

TEST(Hypotheses, IncompatibleDataAndTimeDependence) {
    const Grid grid(unit, 101);
    const auto rep = check_hypotheses(DensityModel::constant(unit, 1.0), Nonlinearity::linear(),
                                      BoundaryData::oscillating(0.5, 0.2, 1.0), InitialData::constant(0.9), grid);
    EXPECT_FALSE(rep.get("e301").applicable);
    EXPECT_FALSE(rep.passes("e302"));
    EXPECT_TRUE(rep.passes("ipopositiva"));
}

TEST(Hypotheses, EvaluatorFailureIsModelError) {
    const Grid grid(unit, 101);
    const InitialData broken([](double x) { return x > 0.5 ? unit.distance(x + 1.0) : 0.0; }, "broken");
    try {
        (void)check_hypotheses(DensityModel::constant(unit, 1.0), Nonlinearity::linear(), BoundaryData::constant(0.0),
                               broken, grid);
        ADD_FAILURE() << "no error thrown";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::model);
        EXPECT_NE(std::string(e.what()).find("H3"), std::string::npos);
    }
}

TEST(Hypotheses, TooFewSamplesIsConfigError) {
    const Grid grid(unit, 101);
    EXPECT_EQ(kind_of([&] {
                  (void)check_hypotheses(DensityModel::constant(unit, 1.0), Nonlinearity::linear(),
                                         BoundaryData::constant(0.0), InitialData::constant(0.0), grid, 1.0, 0.1,
                                         500);
              }),
              ErrorKind::config);
}
