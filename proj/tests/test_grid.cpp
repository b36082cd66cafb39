#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "gfv/grid.hpp"

using gfv::Grid;

TEST(Grid, FullResolutionShape)
{
    const Grid g(2501, 200);
    EXPECT_EQ(g.size(), 5003u);
    EXPECT_EQ(g.node(2501), 1.0);
    EXPECT_DOUBLE_EQ(g.node(0), std::exp2(-12.505));
    EXPECT_DOUBLE_EQ(g.node(g.last()), std::exp2(12.505));
}

TEST(Grid, SmallestGridNodes)
{
    const Grid g(1, 1);
    ASSERT_EQ(g.size(), 3u);
    EXPECT_EQ(g.node(0), 0.5);
    EXPECT_EQ(g.node(1), 1.0);
    EXPECT_EQ(g.node(2), 2.0);
}

TEST(Grid, DoublingIsExactIndexShift)
{
    const Grid small(4, 2);
    EXPECT_EQ(small.node(4), 2.0 * small.node(2));
    for (std::size_t k : {1u, 7u, 50u, 200u}) {
        const Grid g(3 * k + 1, k);
        double worst = 0.0;
        for (std::size_t m = 0; m + k < g.size(); ++m) {
            worst = std::max(worst, std::abs(g.node(m + k) - 2.0 * g.node(m)) / g.node(m + k));
        }
        EXPECT_LE(worst, 1e-14) << "k=" << k;
    }
}

TEST(Grid, NodesAscendingWithUnitCentre)
{
    const Grid g(600, 50);
    for (std::size_t m = 1; m < g.size(); ++m) {
        ASSERT_LT(g.node(m - 1), g.node(m));
    }
    EXPECT_EQ(g.node(600), 1.0);
}

TEST(Grid, RejectsDegenerateSizes)
{
    EXPECT_THROW(Grid(1, 2), std::invalid_argument);
    EXPECT_THROW(Grid(0, 1), std::invalid_argument);
    EXPECT_THROW(Grid(5, 0), std::invalid_argument);
    EXPECT_NO_THROW(Grid(3, 3));
}

TEST(Grid, DoubleIndex)
{
    const Grid g(400, 200);
    EXPECT_EQ(g.double_index(0), 200u);
    EXPECT_EQ(g.double_index(g.last() - 200), g.last());
    EXPECT_FALSE(g.double_index(g.last()).has_value());
    EXPECT_FALSE(g.double_index(g.last() - 199).has_value());
}

TEST(Grid, WeightsPositive)
{
    const Grid g(300, 50);
    for (double w : g.weights()) {
        EXPECT_GT(w, 0.0);
    }
}

TEST(Grid, IntegrateZeroAndOnes)
{
    const Grid g(1, 1);
    EXPECT_EQ(g.integrate(std::vector<double>(3, 0.0)), 0.0);
    // Midpoint-in-log weights with halved endpoints: 0.5 x0 c + x1 c + 0.5 x2 c, c = 2^(1/2) - 2^(-1/2).
    EXPECT_NEAR(g.integrate(std::vector<double>(3, 1.0)), 1.5909902576697319, 1e-15);
}

TEST(Grid, IntegrateReciprocalMatchesLogarithm)
{
    const Grid g(2000, 200);
    std::vector<double> f(g.size());
    for (std::size_t m = 0; m < g.size(); ++m) f[m] = 1.0 / g.node(m);
    const double exact = std::log(g.node(g.last()) / g.node(0));
    const double got = g.integrate(f);
    // Summation order differs from the extended-precision reference.
    EXPECT_NEAR(got, 13.862950549213531, 1e-11);
    EXPECT_LE(std::abs(got - exact) / exact, 1e-4);
}

TEST(Grid, QuadratureIsSecondOrder)
{
    // Fixed span [2^-3, 2^3]; halving the log-step should cut the error by ~4.
    for (int s : {0, 1, 2}) {
        double previous = 0.0;
        for (std::size_t k : {8u, 16u, 32u, 64u}) {
            const Grid g(3 * k, k);
            std::vector<double> f(g.size());
            for (std::size_t m = 0; m < g.size(); ++m) f[m] = std::pow(g.node(m), s);
            const double a = g.node(0), b = g.node(g.last());
            const double exact = (std::pow(b, s + 1) - std::pow(a, s + 1)) / (s + 1);
            const double err = std::abs(g.integrate(f) - exact) / exact;
            if (previous > 0.0) {
                EXPECT_NEAR(previous / err, 4.0, 0.3) << "s=" << s << " k=" << k;
            }
            previous = err;
        }
    }
}

TEST(Grid, IntegrateIsLinear)
{
    const Grid g(200, 40);
    std::mt19937_64 rng(7);
    std::normal_distribution<double> d;
    std::vector<double> f(g.size()), h(g.size()), c(g.size());
    const double a = 1.7, b = -0.3;
    for (std::size_t m = 0; m < g.size(); ++m) {
        f[m] = d(rng);
        h[m] = d(rng);
        c[m] = a * f[m] + b * h[m];
    }
    const double lhs = g.integrate(c);
    const double rhs = a * g.integrate(f) + b * g.integrate(h);
    EXPECT_NEAR(lhs, rhs, 1e-13 * (std::abs(a * g.integrate(f)) + std::abs(b * g.integrate(h))));
}

TEST(Grid, IntegrateRejectsBadInput)
{
    const Grid g(2, 1);
    std::vector<double> f(g.size(), 1.0);
    f[2] = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(g.integrate(f), std::domain_error);
    f[2] = std::numeric_limits<double>::infinity();
    EXPECT_THROW(g.integrate(f), std::domain_error);
    EXPECT_THROW(g.integrate(std::vector<double>(3, 1.0)), std::invalid_argument);
}

TEST(Grid, NearestNode)
{
    const Grid g(600, 50);
    EXPECT_EQ(g.nearest(1.0), 600u);
    EXPECT_EQ(g.nearest(1e-9), 0u);
    EXPECT_EQ(g.nearest(1e9), g.last());
    EXPECT_EQ(g.nearest(2.0), 650u);
}
