#include "obstacle/grid.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace obstacle;

namespace {

constexpr double pi = std::numbers::pi;

GridFn random_fn(const Grid& g, std::mt19937& rng) {
    std::uniform_real_distribution<double> d(-1.0, 1.0);
    GridFn f(g);
    for (int i = 0; i < f.size(); ++i) f[i] = d(rng);
    return f;
}

}  // namespace

TEST(Grid, NodeLayout) {
    Grid g = Grid::interval(3);
    EXPECT_DOUBLE_EQ(g.h(), 0.25);
    EXPECT_EQ(g.size(), 3);
    EXPECT_DOUBLE_EQ(g.node(0).x, 0.25);
    EXPECT_DOUBLE_EQ(g.node(2).x, 0.75);

    Grid r = Grid::radial(3);
    EXPECT_EQ(r.size(), 4);
    EXPECT_DOUBLE_EQ(r.node(0).x, 0.0);
    EXPECT_DOUBLE_EQ(r.node(3).x, 0.75);

    Grid s = Grid::square(4);
    EXPECT_EQ(s.size(), 16);
    EXPECT_DOUBLE_EQ(s.node(5).x, 0.4);
    EXPECT_DOUBLE_EQ(s.node(5).y, 0.4);
}

TEST(Laplacian, DiscreteSineEigenIdentity) {
    Grid g = Grid::interval(3);
    GridFn f = GridFn::sample(g, [](const Point& p) { return std::sin(pi * p.x); });
    GridFn lap = laplacian(f);
    const double h = g.h();
    const double eig = (2.0 / (h * h)) * (1.0 - std::cos(pi * h));
    for (int i = 0; i < f.size(); ++i) EXPECT_NEAR(lap[i], -eig * f[i], 1e-12);
}

TEST(Laplacian, ZeroAndQuadratic) {
    Grid g = Grid::interval(9);
    GridFn zero(g);
    EXPECT_EQ(norm_linf(laplacian(zero)), 0.0);
    GridFn q = GridFn::sample(g, [](const Point& p) { return p.x * (1 - p.x); });
    for (int i = 0; i < q.size(); ++i) EXPECT_NEAR(laplacian(q)[i], -2.0, 1e-10);
}

TEST(Laplacian, BoundaryValuesEnterTheStencil) {
    Grid g = Grid::interval(7);
    auto psi = [](const Point& p) { return p.x * p.x - 3.0; };
    GridFn f = GridFn::sample(g, psi);
    GridFn lap = laplacian(f, psi);
    for (int i = 0; i < f.size(); ++i) EXPECT_NEAR(lap[i], 2.0, 1e-9);
}

TEST(Laplacian, RadialStencilIsExactOnQuadratics) {
    Grid g = Grid::radial(15);
    auto f = [](const Point& p) { return p.x * p.x - 1.0; };
    GridFn lap = laplacian(GridFn::sample(g, f), f);
    for (int i = 0; i < lap.size(); ++i) EXPECT_NEAR(lap[i], 4.0, 1e-9);
}

TEST(Laplacian, SymmetricNegativeDefinite) {
    std::mt19937 rng(7);
    for (Grid g : {Grid::interval(20), Grid::square(7), Grid::radial(20)}) {
        for (int k = 0; k < 5; ++k) {
            GridFn f = random_fn(g, rng);
            GridFn h = random_fn(g, rng);
            const double a = inner(laplacian(f), h);
            const double b = inner(f, laplacian(h));
            EXPECT_NEAR(a, b, 1e-12 * std::max(1.0, std::abs(a)));
            EXPECT_LT(inner(laplacian(f), f), 0.0);
        }
    }
}

TEST(Poisson, QuadraticIsExact) {
    Grid g = Grid::interval(31);
    GridFn y = poisson_solve(GridFn::constant(g, 2.0));
    for (int i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], g.node(i).x * (1 - g.node(i).x), 1e-13);
}

TEST(Poisson, InvertsLaplacian) {
    std::mt19937 rng(3);
    for (Grid g : {Grid::interval(40), Grid::square(9), Grid::radial(33)}) {
        GridFn f = random_fn(g, rng);
        GridFn back = poisson_solve(-laplacian(f));
        EXPECT_LT(norm_linf(back - f), 1e-9);
    }
}

TEST(Poisson, QuarticStateOfInactiveCounterexample) {
    // -y'' = x(1-x) has y = x^4/12 - x^3/6 + x/12.
    double prev = 0.0;
    for (int n : {63, 127, 255}) {
        Grid g = Grid::interval(n);
        GridFn y = poisson_solve(GridFn::sample(g, [](const Point& p) { return p.x * (1 - p.x); }));
        GridFn exact = GridFn::sample(g, [](const Point& p) {
            const double x = p.x;
            return x * x * x * x / 12 - x * x * x / 6 + x / 12;
        });
        const double err = norm_linf(y - exact);
        EXPECT_LT(err, 0.03 * g.h() * g.h());
        if (prev > 0) {
            EXPECT_GT(prev / err, 3.6);
            EXPECT_LT(prev / err, 4.4);
        }
        prev = err;
    }
}

TEST(Poisson, RadialQuarticState) {
    double prev = 0.0;
    for (int n : {63, 127, 255}) {
        Grid g = Grid::radial(n);
        GridFn y = poisson_solve(GridFn::sample(g, [](const Point& p) { return 1 - p.x * p.x; }));
        GridFn exact = GridFn::sample(g, [](const Point& p) {
            const double r = p.x;
            return r * r * r * r / 16 - r * r / 4 + 3.0 / 16;
        });
        const double err = norm_linf(y - exact);
        EXPECT_LT(err, g.h() * g.h());
        if (prev > 0) {
            EXPECT_GT(prev / err, 3.6);
            EXPECT_LT(prev / err, 4.4);
        }
        prev = err;
    }
}

TEST(Poisson, ManufacturedSquareConvergenceOrder) {
    double prev = 0.0;
    for (int n : {15, 31, 63}) {
        Grid g = Grid::square(n);
        auto exact = [](const Point& p) { return std::sin(pi * p.x) * std::sin(2 * pi * p.y); };
        GridFn rhs = GridFn::sample(g, [&](const Point& p) { return 5 * pi * pi * exact(p); });
        const double err = norm_linf(poisson_solve(rhs) - GridFn::sample(g, exact));
        if (prev > 0) {
            EXPECT_GT(prev / err, 3.6);
            EXPECT_LT(prev / err, 4.4);
        }
        prev = err;
    }
}

TEST(Quadrature, MeasuresAndNorms) {
    Grid g = Grid::interval(999);
    EXPECT_NEAR(inner(GridFn::constant(g, 1.0), GridFn::constant(g, 1.0)), 1.0, 2e-3);
    Grid r = Grid::radial(1000);
    // Lumped weights cover the disc of radius 1 - h/2.
    EXPECT_NEAR(integral(GridFn::constant(r, 1.0)), pi * (1 - r.h()) + pi * r.h() * r.h() / 4, 1e-12);
    EXPECT_NEAR(norm_l1(GridFn::constant(g, -2.0)), 2.0 * 999 * g.h(), 1e-12);
    EXPECT_THROW(inner(GridFn(g), GridFn(r)), std::invalid_argument);
}

TEST(Quadrature, SingularControlNormOfStrictlyActiveCounterexample) {
    // ||u_t||^2 = (1 + 2/(r+1) + 1/(2r+1)) t^(2r+1) with r = 2, t = 0.1.
    Grid g = Grid::interval(4095);
    const double t = 0.1;
    GridFn ut = GridFn::sample(g, [t](const Point& p) { return p.x < t ? t * t + p.x * p.x : 0.0; });
    const double exact = (28.0 / 15.0) * std::pow(t, 5);
    EXPECT_NEAR(inner(ut, ut) / exact, 1.0, 0.02);
}

TEST(Poincare, Interval) {
    for (int n : {15, 255, 1023}) {
        Grid g = Grid::interval(n);
        const double h = g.h();
        EXPECT_NEAR(poincare_constant(g), (2.0 / (h * h)) * (1.0 - std::cos(pi * h)), 1e-8);
    }
    EXPECT_NEAR(poincare_constant(Grid::interval(1023)) / (pi * pi), 1.0, 5e-3);
}

TEST(Poincare, SquareAndDisc) {
    EXPECT_NEAR(poincare_constant(Grid::square(63)) / (2 * pi * pi), 1.0, 1e-3);
    // j_{0,1} = 2.404826
    EXPECT_NEAR(poincare_constant(Grid::radial(1023)) / (2.404826 * 2.404826), 1.0, 1e-2);
}

TEST(Poincare, DiscreteInequality) {
    std::mt19937 rng(11);
    for (Grid g : {Grid::interval(50), Grid::radial(50), Grid::square(10)}) {
        const double omega = poincare_constant(g);
        for (int k = 0; k < 10; ++k) {
            GridFn f = random_fn(g, rng);
            EXPECT_GE(inner(-laplacian(f), f), omega * inner(f, f) * (1 - 1e-12));
        }
    }
}
