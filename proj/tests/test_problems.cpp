#include "fde/problems.hpp"
#include "fde/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fde;

TEST(Linear, Configurations) {
    const auto p = make_linear(0.5, -2.0, 0.0, 2.0, default_linear_y0(0.5));
    EXPECT_EQ(p.name(), "linear");
    EXPECT_EQ(p.q(), 1);
    EXPECT_EQ(p.m(), 1);
    EXPECT_DOUBLE_EQ(p.f(0.3, Vector::Constant(1, 1.5))(0), -3.0);
    EXPECT_DOUBLE_EQ(p.jacobian(0.3, Vector::Constant(1, 7.0))(0, 0), -2.0);

    const auto y0 = default_linear_y0(1.5);
    EXPECT_EQ(y0, (std::vector<double>{1.0, 0.0}));
    const auto p3 = make_linear(1.5, -2.0, 0.0, 2.0, y0);
    EXPECT_EQ(p3.m(), 2);
    EXPECT_THROW((void)make_linear(1.5, -2.0, 0.0, 2.0, {1.0}), ConfigError);
}

TEST(Linear, ZeroRateGivesTaylorTerm) {
    const auto p = make_linear(1.4, 0.0, 0.5, 2.5, {2.0, -0.75});
    const auto grid = Grid::uniform(0.5, 2.5, 64);
    for (auto m : {MethodKind::PIU, MethodKind::FT, MethodKind::NG, MethodKind::FBDF}) {
        const auto sol = solve(p, m, grid);
        for (std::size_t n = 0; n <= 64; ++n) {
            EXPECT_NEAR(sol.values[n](0), 2.0 - 0.75 * (sol.times[n] - 0.5), 1e-13) << to_string(m);
        }
    }
}

TEST(Linear, MatchesMittagLeffler) {
    const auto p = make_linear(0.7, -1.0, 0.0, 1.0, {1.0});
    const auto sol = solve(p, MethodKind::FT, Grid::uniform(0.0, 1.0, 1024));
    EXPECT_NEAR(sol.final_value()(0), oracle::linear_solution(0.7, -1.0, 1.0), 1e-6);
}

TEST(Brusselator, SteadyStateIsFixedPoint) {
    for (auto [a, mu] : {std::pair{1.0, 4.0}, std::pair{2.0, 3.0}, std::pair{0.5, 1.7}}) {
        const auto p = make_brusselator(0.8, a, mu, 10.0);
        const Vector f = p.f(0.0, Vector{{a, mu / a}});
        EXPECT_NEAR(f(0), 0.0, 1e-14);
        EXPECT_NEAR(f(1), 0.0, 1e-14);
    }
}

TEST(Brusselator, JacobianExample) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 50.0);
    EXPECT_EQ(p.name(), "brusselator");
    EXPECT_EQ(p.q(), 2);
    const Matrix J = p.jacobian(0.0, Vector{{1.0, 4.0}});
    EXPECT_DOUBLE_EQ(J(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(J(0, 1), 1.0);
    EXPECT_DOUBLE_EQ(J(1, 0), -4.0);
    EXPECT_DOUBLE_EQ(J(1, 1), -1.0);
}

TEST(Brusselator, JacobianAgainstCentralDifferences) {
    oracle::Rng rng(17);
    const auto p = make_brusselator(0.8, 1.0, 4.0, 50.0);
    for (int trial = 0; trial < 10; ++trial) {
        const Vector y{{rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 6.0)}};
        const Matrix J = p.jacobian(0.0, y);
        Matrix D(2, 2);
        for (int j = 0; j < 2; ++j) {
            const double step = 1e-6 * (1.0 + std::abs(y(j)));
            Vector up = y, down = y;
            up(j) += step;
            down(j) -= step;
            D.col(j) = (p.f(0.0, up) - p.f(0.0, down)) / (2.0 * step);
        }
        EXPECT_LE((J - D).lpNorm<Eigen::Infinity>(), 1e-6 * std::max(1.0, J.lpNorm<Eigen::Infinity>()))
            << "state " << y.transpose();
    }
}

TEST(Brusselator, InitialVectorsAndOrders) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 50.0);
    ASSERT_EQ(p.m(), 1);
    EXPECT_EQ(p.y0()[0](0), brusselator_default_x1);
    EXPECT_EQ(p.y0()[0](1), brusselator_default_x2);
    const auto q = make_brusselator(1.3, 1.0, 4.0, 5.0, 0.5, 0.25, 1.0);
    ASSERT_EQ(q.m(), 2);
    EXPECT_EQ(q.y0()[1], Vector::Zero(2));
    EXPECT_EQ(q.t0(), 1.0);
}

TEST(Brusselator, ApproachesLimitCycle) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 50.0);
    const auto sol = solve(p, MethodKind::FT, Grid::uniform(0.0, 50.0, 4096));
    double lo = 1e300, hi = 0.0, far = 0.0;
    for (std::size_t n = 0; n < sol.times.size(); ++n) {
        const double norm = sol.values[n].norm();
        lo = std::min(lo, norm);
        hi = std::max(hi, norm);
        if (sol.times[n] > 40.0) far = std::max(far, (sol.values[n] - Vector{{1.0, 4.0}}).norm());
    }
    EXPECT_GE(lo, 0.1);
    EXPECT_LE(hi, 10.0);
    EXPECT_GT(far, 0.5);
}

TEST(Brusselator, StableFocusConverges) {
    // With mu < 1 + a^2 the fixed point attracts.
    const auto p = make_brusselator(0.8, 1.0, 1.5, 60.0);
    const auto sol = solve(p, MethodKind::FBDF, Grid::uniform(0.0, 60.0, 1200));
    EXPECT_LT((sol.final_value() - Vector{{1.0, 1.5}}).norm(), 0.05);
}
