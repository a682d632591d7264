#include "fde/problems.hpp"
#include "fde/solver.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace fde;

namespace {

FdeProblem zero_field(double alpha, std::vector<double> y0, double T = 2.0) {
    std::vector<Vector> init;
    for (double v : y0) init.push_back(Vector::Constant(1, v));
    return FdeProblem(alpha, 0.0, T, std::move(init),
                      [](double, const Vector& y) -> Vector { return Vector::Zero(y.size()); });
}

Grid grid_for(MethodKind m, double alpha, double T, std::size_t N) {
    return default_grid(m, alpha, 0.0, T, N);
}

}  // namespace

// ---------------------------------------------------------------------------
// Newton
// ---------------------------------------------------------------------------

TEST(Newton, ZeroFieldReturnsKnownTerm) {
    const auto p = zero_field(0.5, {0.0});
    const ImplicitStepEquation eq{Vector::Constant(1, 3.25), 0.4, 1.0};
    const auto r = newton_solve(eq, p, Vector::Constant(1, -7.0), SolverConfig{});
    EXPECT_EQ(r.y(0), 3.25);
    EXPECT_EQ(r.iterations, 1);
}

TEST(Newton, LinearExactInOneStep) {
    const double lambda = -3.0;
    const auto p = make_linear(0.5, lambda, 0.0, 1.0, {1.0});
    const ImplicitStepEquation eq{Vector::Constant(1, 0.8), 0.25, 0.5};
    const auto r = newton_solve(eq, p, Vector::Constant(1, 1.0), SolverConfig{});
    EXPECT_NEAR(r.y(0), 0.8 / (1.0 - 0.25 * lambda), 1e-15);
    EXPECT_EQ(r.iterations, 1);
}

TEST(Newton, AnalyticAndFiniteDifferenceJacobianAgree) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 10.0);
    const ImplicitStepEquation eq{Vector{{1.3, 2.6}}, 0.08, 0.3};
    SolverConfig analytic;
    SolverConfig fd;
    fd.jacobian_mode = JacobianMode::ForwardDifference;
    const auto a = newton_solve(eq, p, Vector{{1.2, 2.8}}, analytic);
    const auto b = newton_solve(eq, p, Vector{{1.2, 2.8}}, fd);
    EXPECT_LE((a.y - b.y).lpNorm<Eigen::Infinity>(), 10 * analytic.newton_tol);
    EXPECT_GT(a.jacobian_norm, 0.0);
}

TEST(Newton, Failures) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 10.0);
    SolverConfig one;
    one.newton_max_iter = 1;
    const ImplicitStepEquation eq{Vector{{1.3, 2.6}}, 0.5, 0.3};
    try {
        (void)newton_solve(eq, p, Vector{{0.0, 0.0}}, one, 17);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.step(), 17u);
        EXPECT_GT(e.residual(), 0.0);
    }

    // I - c J singular for f = y, c = 1.
    const auto unit = make_linear(0.5, 1.0, 0.0, 1.0, {1.0});
    const ImplicitStepEquation sing{Vector::Constant(1, 1.0), 1.0, 0.1};
    EXPECT_THROW((void)newton_solve(sing, unit, Vector::Constant(1, 0.0), SolverConfig{}), SolverError);

    EXPECT_THROW((void)newton_solve(sing, unit, Vector::Constant(1, std::nan("")), SolverConfig{}),
                 SolverError);
}

TEST(SolverConfig, Validation) {
    SolverConfig c;
    c.newton_tol = 0.0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = SolverConfig{};
    c.newton_max_iter = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    const auto p = zero_field(0.5, {1.0});
    EXPECT_THROW((void)solve(p, MethodKind::FT, Grid::uniform(0, 2, 8), c), ConfigError);
}

// ---------------------------------------------------------------------------
// Startup block
// ---------------------------------------------------------------------------

TEST(StartupBlock, SingleUnknownReducesToNewton) {
    const double a = 1.5;  // E = {0, 1}, s = 1
    const auto p = make_brusselator(a, 1.0, 4.0, 2.0);
    const auto grid = Grid::uniform(0.0, 2.0, 64);
    const auto omega = ft_weights(a, 64);
    const auto E = exponent_set(a);
    ASSERT_EQ(E.s(), 1u);
    const StartingWeightTable table(omega, E, 64);
    const auto block = startup_block(p, omega, table, 1, grid, SolverConfig{});

    const double ha = std::pow(grid.h(), a);
    const auto w = table.at(1).w;
    const Vector f0 = p.f(0.0, p.y0()[0]);
    const ImplicitStepEquation eq{taylor_term(p, grid.node(1)) + ha * (omega[1] + w[0]) * f0,
                                  ha * (omega[0] + w[1]), grid.node(1)};
    const auto r = newton_solve(eq, p, p.y0()[0], SolverConfig{});
    EXPECT_LE((block.y[0] - r.y).lpNorm<Eigen::Infinity>(), 1e-13);
}

TEST(StartupBlock, LinearProblemMatchesDirectSolve) {
    for (double a : {0.3, 0.5}) {
        const double lambda = -2.0;
        const auto p = make_linear(a, lambda, 0.0, 1.0, {1.0});
        const std::size_t N = 32;
        const auto grid = Grid::uniform(0.0, 1.0, N);
        const auto omega = ng_weights(a, N);
        const auto E = exponent_set(a);
        const std::size_t s = E.s();
        const StartingWeightTable table(omega, E, N);
        const auto block = startup_block(p, omega, table, s, grid, SolverConfig{});

        // (I - h^a lambda B) Y = G, assembled independently.
        const double ha = std::pow(grid.h(), a);
        const auto S = static_cast<Eigen::Index>(s);
        Matrix A = Matrix::Identity(S, S);
        Vector G(S);
        for (std::size_t n = 1; n <= s; ++n) {
            const auto w = table.at(n).w;
            G(n - 1) = 1.0 + ha * (omega[n] + w[0]) * lambda;
            for (std::size_t k = 1; k <= s; ++k) {
                const double b = w[k] + (k <= n ? omega[n - k] : 0.0);
                A(n - 1, k - 1) -= ha * lambda * b;
            }
        }
        const Vector Y = A.fullPivLu().solve(G);
        for (std::size_t n = 0; n < s; ++n) EXPECT_NEAR(block.y[n](0), Y(n), 1e-13);
    }
}

TEST(StartupBlock, ZeroFieldGivesTaylorTerm) {
    const auto p = zero_field(0.3, {2.5});
    const auto grid = Grid::uniform(0.0, 2.0, 16);
    const auto omega = fbdf_weights(0.3, 16);
    const auto E = exponent_set(0.3);
    const StartingWeightTable table(omega, E, 16);
    const auto block = startup_block(p, omega, table, E.s(), grid, SolverConfig{});
    for (const auto& y : block.y) EXPECT_EQ(y(0), 2.5);
}

TEST(StartupBlock, RejectsShortGrid) {
    const auto p = zero_field(0.3, {1.0});
    const auto omega = ft_weights(0.3, 3);
    EXPECT_THROW((void)solve(p, MethodKind::FT, Grid::uniform(0.0, 2.0, 3)), ConfigError);
}

// ---------------------------------------------------------------------------
// Drivers
// ---------------------------------------------------------------------------

TEST(Solve, ZeroFieldGivesTaylorTermForAllMethods) {
    for (double a : {0.3, 0.5, 1.5}) {
        const std::vector<double> y0 = a > 1 ? std::vector<double>{1.0, 0.5} : std::vector<double>{1.0};
        const auto p = zero_field(a, y0);
        for (auto m : all_methods) {
            const auto sol = solve(p, m, grid_for(m, a, 2.0, 40));
            for (std::size_t n = 0; n < sol.times.size(); ++n) {
                const double want = a > 1 ? 1.0 + 0.5 * sol.times[n] : 1.0;
                EXPECT_NEAR(sol.values[n](0), want, 1e-14) << to_string(m) << " n=" << n;
            }
        }
    }
}

TEST(Solve, ConstantTaylorTermOrderAboveOne) {
    const auto p = zero_field(1.5, {1.0, 0.0});
    for (auto m : all_methods) {
        const auto sol = solve(p, m, grid_for(m, 1.5, 2.0, 100));
        for (const auto& y : sol.values) EXPECT_EQ(y(0), 1.0);
    }
}

TEST(Solve, SolutionShape) {
    const auto p = make_linear(0.5, -2.0, 0.0, 2.0, {1.0});
    for (auto m : all_methods) {
        const auto grid = grid_for(m, 0.5, 2.0, 50);
        const auto sol = solve(p, m, grid);
        EXPECT_EQ(sol.method, m);
        EXPECT_EQ(sol.times, grid.nodes());
        ASSERT_EQ(sol.values.size(), 51u);
        EXPECT_EQ(sol.values[0](0), 1.0);
        EXPECT_GT(sol.stats.newton_iterations, 0u);
        EXPECT_GE(sol.stats.max_iterations_per_step, 1u);
        EXPECT_GE(sol.stats.wall_seconds, 0.0);
        EXPECT_TRUE(sol.equations.empty());
    }
}

TEST(Solve, MethodGridCompatibility) {
    const auto p = make_linear(0.5, -2.0, 0.0, 2.0, {1.0});
    EXPECT_THROW((void)solve(p, MethodKind::PIG, Grid::uniform(0, 2, 16)), ConfigError);
    EXPECT_THROW((void)solve(p, MethodKind::FT, Grid::graded(0, 2, 16, 4.0)), ConfigError);
    EXPECT_THROW((void)solve(p, MethodKind::FT, Grid::uniform(0, 3, 16)), ConfigError);
}

TEST(Solve, MatchesMittagLefflerOracle) {
    for (double a : {0.5, 1.5}) {
        const std::vector<double> y0 = a > 1 ? std::vector<double>{1.0, 0.0} : std::vector<double>{1.0};
        const auto p = make_linear(a, -2.0, 0.0, 2.0, y0);
        const double exact = oracle::linear_solution(a, -2.0, 2.0);
        for (auto m : all_methods) {
            const auto sol = solve(p, m, grid_for(m, a, 2.0, 512));
            EXPECT_NEAR(sol.final_value()(0), exact, 1e-5) << to_string(m) << " a=" << a;
        }
    }
}

TEST(Solve, FtErrorAtN2048) {
    const auto p = make_linear(0.5, -2.0, 0.0, 2.0, {1.0});
    const double ref = solve(p, MethodKind::FT, Grid::uniform(0, 2, 2048 * 8)).final_value()(0);
    const double err = std::abs(solve(p, MethodKind::FT, Grid::uniform(0, 2, 2048)).final_value()(0) - ref);
    EXPECT_GT(err, 9.49e-9 / 3);
    EXPECT_LT(err, 9.49e-9 * 3);
    // The reference itself against the series solution.
    EXPECT_NEAR(ref, oracle::linear_solution(0.5, -2.0, 2.0), 1e-9);
}

TEST(Solve, ResidualCertificate) {
    SolverConfig config;
    config.record_equations = true;
    for (double a : {0.4, 0.8}) {
        const auto p = make_brusselator(a, 1.0, 4.0, 10.0);
        for (auto m : all_methods) {
            const auto sol = solve(p, m, grid_for(m, a, 10.0, 300), config);
            ASSERT_EQ(sol.equations.size(), 300u);
            const std::size_t s = is_flmm(m) ? exponent_set(a).s() : 0;
            double startup_norm = 0.0;
            for (std::size_t n = 1; n <= s; ++n) {
                startup_norm = std::max(startup_norm, sol.values[n].lpNorm<Eigen::Infinity>());
            }
            for (std::size_t n = 1; n <= 300; ++n) {
                const auto& eq = sol.equations[n - 1];
                const Vector& y = sol.values[n];
                EXPECT_EQ(eq.t, sol.times[n]);
                const double res = (y - eq.g - eq.c * p.f(eq.t, y)).lpNorm<Eigen::Infinity>();
                const double norm = n <= s ? startup_norm : y.lpNorm<Eigen::Infinity>();
                EXPECT_LE(res, config.newton_tol * (1.0 + norm)) << to_string(m) << " n=" << n;
            }
        }
    }
}

TEST(Solve, LinearSchemeSelfConsistency) {
    const double lambda = -2.0;
    for (double a : {0.3, 0.5, 1.5}) {
        const std::vector<double> y0 = a > 1 ? std::vector<double>{1.0, 0.0} : std::vector<double>{1.0};
        const auto p = make_linear(a, lambda, 0.0, 2.0, y0);
        for (auto m : {MethodKind::FT, MethodKind::NG, MethodKind::FBDF}) {
            const std::size_t N = 700;
            const auto grid = Grid::uniform(0.0, 2.0, N);
            const auto sol = solve(p, m, grid);
            const auto omega = flmm_weights(m, a, N);
            const auto E = exponent_set(a);
            const StartingWeightTable table(omega, E, N);
            const double ha = std::pow(grid.h(), a);
            double worst = 0.0;
            for (std::size_t n = 1; n <= N; ++n) {
                const auto w = table.at(n).w;
                long double acc = 0.0L;
                for (std::size_t j = 0; j < w.size(); ++j) acc += static_cast<long double>(w[j]) * sol.values[j](0);
                for (std::size_t j = 0; j <= n; ++j) acc += static_cast<long double>(omega[n - j]) * sol.values[j](0);
                const double rhs = 1.0 + ha * lambda * static_cast<double>(acc);
                worst = std::max(worst, std::abs(sol.values[n](0) - rhs));
            }
            EXPECT_LE(worst, 1e-12) << to_string(m) << " a=" << a;
        }
    }
}

TEST(Solve, MethodsAgreeOnBothProblems) {
    const auto lin = make_linear(0.7, -2.0, 0.0, 2.0, {1.0});
    const auto bru = make_brusselator(0.7, 1.0, 4.0, 5.0);
    const Vector ref_lin = solve(lin, MethodKind::FT, Grid::uniform(0, 2, 8192)).final_value();
    const Vector ref_bru = solve(bru, MethodKind::FT, Grid::uniform(0, 5, 8192)).final_value();
    for (auto m : all_methods) {
        const auto a = solve(lin, m, grid_for(m, 0.7, 2.0, 1024)).final_value();
        const auto b = solve(bru, m, grid_for(m, 0.7, 5.0, 1024)).final_value();
        EXPECT_LE((a - ref_lin).lpNorm<Eigen::Infinity>(), 1e-5) << to_string(m);
        EXPECT_LE((b - ref_bru).lpNorm<Eigen::Infinity>(), 1e-3) << to_string(m);
    }
}

TEST(Solve, FiniteDifferenceJacobianWhenNoneGiven) {
    const auto with = make_brusselator(0.6, 1.0, 4.0, 3.0);
    const FdeProblem without(0.6, 0.0, 3.0, with.y0(),
                             [&with](double t, const Vector& y) { return with.f(t, y); });
    for (auto m : all_methods) {
        const auto grid = grid_for(m, 0.6, 3.0, 200);
        const auto a = solve(with, m, grid).final_value();
        const auto b = solve(without, m, grid).final_value();
        EXPECT_LE((a - b).lpNorm<Eigen::Infinity>(), 1e-10) << to_string(m);
    }
}

TEST(Solve, StiffStepWarning) {
    const auto p = make_linear(0.5, -100.0, 0.0, 1.0, {1.0});
    const auto sol = solve(p, MethodKind::FT, Grid::uniform(0, 1, 64));
    ASSERT_EQ(sol.stats.warnings.size(), 1u);
    EXPECT_NE(sol.stats.warnings[0].find("smaller step"), std::string::npos);
    const auto mild = solve(make_linear(0.5, -0.1, 0.0, 1.0, {1.0}), MethodKind::FT,
                            Grid::uniform(0, 1, 64));
    EXPECT_TRUE(mild.stats.warnings.empty());
}

TEST(Solve, NewtonFailureCarriesStep) {
    const auto p = make_brusselator(0.8, 1.0, 4.0, 50.0);
    SolverConfig c;
    c.newton_max_iter = 2;
    for (auto m : {MethodKind::PIU, MethodKind::PIG}) {
        try {
            (void)solve(p, m, grid_for(m, 0.8, 50.0, 32), c);
            FAIL() << "expected SolverError";
        } catch (const SolverError& e) {
            EXPECT_GE(e.step(), 1u);
            EXPECT_LE(e.step(), 32u);
        }
    }
}

// ---------------------------------------------------------------------------
// EOC
// ---------------------------------------------------------------------------

TEST(Eoc, Examples) {
    const auto q = eoc({{10, 1e-2}, {20, 2.5e-3}});
    ASSERT_EQ(q.size(), 1u);
    EXPECT_NEAR(q[0], 2.0, 1e-14);

    const auto c = eoc({{8, 1e-3}, {16, 1e-3}, {32, 1e-3}});
    for (double v : c) EXPECT_EQ(v, 0.0);

    // Target values are rounded to three digits.
    const std::vector<double> piu = {3.29e-4, 1.15e-4, 4.00e-5, 1.40e-5, 4.94e-6, 1.74e-6, 6.14e-7};
    const std::vector<double> target = {1.524, 1.516, 1.511, 1.508, 1.505, 1.503};
    std::vector<std::pair<std::size_t, double>> e;
    for (std::size_t k = 0; k < piu.size(); ++k) e.emplace_back(32u << k, piu[k]);
    const auto got = eoc(e);
    for (std::size_t k = 0; k < got.size(); ++k) EXPECT_NEAR(got[k], target[k], 0.015);

    EXPECT_TRUE(eoc({{16, 1.0}}).empty());
    EXPECT_THROW((void)eoc({{16, 1.0}, {24, 0.5}}), ConfigError);
}
