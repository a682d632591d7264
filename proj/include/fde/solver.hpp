#pragma once

#include "fde/core.hpp"
#include "fde/fastconv.hpp"
#include "fde/starting.hpp"
#include "fde/weights.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <optional>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace fde {

enum class JacobianMode { Analytic, ForwardDifference };

struct SolverConfig {
    /// Newton stops once ||y - g - c f(t, y)||_inf <= newton_tol (1 + ||y||_inf).
    double newton_tol = 1e-12;
    int newton_max_iter = 50;
    /// Analytic falls back to forward differences when the problem has no Jacobian.
    JacobianMode jacobian_mode = JacobianMode::Analytic;
    /// Forward-difference step is fd_step_scale * sqrt(eps) * (1 + |y_i|).
    double fd_step_scale = 1.0;
    /// Keep (g_n, c, t_n) of every step in Solution::equations.
    bool record_equations = false;
    /// Threshold on c * ||J||_inf above which a step-size warning is issued.
    double stiffness_warning = 0.5;

    void validate() const {
        if (!(newton_tol > 0.0)) throw ConfigError("newton_tol must be positive");
        if (newton_max_iter < 1) throw ConfigError("newton_max_iter must be >= 1");
        if (!(fd_step_scale > 0.0)) throw ConfigError("fd_step_scale must be positive");
    }
};

namespace detail {

inline Matrix evaluate_jacobian(const FdeProblem& problem, double t, const Vector& y,
                                const Vector& fy, const SolverConfig& config) {
    if (config.jacobian_mode == JacobianMode::Analytic && problem.has_jacobian()) {
        return problem.jacobian(t, y);
    }
    const Eigen::Index q = y.size();
    Matrix J(q, q);
    const double base = config.fd_step_scale * std::sqrt(std::numeric_limits<double>::epsilon());
    Vector yp = y;
    for (Eigen::Index k = 0; k < q; ++k) {
        const double step = base * (1.0 + std::abs(y(k)));
        yp(k) = y(k) + step;
        const double actual = yp(k) - y(k);
        J.col(k) = (problem.f(t, yp) - fy) / actual;
        yp(k) = y(k);
    }
    return J;
}

inline double inf_norm(const Vector& v) { return v.size() == 0 ? 0.0 : v.lpNorm<Eigen::Infinity>(); }

inline double matrix_inf_norm(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().rowwise().sum().maxCoeff();
}

}  // namespace detail

struct NewtonResult {
    Vector y;
    int iterations = 0;
    double residual = 0.0;
    /// ||J||_inf at the last Jacobian evaluation (0 if none was needed).
    double jacobian_norm = 0.0;
};

/// Solves y = g + c f(t, y) by Newton's method:
///   (I - c J(y_k)) delta = -y_k + g + c f(t, y_k),  y_{k+1} = y_k + delta.
[[nodiscard]] inline NewtonResult newton_solve(const ImplicitStepEquation& eq,
                                               const FdeProblem& problem, const Vector& y_guess,
                                               const SolverConfig& config,
                                               std::size_t step_index = 0) {
    if (!y_guess.allFinite()) throw SolverError("Newton: initial guess not finite", step_index);
    NewtonResult out;
    out.y = y_guess;
    const Eigen::Index q = y_guess.size();
    for (int k = 0;; ++k) {
        const Vector fy = problem.f(eq.t, out.y);
        const Vector b = -out.y + eq.g + eq.c * fy;
        out.residual = detail::inf_norm(b);
        if (!std::isfinite(out.residual)) {
            throw SolverError("Newton: residual not finite at step " + std::to_string(step_index),
                              step_index, out.residual);
        }
        if (out.residual <= config.newton_tol * (1.0 + detail::inf_norm(out.y))) {
            out.iterations = k;
            return out;
        }
        if (k >= config.newton_max_iter) {
            std::ostringstream os;
            os << "Newton did not converge at step " << step_index << " after " << k
               << " iterations (residual " << out.residual << ")";
            throw SolverError(os.str(), step_index, out.residual);
        }
        const Matrix J = detail::evaluate_jacobian(problem, eq.t, out.y, fy, config);
        out.jacobian_norm = detail::matrix_inf_norm(J);
        const Matrix A = Matrix::Identity(q, q) - eq.c * J;
        Eigen::FullPivLU<Matrix> lu(A);
        if (!lu.isInvertible()) {
            throw SolverError("Newton: singular iteration matrix at step " +
                                  std::to_string(step_index),
                              step_index, out.residual);
        }
        out.y += lu.solve(b);
    }
}

// -----------------------------------------------------------------------------
// Startup block of the multistep methods
// -----------------------------------------------------------------------------

struct StartupResult {
    std::vector<Vector> y;  // y_1..y_s
    int iterations = 0;
    double jacobian_norm = 0.0;
    std::vector<ImplicitStepEquation> equations;  // row-wise view, one per n
};

/// Solves for y_1..y_s together:
///   y_n = T(t_n) + h^a (omega_n + w_{n,0}) f_0 + h^a sum_{k=1}^s B_{n,k} f(t_k, y_k),
///   B_{n,k} = omega_{n-k} [k <= n] + w_{n,k},
/// by Newton's method on the stacked unknown, starting from y_n = y_0.
[[nodiscard]] inline StartupResult startup_block(const FdeProblem& problem,
                                                 const ConvolutionWeights& omega,
                                                 const StartingWeightTable& starting,
                                                 std::size_t s, const Grid& grid,
                                                 const SolverConfig& config) {
    if (s < 1) throw ConfigError("startup block needs s >= 1");
    if (grid.steps() < s) {
        throw ConfigError("grid with N=" + std::to_string(grid.steps()) +
                          " is shorter than the startup block s=" + std::to_string(s));
    }
    const Eigen::Index q = problem.q();
    const auto S = static_cast<Eigen::Index>(s);
    const double ha = std::pow(grid.h(), problem.alpha());
    const Vector f0 = problem.f(grid.t0(), problem.y0().front());

    Matrix B = Matrix::Zero(S, S);
    Vector G(S * q);
    for (std::size_t n = 1; n <= s; ++n) {
        const auto w = starting.at(n).w;
        for (std::size_t k = 1; k <= s; ++k) {
            double b = w[k];
            if (k <= n) b += omega[n - k];
            B(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(k - 1)) = b;
        }
        G.segment(static_cast<Eigen::Index>(n - 1) * q, q) =
            taylor_term(problem, grid.node(n)) + ha * (omega[n] + w[0]) * f0;
    }

    Vector Y(S * q);
    for (Eigen::Index n = 0; n < S; ++n) Y.segment(n * q, q) = problem.y0().front();

    StartupResult out;
    std::vector<Vector> F(s);
    for (int it = 0;; ++it) {
        for (std::size_t n = 0; n < s; ++n) {
            F[n] = problem.f(grid.node(n + 1), Y.segment(static_cast<Eigen::Index>(n) * q, q));
        }
        Vector R = -Y + G;
        for (Eigen::Index n = 0; n < S; ++n) {
            for (Eigen::Index k = 0; k < S; ++k) {
                if (B(n, k) != 0.0) R.segment(n * q, q) += ha * B(n, k) * F[static_cast<std::size_t>(k)];
            }
        }
        const double res = detail::inf_norm(R);
        if (!std::isfinite(res)) throw SolverError("startup block: residual not finite", 1, res);
        if (res <= config.newton_tol * (1.0 + detail::inf_norm(Y))) {
            out.iterations = it;
            break;
        }
        if (it >= config.newton_max_iter) {
            std::ostringstream os;
            os << "startup block did not converge after " << it << " iterations (residual " << res
               << ")";
            throw SolverError(os.str(), 1, res);
        }
        Matrix A = Matrix::Identity(S * q, S * q);
        for (Eigen::Index k = 0; k < S; ++k) {
            const auto ku = static_cast<std::size_t>(k);
            const Vector yk = Y.segment(k * q, q);
            const Matrix Jk = detail::evaluate_jacobian(problem, grid.node(ku + 1), yk, F[ku], config);
            out.jacobian_norm = std::max(out.jacobian_norm, detail::matrix_inf_norm(Jk));
            for (Eigen::Index n = 0; n < S; ++n) {
                if (B(n, k) != 0.0) A.block(n * q, k * q, q, q) -= ha * B(n, k) * Jk;
            }
        }
        Eigen::FullPivLU<Matrix> lu(A);
        if (!lu.isInvertible()) throw SolverError("startup block: singular iteration matrix", 1, res);
        Y += lu.solve(R);
    }

    out.y.resize(s);
    for (std::size_t n = 0; n < s; ++n) {
        out.y[n] = Y.segment(static_cast<Eigen::Index>(n) * q, q);
        F[n] = problem.f(grid.node(n + 1), out.y[n]);
    }
    // Row n rewritten as y_n = g + c f(t_n, y_n) with every other unknown frozen.
    out.equations.resize(s);
    for (std::size_t n = 0; n < s; ++n) {
        const auto ni = static_cast<Eigen::Index>(n);
        Vector g = G.segment(ni * q, q);
        for (std::size_t k = 0; k < s; ++k) {
            if (k != n) g += ha * B(ni, static_cast<Eigen::Index>(k)) * F[k];
        }
        out.equations[n] = {std::move(g), ha * B(ni, ni), grid.node(n + 1)};
    }
    return out;
}

// -----------------------------------------------------------------------------
// Drivers
// -----------------------------------------------------------------------------

namespace detail {

class StepRecorder {
public:
    StepRecorder(Solution& sol, const SolverConfig& config) : sol_(sol), config_(config) {}

    void accept(std::size_t n, const ImplicitStepEquation& eq, const NewtonResult& r) {
        note(n, eq.c, r.jacobian_norm, r.iterations);
        if (config_.record_equations) sol_.equations.push_back(eq);
    }

    void note(std::size_t n, double c, double jacobian_norm, int iterations) {
        sol_.stats.newton_iterations += static_cast<std::size_t>(iterations);
        sol_.stats.max_iterations_per_step =
            std::max(sol_.stats.max_iterations_per_step, static_cast<std::size_t>(iterations));
        if (!warned_ && std::abs(c) * jacobian_norm > config_.stiffness_warning) {
            std::ostringstream os;
            os << "step " << n << ": h^alpha*w0*||J|| = " << std::abs(c) * jacobian_norm
               << " exceeds " << config_.stiffness_warning
               << "; Newton convergence may need a smaller step";
            sol_.stats.warnings.push_back(os.str());
            warned_ = true;
        }
    }

private:
    Solution& sol_;
    const SolverConfig& config_;
    bool warned_ = false;
};

inline void solve_flmm(const FdeProblem& problem, MethodKind method, const Grid& grid,
                       const SolverConfig& config, Solution& sol) {
    const std::size_t N = grid.steps();
    const double alpha = problem.alpha();
    const double ha = std::pow(grid.h(), alpha);
    const ConvolutionWeights omega = flmm_weights(method, alpha, N);
    const ExponentSet E = exponent_set(alpha);
    const std::size_t s = E.s();
    const StartingWeightTable starting(omega, E, N);
    for (const auto& w : starting.warnings()) sol.stats.warnings.push_back(w);

    StepRecorder rec(sol, config);
    std::vector<Vector> f(N + 1);
    f[0] = problem.f(grid.t0(), sol.values[0]);

    auto start = startup_block(problem, omega, starting, s, grid, config);
    for (std::size_t n = 1; n <= s; ++n) {
        sol.values[n] = std::move(start.y[n - 1]);
        f[n] = problem.f(grid.node(n), sol.values[n]);
        if (config.record_equations) sol.equations.push_back(start.equations[n - 1]);
    }
    rec.note(1, ha * omega[0], start.jacobian_norm, start.iterations);

    LagAccumulator lag(omega.omega, problem.q());
    for (std::size_t j = 0; j <= s; ++j) lag.append(j, f[j]);

    for (std::size_t n = s + 1; n <= N; ++n) {
        const double t = grid.node(n);
        const auto w = starting.at(n).w;
        Vector g = taylor_term(problem, t);
        Vector corr = lag.lag(n);
        for (std::size_t j = 0; j <= s; ++j) corr += w[j] * f[j];
        g += ha * corr;
        const ImplicitStepEquation eq{std::move(g), ha * omega[0], t};
        auto r = newton_solve(eq, problem, sol.values[n - 1], config, n);
        rec.accept(n, eq, r);
        sol.values[n] = std::move(r.y);
        f[n] = problem.f(t, sol.values[n]);
        if (n < N) lag.append(n, f[n]);
    }
}

inline void solve_piu(const FdeProblem& problem, const Grid& grid, const SolverConfig& config,
                      Solution& sol) {
    const std::size_t N = grid.steps();
    const double alpha = problem.alpha();
    const double scale = std::pow(grid.h(), alpha) / gamma_fn(alpha + 2.0);
    const PiUniformWeights pw = pi_uniform_weights(alpha, N);

    StepRecorder rec(sol, config);
    const Vector f0 = problem.f(grid.t0(), sol.values[0]);
    // f_0 enters through w_tilde only, so the convolution sees a zero there.
    LagAccumulator lag(pw.b_tilde, problem.q());
    lag.append(0, Vector::Zero(problem.q()));

    for (std::size_t n = 1; n <= N; ++n) {
        const double t = grid.node(n);
        Vector g = taylor_term(problem, t) + scale * (pw.w_tilde[n] * f0 + lag.lag(n));
        const ImplicitStepEquation eq{std::move(g), scale * pw.b_tilde[0], t};
        auto r = newton_solve(eq, problem, sol.values[n - 1], config, n);
        rec.accept(n, eq, r);
        sol.values[n] = std::move(r.y);
        if (n < N) lag.append(n, problem.f(t, sol.values[n]));
    }
}

inline void solve_pig(const FdeProblem& problem, const Grid& grid, const SolverConfig& config,
                      Solution& sol) {
    const std::size_t N = grid.steps();
    const double alpha = problem.alpha();
    const PiGradedWeights weights(alpha, grid.grading(), N, grid.h());
    const double scale = weights.scale();

    StepRecorder rec(sol, config);
    const Eigen::Index q = problem.q();
    // f_j stored component-major for the O(n) row products.
    std::vector<std::vector<double>> f(static_cast<std::size_t>(q), std::vector<double>(N + 1, 0.0));
    const Vector f0 = problem.f(grid.t0(), sol.values[0]);
    for (Eigen::Index i = 0; i < q; ++i) f[static_cast<std::size_t>(i)][0] = f0(i);

    std::vector<double> b;
    for (std::size_t n = 1; n <= N; ++n) {
        const double t = grid.node(n);
        weights.fill_row(n, b);
        Vector hist(q);
        for (Eigen::Index i = 0; i < q; ++i) {
            const auto& fi = f[static_cast<std::size_t>(i)];
            double acc = weights.w_hat(n) * fi[0];
            for (std::size_t j = 1; j < n; ++j) acc += b[j - 1] * fi[j];
            hist(i) = acc;
        }
        Vector g = taylor_term(problem, t) + scale * hist;
        const ImplicitStepEquation eq{std::move(g), scale * b[n - 1], t};
        auto r = newton_solve(eq, problem, sol.values[n - 1], config, n);
        rec.accept(n, eq, r);
        sol.values[n] = std::move(r.y);
        const Vector fn = problem.f(t, sol.values[n]);
        for (Eigen::Index i = 0; i < q; ++i) f[static_cast<std::size_t>(i)][n] = fn(i);
    }
}

}  // namespace detail

/// Integrates `problem` over `grid` with one of the five methods. PIG needs a
/// graded grid, every other method a uniform one.
[[nodiscard]] inline Solution solve(const FdeProblem& problem, MethodKind method, const Grid& grid,
                                    const SolverConfig& config = {}) {
    config.validate();
    const bool graded = grid.kind() == GridKind::Graded;
    if (requires_graded_grid(method) != graded) {
        throw ConfigError(std::string(to_string(method)) + " requires a " +
                          (requires_graded_grid(method) ? "graded" : "uniform") + " grid");
    }
    if (grid.t0() != problem.t0() || grid.T() != problem.T()) {
        throw ConfigError("grid interval does not match the problem interval");
    }
    const auto started = std::chrono::steady_clock::now();

    Solution sol;
    sol.method = method;
    sol.times = grid.nodes();
    sol.values.resize(grid.steps() + 1);
    sol.values[0] = problem.y0().front();

    switch (method) {
        case MethodKind::PIU: detail::solve_piu(problem, grid, config, sol); break;
        case MethodKind::PIG: detail::solve_pig(problem, grid, config, sol); break;
        default: detail::solve_flmm(problem, method, grid, config, sol); break;
    }

    sol.stats.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return sol;
}

/// Grid a method runs on by default: uniform, or graded with r = 2/alpha for PIG.
[[nodiscard]] inline Grid default_grid(MethodKind method, double alpha, double t0, double T,
                                       std::size_t N, std::optional<double> r = std::nullopt) {
    if (method == MethodKind::PIG) return Grid::graded(t0, T, N, r.value_or(2.0 / alpha));
    return Grid::uniform(t0, T, N);
}

/// Estimated orders log2(E(N_k)/E(N_{k+1})) for successively doubled N.
[[nodiscard]] inline std::vector<double> eoc(const std::vector<std::pair<std::size_t, double>>& errors) {
    std::vector<double> out;
    for (std::size_t k = 0; k + 1 < errors.size(); ++k) {
        if (errors[k + 1].first != 2 * errors[k].first) {
            throw ConfigError("EOC needs doubling N, got " + std::to_string(errors[k].first) +
                              " then " + std::to_string(errors[k + 1].first));
        }
        out.push_back(std::log2(errors[k].second / errors[k + 1].second));
    }
    return out;
}

}  // namespace fde
