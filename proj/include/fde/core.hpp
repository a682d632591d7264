#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#ifndef FDE_VERSION
#define FDE_VERSION "0.1.0"
#endif

namespace fde {

inline constexpr std::string_view version = FDE_VERSION;

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Bad input or configuration: an unsupported order, an incompatible
/// method/grid pair, a malformed option. The CLI maps this to exit code 2.
class ConfigError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Failure during time stepping (Newton divergence, singular iteration
/// matrix). Carries the step index and the last residual when known.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, std::size_t step = 0,
                double residual = std::numeric_limits<double>::quiet_NaN())
        : std::runtime_error(what), step_(step), residual_(residual) {}

    [[nodiscard]] std::size_t step() const noexcept { return step_; }
    [[nodiscard]] double residual() const noexcept { return residual_; }

private:
    std::size_t step_;
    double residual_;
};

// -----------------------------------------------------------------------------
// Methods
// -----------------------------------------------------------------------------

enum class MethodKind {
    PIU,   // product-integration trapezoidal rule, uniform grid
    PIG,   // product-integration trapezoidal rule, graded grid
    FT,    // fractional trapezoidal rule
    NG,    // Newton-Gregory formula
    FBDF,  // fractional BDF2
};

inline constexpr std::array<MethodKind, 5> all_methods = {
    MethodKind::PIU, MethodKind::PIG, MethodKind::FT, MethodKind::NG, MethodKind::FBDF};

[[nodiscard]] constexpr std::string_view to_string(MethodKind m) noexcept {
    switch (m) {
        case MethodKind::PIU: return "PIU";
        case MethodKind::PIG: return "PIG";
        case MethodKind::FT: return "FT";
        case MethodKind::NG: return "NG";
        case MethodKind::FBDF: return "FBDF";
    }
    return "?";
}

inline constexpr std::string_view method_list_text = "PIU, PIG, FT, NG, FBDF";

/// Accepts the acronyms case-insensitively, with or without the blank in "PI U".
[[nodiscard]] inline std::optional<MethodKind> parse_method(std::string_view text) {
    std::string key;
    for (char c : text) {
        if (c != ' ' && c != '_' && c != '-') {
            key.push_back(static_cast<char>(std::toupper(static_cast<unsigned char>(c))));
        }
    }
    for (auto m : all_methods) {
        if (key == to_string(m)) return m;
    }
    return std::nullopt;
}

[[nodiscard]] constexpr bool is_flmm(MethodKind m) noexcept {
    return m == MethodKind::FT || m == MethodKind::NG || m == MethodKind::FBDF;
}

[[nodiscard]] constexpr bool requires_graded_grid(MethodKind m) noexcept {
    return m == MethodKind::PIG;
}

// -----------------------------------------------------------------------------
// Special functions
// -----------------------------------------------------------------------------

/// Gamma function. glibc's tgamma is accurate to a few ulp on [0.1, 50].
[[nodiscard]] inline double gamma_fn(double x) { return std::tgamma(x); }

/// Riemann-Liouville integral of order alpha of (t - t0)^nu, evaluated at t:
/// Gamma(nu+1)/Gamma(alpha+nu+1) * (t - t0)^(alpha+nu).
[[nodiscard]] inline double rl_power_integral(double alpha, double nu, double t, double t0) {
    if (!(nu > -1.0)) {
        throw std::domain_error("rl_power_integral: exponent nu must exceed -1");
    }
    if (!(alpha > 0.0)) {
        throw std::domain_error("rl_power_integral: order alpha must be positive");
    }
    if (t < t0) {
        throw std::domain_error("rl_power_integral: t must not precede t0");
    }
    if (t == t0) return 0.0;
    return gamma_fn(nu + 1.0) / gamma_fn(alpha + nu + 1.0) * std::pow(t - t0, alpha + nu);
}

/// Orders outside (0, 2) and integer orders are not supported by the solvers.
inline void validate_order(double alpha) {
    if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 2.0) {
        throw ConfigError("fractional order alpha=" + std::to_string(alpha) +
                          " outside the supported range 0 < alpha < 2");
    }
    if (alpha == std::round(alpha)) {
        throw ConfigError("integer order alpha=" + std::to_string(alpha) +
                          " is not supported; use a classical ODE solver");
    }
}

/// Number of initial conditions, the smallest integer m with m > alpha.
[[nodiscard]] inline int initial_condition_count(double alpha) {
    return static_cast<int>(std::floor(alpha)) + 1;
}

// -----------------------------------------------------------------------------
// Problem
// -----------------------------------------------------------------------------

using VectorField = std::function<Vector(double t, const Vector& y)>;
using JacobianField = std::function<Matrix(double t, const Vector& y)>;

/// Caputo initial value problem D^alpha y = f(t, y), y^(k)(t0) = y0[k].
class FdeProblem {
public:
    FdeProblem(double alpha, double t0, double T, std::vector<Vector> y0, VectorField f,
               std::optional<JacobianField> jacobian = std::nullopt, std::string name = "custom")
        : alpha_(alpha),
          t0_(t0),
          T_(T),
          y0_(std::move(y0)),
          f_(std::move(f)),
          jacobian_(std::move(jacobian)),
          name_(std::move(name)) {
        validate_order(alpha_);
        if (!(T_ > t0_)) throw ConfigError("final time T must exceed t0");
        const auto m = static_cast<std::size_t>(initial_condition_count(alpha_));
        if (y0_.size() != m) {
            throw ConfigError("order alpha=" + std::to_string(alpha_) + " needs " +
                              std::to_string(m) + " initial vectors, got " +
                              std::to_string(y0_.size()));
        }
        if (y0_.front().size() < 1) throw ConfigError("state dimension must be at least 1");
        for (const auto& v : y0_) {
            if (v.size() != y0_.front().size()) {
                throw ConfigError("initial vectors have inconsistent dimensions");
            }
        }
        if (!f_) throw ConfigError("vector field is empty");
    }

    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] double t0() const noexcept { return t0_; }
    [[nodiscard]] double T() const noexcept { return T_; }
    [[nodiscard]] int m() const noexcept { return static_cast<int>(y0_.size()); }
    [[nodiscard]] Eigen::Index q() const noexcept { return y0_.front().size(); }
    [[nodiscard]] const std::vector<Vector>& y0() const noexcept { return y0_; }
    [[nodiscard]] const std::string& name() const noexcept { return name_; }
    [[nodiscard]] bool has_jacobian() const noexcept { return jacobian_.has_value(); }

    [[nodiscard]] Vector f(double t, const Vector& y) const { return f_(t, y); }
    [[nodiscard]] Matrix jacobian(double t, const Vector& y) const { return (*jacobian_)(t, y); }

    /// Copy with a different final time.
    [[nodiscard]] FdeProblem with_final_time(double T) const {
        FdeProblem p = *this;
        if (!(T > t0_)) throw ConfigError("final time T must exceed t0");
        p.T_ = T;
        return p;
    }

private:
    double alpha_;
    double t0_;
    double T_;
    std::vector<Vector> y0_;
    VectorField f_;
    std::optional<JacobianField> jacobian_;
    std::string name_;
};

/// T_{m-1}(t) = sum_k (t - t0)^k / k! * y0[k].
[[nodiscard]] inline Vector taylor_term(const FdeProblem& problem, double t) {
    const auto& y0 = problem.y0();
    Vector result = y0.front();
    const double dt = t - problem.t0();
    double coeff = 1.0;
    for (std::size_t k = 1; k < y0.size(); ++k) {
        coeff *= dt / static_cast<double>(k);
        result += coeff * y0[k];
    }
    return result;
}

// -----------------------------------------------------------------------------
// Grid
// -----------------------------------------------------------------------------

enum class GridKind { Uniform, Graded };

/// Node set on [t0, T]: uniform t_n = t0 + n h, or graded
/// t_n = t0 + (n/N)^r (T - t0). Nodes are computed per node from the closed
/// formula, never by accumulating steps.
class Grid {
public:
    [[nodiscard]] static Grid uniform(double t0, double T, std::size_t N) {
        check(t0, T, N);
        return Grid(GridKind::Uniform, t0, T, N, 1.0);
    }

    [[nodiscard]] static Grid graded(double t0, double T, std::size_t N, double r) {
        check(t0, T, N);
        if (!std::isfinite(r) || r < 1.0) {
            throw ConfigError("grading exponent r must be >= 1, got " + std::to_string(r));
        }
        return Grid(GridKind::Graded, t0, T, N, r);
    }

    [[nodiscard]] GridKind kind() const noexcept { return kind_; }
    [[nodiscard]] std::size_t steps() const noexcept { return N_; }
    [[nodiscard]] double t0() const noexcept { return t0_; }
    [[nodiscard]] double T() const noexcept { return T_; }
    [[nodiscard]] double grading() const noexcept { return r_; }

    /// Uniform step size, or the first step h_0 = (T - t0)/N^r of a graded grid.
    [[nodiscard]] double h() const noexcept {
        if (kind_ == GridKind::Uniform) return (T_ - t0_) / static_cast<double>(N_);
        return (T_ - t0_) / std::pow(static_cast<double>(N_), r_);
    }

    [[nodiscard]] double node(std::size_t n) const noexcept {
        if (n == 0) return t0_;
        if (n == N_) return T_;
        const double span = T_ - t0_;
        if (kind_ == GridKind::Uniform) {
            return t0_ + static_cast<double>(n) * (span / static_cast<double>(N_));
        }
        return t0_ + std::pow(static_cast<double>(n) / static_cast<double>(N_), r_) * span;
    }

    [[nodiscard]] std::vector<double> nodes() const {
        std::vector<double> t(N_ + 1);
        for (std::size_t n = 0; n <= N_; ++n) t[n] = node(n);
        return t;
    }

    [[nodiscard]] std::string describe() const {
        std::string s = kind_ == GridKind::Uniform ? "uniform" : "graded";
        s += " N=" + std::to_string(N_);
        if (kind_ == GridKind::Graded) s += " r=" + std::to_string(r_);
        return s;
    }

private:
    Grid(GridKind kind, double t0, double T, std::size_t N, double r)
        : kind_(kind), t0_(t0), T_(T), N_(N), r_(r) {}

    static void check(double t0, double T, std::size_t N) {
        if (!(T > t0)) throw ConfigError("grid requires T > t0");
        if (N < 1) throw ConfigError("grid requires at least one step");
    }

    GridKind kind_;
    double t0_;
    double T_;
    std::size_t N_;
    double r_;
};

// -----------------------------------------------------------------------------
// Solution
// -----------------------------------------------------------------------------

struct SolverStats {
    std::size_t newton_iterations = 0;
    std::size_t max_iterations_per_step = 0;
    double wall_seconds = 0.0;
    std::vector<std::string> warnings;
};

/// One implicit equation y_n = g_n + c f(t_n, y_n) as it was solved at step n.
struct ImplicitStepEquation {
    Vector g;
    double c = 0.0;
    double t = 0.0;
};

struct Solution {
    std::vector<double> times;
    std::vector<Vector> values;
    MethodKind method = MethodKind::FT;
    SolverStats stats;
    /// Filled only when SolverConfig::record_equations is set; entry n-1 is step n.
    std::vector<ImplicitStepEquation> equations;

    [[nodiscard]] const Vector& final_value() const { return values.back(); }
};

}  // namespace fde
