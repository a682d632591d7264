#pragma once

#include "fde/core.hpp"

#include <string>
#include <vector>

namespace fde {

/// D^alpha y = lambda y with y^(k)(t0) = y0[k].
[[nodiscard]] inline FdeProblem make_linear(double alpha, double lambda, double t0, double T,
                                            const std::vector<double>& y0) {
    std::vector<Vector> init;
    for (double v : y0) init.push_back(Vector::Constant(1, v));
    return FdeProblem(
        alpha, t0, T, std::move(init),
        [lambda](double, const Vector& y) -> Vector { return lambda * y; },
        JacobianField([lambda](double, const Vector&) -> Matrix {
            return Matrix::Constant(1, 1, lambda);
        }),
        "linear");
}

/// Initial values of the linear problem used in the experiments: y(t0) = 1
/// and, for alpha > 1, y'(t0) = 0.
[[nodiscard]] inline std::vector<double> default_linear_y0(double alpha) {
    std::vector<double> y0(static_cast<std::size_t>(initial_condition_count(alpha)), 0.0);
    y0[0] = 1.0;
    return y0;
}

inline constexpr double brusselator_default_x1 = 1.2;
inline constexpr double brusselator_default_x2 = 2.8;

/// Brusselator
///   D^alpha x1 = a - (mu + 1) x1 + x1^2 x2
///   D^alpha x2 = mu x1 - x1^2 x2
/// with steady state (a, mu/a). Only 0 < alpha < 1 is meaningful with a single
/// initial vector; larger orders take y'(t0) = 0.
[[nodiscard]] inline FdeProblem make_brusselator(double alpha, double a, double mu, double T,
                                                 double x1_0 = brusselator_default_x1,
                                                 double x2_0 = brusselator_default_x2,
                                                 double t0 = 0.0) {
    std::vector<Vector> init;
    init.push_back(Vector{{x1_0, x2_0}});
    const int m = initial_condition_count(alpha);
    for (int k = 1; k < m; ++k) init.push_back(Vector::Zero(2));
    return FdeProblem(
        alpha, t0, T, std::move(init),
        [a, mu](double, const Vector& y) -> Vector {
            const double x1 = y(0);
            const double x2 = y(1);
            const double c = x1 * x1 * x2;
            return Vector{{a - (mu + 1.0) * x1 + c, mu * x1 - c}};
        },
        JacobianField([mu](double, const Vector& y) -> Matrix {
            const double x1 = y(0);
            const double x2 = y(1);
            Matrix J(2, 2);
            J << -(mu + 1.0) + 2.0 * x1 * x2, x1 * x1,
                 mu - 2.0 * x1 * x2, -x1 * x1;
            return J;
        }),
        "brusselator");
}

}  // namespace fde
