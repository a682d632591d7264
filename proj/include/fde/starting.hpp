#pragma once

#include "fde/core.hpp"
#include "fde/fastconv.hpp"
#include "fde/weights.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>
#include <vector>

namespace fde {

/// Exponents nu of the monomials (t - t0)^nu the quadrature must integrate
/// exactly: {i + j alpha < 1} together with 1, sorted and de-duplicated.
struct ExponentSet {
    std::vector<double> exponents;

    [[nodiscard]] std::size_t size() const noexcept { return exponents.size(); }
    /// Index of the last starting weight, s = |E| - 1.
    [[nodiscard]] std::size_t s() const noexcept { return exponents.size() - 1; }
    [[nodiscard]] double operator[](std::size_t k) const noexcept { return exponents[k]; }
};

inline constexpr double minimum_starting_order = 0.05;

[[nodiscard]] inline ExponentSet exponent_set(double alpha) {
    validate_order(alpha);
    if (alpha < minimum_starting_order) {
        throw ConfigError("alpha=" + std::to_string(alpha) +
                          " below 0.05: the starting-weight system would be ill-conditioned");
    }
    std::vector<double> nu;
    // i >= 1 already gives nu >= 1, so only i = 0 contributes below 1.
    for (int j = 0;; ++j) {
        const double v = j * alpha;
        if (v >= 1.0) break;
        nu.push_back(v);
    }
    nu.push_back(1.0);
    std::sort(nu.begin(), nu.end());
    std::vector<double> unique;
    for (double v : nu) {
        if (unique.empty() || std::abs(v - unique.back()) > 1e-12) {
            unique.push_back(v);
        } else {
            unique.back() = std::max(unique.back(), v);
        }
    }
    return {std::move(unique)};
}

/// Correction weights w_{n,0..s} of step n.
struct StartingWeights {
    std::size_t n = 0;
    std::vector<double> w;
};

namespace detail {

// j^nu with 0^0 = 1 and 0^nu = 0 for nu > 0
inline double monomial(std::size_t j, double nu) {
    if (j == 0) return nu == 0.0 ? 1.0 : 0.0;
    if (nu == 0.0) return 1.0;
    if (nu == 1.0) return static_cast<double>(j);
    return std::pow(static_cast<double>(j), nu);
}

inline Matrix starting_matrix(const ExponentSet& E) {
    const auto size = static_cast<Eigen::Index>(E.size());
    Matrix V(size, size);
    for (Eigen::Index k = 0; k < size; ++k) {
        for (Eigen::Index j = 0; j < size; ++j) {
            V(k, j) = monomial(static_cast<std::size_t>(j), E[static_cast<std::size_t>(k)]);
        }
    }
    return V;
}

inline double condition_number(const Matrix& V) {
    Eigen::JacobiSVD<Matrix> svd(V);
    const auto& sv = svd.singularValues();
    const double smin = sv(sv.size() - 1);
    if (smin == 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / smin;
}

}  // namespace detail

inline constexpr double starting_condition_warning = 1e8;
inline constexpr double starting_condition_limit = 1e12;

/// Starting weights for every step 1..N of one FLMM run.
///
/// The matrix V[k][j] = j^{nu_k} depends only on the exponent set, so it is
/// factored once. The right-hand sides
///   -sum_{j=0}^n omega_{n-j} j^nu + Gamma(nu+1)/Gamma(1+nu+alpha) n^(nu+alpha)
/// come from running sums for nu = 0 and nu = 1 and from blocked FFT lag sums
/// for the non-integer exponents.
class StartingWeightTable {
public:
    StartingWeightTable(const ConvolutionWeights& omega, const ExponentSet& E, std::size_t N)
        : E_(E), N_(N), V_(detail::starting_matrix(E)) {
        if (omega.size() < N + 1) throw ConfigError("starting weights: omega shorter than N+1");
        condition_ = detail::condition_number(V_);
        if (!(condition_ <= starting_condition_limit)) {
            std::ostringstream os;
            os << "starting-weight matrix singular or ill-conditioned (cond " << condition_
               << ") for alpha=" << omega.alpha;
            throw ConfigError(os.str());
        }
        if (condition_ > starting_condition_warning) {
            std::ostringstream os;
            os << "starting-weight matrix condition " << condition_ << " for alpha=" << omega.alpha;
            warnings_.push_back(os.str());
        }
        lu_ = Eigen::PartialPivLU<Matrix>(V_);

        const double alpha = omega.alpha;
        const std::size_t ns = E.size();
        rhs_.assign(ns, std::vector<double>(N + 1, 0.0));
        for (std::size_t k = 0; k < ns; ++k) {
            const double nu = E[k];
            auto& conv = rhs_[k];
            if (nu == 0.0) {
                double s0 = 0.0;
                for (std::size_t n = 0; n <= N; ++n) {
                    s0 += omega[n];
                    conv[n] = s0;
                }
            } else if (nu == 1.0) {
                // sum_j omega_{n-j} j = n S0(n) - S1(n), S1 = sum_k k omega_k
                double s0 = 0.0;
                double s1 = 0.0;
                for (std::size_t n = 0; n <= N; ++n) {
                    s0 += omega[n];
                    s1 += static_cast<double>(n) * omega[n];
                    conv[n] = static_cast<double>(n) * s0 - s1;
                }
            } else {
                // Blocked FFT lag sums: rounding stays relative to the partial sums
                // themselves, which a single full-length product would not give.
                LagAccumulator acc(std::vector<double>(omega.omega.begin(), omega.omega.begin() + static_cast<std::ptrdiff_t>(N + 1)), 1);
                for (std::size_t n = 0; n <= N; ++n) {
                    const double mono = detail::monomial(n, nu);
                    conv[n] = acc.lag(n)(0) + omega[0] * mono;
                    if (n < N) acc.push(Vector::Constant(1, mono));
                }
            }
            const double g = gamma_fn(nu + 1.0) / gamma_fn(1.0 + nu + alpha);
            for (std::size_t n = 0; n <= N; ++n) {
                conv[n] = -conv[n] + g * std::pow(static_cast<double>(n), nu + alpha);
            }
        }
    }

    [[nodiscard]] const ExponentSet& exponents() const noexcept { return E_; }
    [[nodiscard]] std::size_t steps() const noexcept { return N_; }
    [[nodiscard]] std::size_t s() const noexcept { return E_.s(); }
    [[nodiscard]] double condition() const noexcept { return condition_; }
    [[nodiscard]] const std::vector<std::string>& warnings() const noexcept { return warnings_; }

    [[nodiscard]] StartingWeights at(std::size_t n) const {
        if (n < 1 || n > N_) throw std::out_of_range("starting weights: step out of range");
        Vector b(static_cast<Eigen::Index>(E_.size()));
        for (std::size_t k = 0; k < E_.size(); ++k) b(static_cast<Eigen::Index>(k)) = rhs_[k][n];
        const Vector w = lu_.solve(b);
        return {n, std::vector<double>(w.data(), w.data() + w.size())};
    }

private:
    ExponentSet E_;
    std::size_t N_;
    Matrix V_;
    Eigen::PartialPivLU<Matrix> lu_;
    double condition_ = 1.0;
    std::vector<std::vector<double>> rhs_;
    std::vector<std::string> warnings_;
};

/// Starting weights of a single step, with the right-hand side summed
/// directly in O(n). Reference path for the table above.
[[nodiscard]] inline StartingWeights starting_weights(const ConvolutionWeights& omega,
                                                      double alpha, std::size_t n,
                                                      const ExponentSet& E) {
    if (n < 1) throw ConfigError("starting weights: n must be >= 1");
    if (omega.size() < n + 1) throw ConfigError("starting weights: omega shorter than n+1");
    const Matrix V = detail::starting_matrix(E);
    const double cond = detail::condition_number(V);
    if (!(cond <= starting_condition_limit)) {
        throw ConfigError("starting-weight matrix ill-conditioned for alpha=" +
                          std::to_string(alpha));
    }
    Vector b(static_cast<Eigen::Index>(E.size()));
    for (std::size_t k = 0; k < E.size(); ++k) {
        const double nu = E[k];
        double conv = 0.0;
        for (std::size_t j = 0; j <= n; ++j) conv += omega[n - j] * detail::monomial(j, nu);
        b(static_cast<Eigen::Index>(k)) =
            -conv + gamma_fn(nu + 1.0) / gamma_fn(1.0 + nu + alpha) *
                        std::pow(static_cast<double>(n), nu + alpha);
    }
    const Vector w = V.partialPivLu().solve(b);
    return {n, std::vector<double>(w.data(), w.data() + w.size())};
}

}  // namespace fde
