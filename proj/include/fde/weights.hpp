#pragma once

#include "fde/core.hpp"
#include "fde/fft.hpp"

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <vector>

namespace fde {

/// Truncated formal power series: coefficient k multiplies xi^k.
using Series = std::vector<double>;

/// Size at which fps_product switches from the direct Cauchy product to FFT.
inline constexpr std::size_t fft_product_threshold = 128;

// -----------------------------------------------------------------------------
// Formal power series
// -----------------------------------------------------------------------------

/// First N+1 coefficients of phi(xi)^beta for phi = sum a_k xi^k with a_0 = 1
/// (J.C.P. Miller recursion). Coefficients of `a` past its length are zero, so
/// the cost is O(N * min(N, deg a)).
[[nodiscard]] inline Series miller_power(std::span<const double> a, double beta, std::size_t N) {
    if (a.empty() || a[0] != 1.0) {
        throw std::invalid_argument("miller_power: leading coefficient must be exactly 1");
    }
    Series v(N + 1, 0.0);
    v[0] = 1.0;
    const std::size_t deg = a.size() - 1;
    for (std::size_t n = 1; n <= N; ++n) {
        double s = 0.0;
        const std::size_t jmax = std::min(n, deg);
        for (std::size_t j = 1; j <= jmax; ++j) {
            s += ((beta + 1.0) * static_cast<double>(j) / static_cast<double>(n) - 1.0) * a[j] *
                 v[n - j];
        }
        v[n] = s;
    }
    return v;
}

/// Coefficients of (1 + sign*xi)^beta by the two-term recursion; this is
/// miller_power on [1, sign] with the single-term sum written out.
[[nodiscard]] inline Series binomial_weights(int sign, double beta, std::size_t N) {
    if (sign != 1 && sign != -1) throw std::invalid_argument("binomial_weights: sign must be +-1");
    const double a1 = static_cast<double>(sign);
    Series w(N + 1, 0.0);
    w[0] = 1.0;
    for (std::size_t n = 1; n <= N; ++n) {
        w[n] = ((beta + 1.0) * 1.0 / static_cast<double>(n) - 1.0) * a1 * w[n - 1];
    }
    return w;
}

namespace detail {

inline Series direct_product(std::span<const double> u, std::span<const double> v,
                             std::size_t N) {
    Series out(N + 1, 0.0);
    for (std::size_t n = 0; n <= N; ++n) {
        double s = 0.0;
        const std::size_t imax = std::min(n, u.size() - 1);
        for (std::size_t i = 0; i <= imax; ++i) {
            const std::size_t k = n - i;
            if (k < v.size()) s += u[i] * v[k];
        }
        out[n] = s;
    }
    return out;
}

inline Series fft_product(std::span<const double> u, std::span<const double> v, std::size_t N) {
    const std::size_t nu = std::min(u.size(), N + 1);
    const std::size_t nv = std::min(v.size(), N + 1);
    // Linear convolution length nu+nv-1; padding to that avoids circular wrap.
    const std::size_t len = fft::next_pow2(std::max<std::size_t>(nu + nv - 1, 2));
    fft::RealFft tf(len);
    fft::RealBuffer ru(len), rv(len);
    for (std::size_t i = 0; i < nu; ++i) ru[i] = u[i];
    for (std::size_t i = 0; i < nv; ++i) rv[i] = v[i];
    fft::ComplexBuffer su(tf.spectrum_size()), sv(tf.spectrum_size());
    tf.forward(ru, su);
    tf.forward(rv, sv);
    for (std::size_t k = 0; k < su.size(); ++k) su[k] *= sv[k];
    tf.backward(su, ru);
    Series out(N + 1, 0.0);
    const double scale = 1.0 / static_cast<double>(len);
    const std::size_t ncopy = std::min(N + 1, nu + nv - 1);
    for (std::size_t i = 0; i < ncopy; ++i) out[i] = ru[i] * scale;
    return out;
}

}  // namespace detail

/// Cauchy product u*v truncated to N+1 terms. Direct O(N^2) below
/// fft_product_threshold, zero-padded FFT above.
[[nodiscard]] inline Series fps_product(std::span<const double> u, std::span<const double> v,
                                        std::size_t N) {
    if (u.empty() || v.empty()) throw std::invalid_argument("fps_product: empty operand");
    if (N < fft_product_threshold) return detail::direct_product(u, v, N);
    return detail::fft_product(u, v, N);
}

// -----------------------------------------------------------------------------
// Convolution weights of the fractional multistep methods
// -----------------------------------------------------------------------------

/// omega_0..omega_N of one method at one order.
struct ConvolutionWeights {
    std::vector<double> omega;
    double alpha = 0.0;
    MethodKind method = MethodKind::FT;

    [[nodiscard]] std::size_t size() const noexcept { return omega.size(); }
    [[nodiscard]] double operator[](std::size_t n) const noexcept { return omega[n]; }
};

namespace detail {

// Weight generators accept any 0 < alpha < 2; integer orders are allowed here
// so the classical limits can be checked.
inline void check_weight_order(double alpha) {
    if (!std::isfinite(alpha) || alpha <= 0.0 || alpha >= 2.0) {
        throw ConfigError("weights: order must satisfy 0 < alpha < 2");
    }
}

}  // namespace detail

/// Fractional trapezoidal rule: ((1+xi)/(2(1-xi)))^alpha.
[[nodiscard]] inline ConvolutionWeights ft_weights(double alpha, std::size_t N) {
    detail::check_weight_order(alpha);
    const Series up = binomial_weights(+1, alpha, N);
    const Series down = binomial_weights(-1, -alpha, N);
    Series w = fps_product(up, down, N);
    const double scale = std::pow(2.0, -alpha);
    for (auto& x : w) x *= scale;
    return {std::move(w), alpha, MethodKind::FT};
}

/// Newton-Gregory formula: (1 - (alpha/2)(1-xi)) (1-xi)^(-alpha).
[[nodiscard]] inline ConvolutionWeights ng_weights(double alpha, std::size_t N) {
    detail::check_weight_order(alpha);
    const Series b = binomial_weights(-1, -alpha, N);
    Series w(N + 1);
    const double c0 = 1.0 - alpha / 2.0;
    const double c1 = alpha / 2.0;
    w[0] = c0;
    for (std::size_t n = 1; n <= N; ++n) w[n] = c0 * b[n] + c1 * b[n - 1];
    return {std::move(w), alpha, MethodKind::NG};
}

namespace detail {

/// The three-term recursion for (1 - 4xi/3 + xi^2/3)^(-alpha) with the
/// coefficients as commonly printed (4/3 on both terms). It departs from the
/// Miller expansion from n = 2 on; kept for comparison only.
inline Series fbdf_recursion_as_printed(double alpha, std::size_t N) {
    Series t(N + 1, 0.0);
    t[0] = 1.0;
    if (N >= 1) t[1] = 4.0 / 3.0 * alpha * t[0];
    for (std::size_t n = 2; n <= N; ++n) {
        const double dn = static_cast<double>(n);
        t[n] = 4.0 / 3.0 * (1.0 + (alpha - 1.0) / dn) * t[n - 1] +
               4.0 / 3.0 * (2.0 * (1.0 - alpha) / dn - 1.0) * t[n - 2];
    }
    return t;
}

inline constexpr std::array<double, 3> bdf2_denominator = {1.0, -4.0 / 3.0, 1.0 / 3.0};

}  // namespace detail

/// Fractional BDF2: (2/(3(1 - 4xi/3 + xi^2/3)))^alpha. The Miller expansion of
/// the quadratic denominator is authoritative and costs O(N).
[[nodiscard]] inline ConvolutionWeights fbdf_weights(double alpha, std::size_t N) {
    detail::check_weight_order(alpha);
    Series w = miller_power(detail::bdf2_denominator, -alpha, N);
    const double scale = std::pow(2.0 / 3.0, alpha);
    for (auto& x : w) x *= scale;
    return {std::move(w), alpha, MethodKind::FBDF};
}

[[nodiscard]] inline ConvolutionWeights flmm_weights(MethodKind method, double alpha,
                                                     std::size_t N) {
    switch (method) {
        case MethodKind::FT: return ft_weights(alpha, N);
        case MethodKind::NG: return ng_weights(alpha, N);
        case MethodKind::FBDF: return fbdf_weights(alpha, N);
        default: break;
    }
    throw ConfigError("flmm_weights: " + std::string(to_string(method)) +
                      " is not a fractional linear multistep method");
}

// -----------------------------------------------------------------------------
// Product-integration trapezoidal weights
// -----------------------------------------------------------------------------

namespace detail {

// Below this index the closed forms are evaluated as written; above it the
// binomial series in 1/n avoids the cancellation between large powers.
inline constexpr std::size_t pi_series_switch = 4;

/// sum_{k >= kmin} C(p, k) x^k, with |x| small.
inline double binomial_tail(double p, double x, int kmin) {
    double coef = 1.0;  // C(p, 0)
    double xp = 1.0;
    for (int k = 1; k < kmin; ++k) {
        coef *= (p - (k - 1)) / k;
        xp *= x;
    }
    double sum = 0.0;
    for (int k = kmin; k < 200; ++k) {
        coef *= (p - (k - 1)) / k;
        xp *= x;
        const double term = coef * xp;
        sum += term;
        if (term == 0.0 || std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return sum;
}

/// (n-1)^p - 2 n^p + (n+1)^p
inline double second_difference_power(double p, std::size_t n) {
    const double dn = static_cast<double>(n);
    if (n < pi_series_switch) {
        return std::pow(dn - 1.0, p) - 2.0 * std::pow(dn, p) + std::pow(dn + 1.0, p);
    }
    // (1+x)^p + (1-x)^p - 2 = 2 sum_k C(p, 2k) x^(2k)
    const double x = 1.0 / dn;
    double coef = 1.0;
    double x2k = 1.0;
    double sum = 0.0;
    for (int k = 1; k < 100; ++k) {
        coef *= (p - (2 * k - 2)) * (p - (2 * k - 1)) / ((2.0 * k - 1.0) * (2.0 * k));
        x2k *= x * x;
        const double term = coef * x2k;
        sum += term;
        if (term == 0.0 || std::abs(term) <= 1e-18 * std::abs(sum)) break;
    }
    return 2.0 * sum * std::pow(dn, p);
}

}  // namespace detail

/// Uniform-grid PI trapezoidal rule,
///   y_n = T(t_n) + h^alpha/Gamma(alpha+2) (w_tilde[n] f_0 + sum_{j=1}^n b_tilde[n-j] f_j).
/// Index 0 of w_tilde is unused and set to zero.
struct PiUniformWeights {
    std::vector<double> w_tilde;
    std::vector<double> b_tilde;
    double alpha = 0.0;
};

[[nodiscard]] inline PiUniformWeights pi_uniform_weights(double alpha, std::size_t N) {
    detail::check_weight_order(alpha);
    if (N < 1) throw ConfigError("pi_uniform_weights: N must be >= 1");
    const double p = alpha + 1.0;
    PiUniformWeights out;
    out.alpha = alpha;
    out.w_tilde.assign(N + 1, 0.0);
    out.b_tilde.assign(N + 1, 0.0);
    out.b_tilde[0] = 1.0;
    for (std::size_t n = 1; n <= N; ++n) {
        const double dn = static_cast<double>(n);
        out.b_tilde[n] = detail::second_difference_power(p, n);
        if (n < detail::pi_series_switch) {
            out.w_tilde[n] = (p - dn) * std::pow(dn, alpha) + std::pow(dn - 1.0, p);
        } else {
            // n^p [(1 - 1/n)^p - 1 + p/n]
            out.w_tilde[n] = std::pow(dn, p) * detail::binomial_tail(p, -1.0 / dn, 2);
        }
    }
    return out;
}

/// One row of the graded-grid PI rule,
///   y_n = T(t_n) + scale (w_hat f_0 + sum_{j=1}^n b_hat[j-1] f_j),
/// with scale = h_0^alpha/Gamma(alpha+2).
struct PiGradedRow {
    double w_hat = 0.0;
    std::vector<double> b_hat;  // b_hat[j-1] = b_{n,j}, j = 1..n
    double scale = 1.0;
};

/// Row generator for a fixed (alpha, r). Caches j^r and the scaled step
/// lengths d_j = j^r - (j-1)^r so a row costs O(n).
class PiGradedWeights {
public:
    PiGradedWeights(double alpha, double r, std::size_t max_index, double h0 = 1.0)
        : alpha_(alpha), r_(r), p_(alpha + 1.0), h0_(h0) {
        detail::check_weight_order(alpha);
        if (!(r >= 1.0)) throw ConfigError("graded PI weights need r >= 1");
        pow_r_.resize(max_index + 2);
        step_.resize(max_index + 2);
        for (std::size_t j = 0; j < pow_r_.size(); ++j) {
            pow_r_[j] = std::pow(static_cast<double>(j), r_);
        }
        step_[0] = 0.0;
        for (std::size_t j = 1; j < step_.size(); ++j) {
            // j^r - (j-1)^r = j^r (1 - (1 - 1/j)^r)
            step_[j] = j == 1 ? 1.0
                              : -pow_r_[j] * std::expm1(r_ * std::log1p(-1.0 / static_cast<double>(j)));
        }
        scale_ = std::pow(h0_, alpha_) / gamma_fn(alpha_ + 2.0);
    }

    [[nodiscard]] double scale() const noexcept { return scale_; }
    [[nodiscard]] std::size_t max_index() const noexcept { return pow_r_.size() - 2; }

    /// w_hat_n = (n^r - 1)^(a+1) - n^(r a) (n^r - a - 1)
    [[nodiscard]] double w_hat(std::size_t n) const {
        const double nr = pow_r_.at(n);
        const double x = 1.0 / nr;
        if (x > 0.25) {
            return std::pow(nr - 1.0, p_) - std::pow(nr, alpha_) * (nr - p_);
        }
        // n^(r p) [(1 - x)^p - 1 + p x]
        return std::pow(nr, p_) * detail::binomial_tail(p_, -x, 2);
    }

    /// Fills b[j-1] = b_{n,j} for j = 1..n. Each weight is a (a+1) times the
    /// two hat-function integrals, both with positive integrands.
    void fill_row(std::size_t n, std::vector<double>& b) const {
        if (n < 1 || n > max_index()) throw std::out_of_range("PiGradedWeights: row index");
        b.resize(n);
        const double nr = pow_r_[n];
        const double ap = alpha_ * p_;
        for (std::size_t j = 1; j <= n; ++j) {
            double acc = rising(nr - pow_r_[j - 1], nr - pow_r_[j], step_[j]);
            if (j < n) acc += falling(nr - pow_r_[j], nr - pow_r_[j + 1], step_[j + 1]);
            b[j - 1] = ap * acc;
        }
    }

    [[nodiscard]] PiGradedRow row(std::size_t n) const {
        PiGradedRow out;
        out.w_hat = w_hat(n);
        fill_row(n, out.b_hat);
        out.scale = scale_;
        return out;
    }

private:
    // (1/d) int_0^d (A - v)^(a-1) v dv with B = A - d: the rising half of a hat.
    [[nodiscard]] double rising(double A, double B, double d) const {
        const double x = d / A;
        if (x > 0.5) {
            return (A * (std::pow(A, alpha_) - std::pow(B, alpha_)) / alpha_ -
                    (std::pow(A, p_) - std::pow(B, p_)) / p_) / d;
        }
        return std::pow(A, alpha_ - 1.0) * d * hat_series(x, 1);
    }

    // (1/d) int_0^d (A - v)^(a-1) (d - v) dv, the falling half.
    [[nodiscard]] double falling(double A, double B, double d) const {
        const double x = d / A;
        if (x > 0.5) {
            return ((std::pow(A, p_) - std::pow(B, p_)) / p_ -
                    B * (std::pow(A, alpha_) - std::pow(B, alpha_)) / alpha_) / d;
        }
        return std::pow(A, alpha_ - 1.0) * d * hat_series(x, 0);
    }

    // sum_k C(a-1, k) (-x)^k c_k with c_k = 1/(k+2) (kind 1) or 1/((k+1)(k+2)) (kind 0).
    [[nodiscard]] double hat_series(double x, int kind) const {
        double coef = 1.0;
        double xp = 1.0;
        double sum = 0.5;
        for (int k = 1; k < 200; ++k) {
            coef *= (alpha_ - 1.0 - (k - 1)) / k;
            xp *= -x;
            const double c = kind == 1 ? 1.0 / (k + 2) : 1.0 / ((k + 1.0) * (k + 2.0));
            const double term = coef * xp * c;
            sum += term;
            if (std::abs(term) <= 1e-18 * std::abs(sum)) break;
        }
        return sum;
    }

    double alpha_;
    double r_;
    double p_;
    double h0_;
    double scale_ = 1.0;
    std::vector<double> pow_r_;
    std::vector<double> step_;
};

[[nodiscard]] inline PiGradedRow pi_graded_row(double alpha, double r, std::size_t n,
                                               double h0 = 1.0) {
    if (n < 1) throw ConfigError("pi_graded_row: n must be >= 1");
    return PiGradedWeights(alpha, r, n, h0).row(n);
}

/// Convolution weights of the uniform PI rule seen as a quadrature,
/// omega_n = b_tilde_n / Gamma(alpha+2). Used by the stability analysis.
[[nodiscard]] inline ConvolutionWeights piu_convolution_weights(double alpha, std::size_t N) {
    auto w = pi_uniform_weights(alpha, std::max<std::size_t>(N, 1));
    const double scale = 1.0 / gamma_fn(alpha + 2.0);
    std::vector<double> omega(N + 1);
    for (std::size_t n = 0; n <= N; ++n) omega[n] = w.b_tilde[n] * scale;
    return {std::move(omega), alpha, MethodKind::PIU};
}

}  // namespace fde
