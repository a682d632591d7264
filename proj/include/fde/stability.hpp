#pragma once

#include "fde/core.hpp"
#include "fde/weights.hpp"

#include <cmath>
#include <complex>
#include <iomanip>
#include <numbers>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace fde {

using Complex = std::complex<double>;

inline constexpr std::size_t default_piu_truncation = 8192;
inline constexpr double sector_tolerance = 1e-9;

namespace detail {

// Principal z^p, or nullopt when z is zero, non-finite or on the branch cut.
inline std::optional<Complex> principal_power(Complex z, double p) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) return std::nullopt;
    if (z == Complex(0.0, 0.0)) return std::nullopt;
    if (std::abs(std::arg(z)) >= std::numbers::pi - 1e-12) return std::nullopt;
    return std::pow(z, p);
}

inline bool finite(Complex z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); }

}  // namespace detail

/// omega_alpha(xi) of one of the convolution rules. FT, NG and FBDF are in
/// closed form; PIU is
///   omega(xi) = (1 - xi)^(-alpha) C(xi),  C = (1 - xi)^alpha * sum b_tilde_n/Gamma(alpha+2) xi^n,
/// with C truncated after `truncation` terms. C has summable coefficients, so
/// the truncated form is accurate on |xi| = 1 where the raw series is not.
/// Integer orders are accepted for the classical limits.
class GeneratingFunction {
public:
    GeneratingFunction(MethodKind method, double alpha,
                       std::size_t truncation = default_piu_truncation)
        : method_(method), alpha_(alpha), truncation_(truncation) {
        detail::check_weight_order(alpha);
        if (method == MethodKind::PIG) {
            throw ConfigError("PIG has no convolution structure; stability analysis not applicable");
        }
        if (method == MethodKind::PIU) {
            if (truncation_ < 1) throw ConfigError("PIU truncation must be >= 1");
            const auto omega = piu_convolution_weights(alpha, truncation_);
            const auto damp = binomial_weights(-1, alpha, truncation_);
            coeffs_ = fps_product(omega.omega, damp, truncation_);
        }
    }

    [[nodiscard]] MethodKind method() const noexcept { return method_; }
    [[nodiscard]] double alpha() const noexcept { return alpha_; }
    [[nodiscard]] std::size_t truncation() const noexcept { return truncation_; }

    /// omega_alpha(xi); nullopt where it is infinite or off the principal branch.
    [[nodiscard]] std::optional<Complex> value(Complex xi) const {
        const double a = alpha_;
        const Complex one(1.0, 0.0);
        switch (method_) {
            case MethodKind::FT: {
                auto p = detail::principal_power(one + xi, a);
                auto q = detail::principal_power(one - xi, -a);
                if (!p || !q) return std::nullopt;
                return checked(std::pow(2.0, -a) * *p * *q);
            }
            case MethodKind::NG: {
                auto q = detail::principal_power(one - xi, -a);
                if (!q) return std::nullopt;
                return checked((one - 0.5 * a * (one - xi)) * *q);
            }
            case MethodKind::FBDF: {
                auto p = detail::principal_power(one - xi, -a);
                auto q = detail::principal_power(one - xi / 3.0, -a);
                if (!p || !q) return std::nullopt;
                return checked(std::pow(2.0 / 3.0, a) * *p * *q);
            }
            case MethodKind::PIU: {
                auto q = detail::principal_power(one - xi, -a);
                if (!q) return std::nullopt;
                return checked(series(xi) * *q);
            }
            case MethodKind::PIG: break;
        }
        return std::nullopt;
    }

    /// 1/omega_alpha(xi), each factor powered separately so the result is
    /// finite at the zeros of omega.
    [[nodiscard]] std::optional<Complex> reciprocal(Complex xi) const {
        const double a = alpha_;
        const Complex one(1.0, 0.0);
        switch (method_) {
            case MethodKind::FT: {
                auto p = detail::principal_power(one - xi, a);
                auto q = detail::principal_power(one + xi, -a);
                if (!p || !q) return std::nullopt;
                return checked(std::pow(2.0, a) * *p * *q);
            }
            case MethodKind::NG: {
                auto p = detail::principal_power(one - xi, a);
                if (!p) return std::nullopt;
                return checked(*p / (one - 0.5 * a * (one - xi)));
            }
            case MethodKind::FBDF: {
                auto p = detail::principal_power(one - xi, a);
                auto q = detail::principal_power(one - xi / 3.0, a);
                if (!p || !q) return std::nullopt;
                return checked(std::pow(1.5, a) * *p * *q);
            }
            case MethodKind::PIU: {
                auto p = detail::principal_power(one - xi, a);
                if (!p) return std::nullopt;
                return checked(*p / series(xi));
            }
            case MethodKind::PIG: break;
        }
        return std::nullopt;
    }

private:
    [[nodiscard]] Complex series(Complex xi) const {
        Complex acc(0.0, 0.0);
        for (std::size_t n = coeffs_.size(); n-- > 0;) acc = acc * xi + coeffs_[n];
        return acc;
    }

    static std::optional<Complex> checked(Complex z) {
        if (!detail::finite(z)) return std::nullopt;
        return z;
    }

    MethodKind method_;
    double alpha_;
    std::size_t truncation_;
    std::vector<double> coeffs_;
};

/// lambda in Sigma_alpha = { |arg lambda| > alpha pi/2 }; the origin is excluded.
[[nodiscard]] inline bool sector_contains(Complex lambda, double alpha) {
    if (!(alpha > 0.0)) throw std::domain_error("sector_contains: alpha must be positive");
    if (lambda == Complex(0.0, 0.0)) return false;
    return std::abs(std::arg(lambda)) > alpha * std::numbers::pi / 2.0;
}

struct StabilityBoundary {
    std::vector<double> theta;
    std::vector<Complex> points;
    double alpha = 0.0;
    MethodKind method = MethodKind::FT;
    bool sector_included = false;
    /// Angles at which the evaluator was not finite (sample dropped).
    std::vector<double> dropped;
};

namespace detail {

inline bool strictly_inside_sector(Complex z, double alpha) {
    if (z == Complex(0.0, 0.0)) return false;
    return std::abs(std::arg(z)) > alpha * std::numbers::pi / 2.0 + sector_tolerance;
}

inline void check_samples(std::size_t n_theta) {
    if (n_theta < 64) throw ConfigError("stability sampling needs n_theta >= 64");
}

}  // namespace detail

/// Samples 1/omega_alpha(e^{i theta_k}), theta_k = 2 pi k/n_theta, k = 1..n_theta-1.
[[nodiscard]] inline StabilityBoundary boundary_locus(const GeneratingFunction& gf,
                                                      std::size_t n_theta) {
    detail::check_samples(n_theta);
    StabilityBoundary out;
    out.alpha = gf.alpha();
    out.method = gf.method();
    out.sector_included = true;
    for (std::size_t k = 1; k < n_theta; ++k) {
        const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_theta);
        const auto z = gf.reciprocal(std::polar(1.0, th));
        if (!z) {
            out.dropped.push_back(th);
            continue;
        }
        out.theta.push_back(th);
        out.points.push_back(*z);
        if (detail::strictly_inside_sector(*z, out.alpha)) out.sector_included = false;
    }
    return out;
}

/// Sigma_alpha contained in the stability region: no sampled image point
/// 1/omega(xi) lies strictly inside the sector. n_grid > 0 adds radial samples
/// xi = (j/n_grid) e^{i theta}, j = 0..n_grid-1, of the open disk.
[[nodiscard]] inline bool a_alpha_stable(const GeneratingFunction& gf, std::size_t n_theta,
                                         std::size_t n_grid = 0) {
    if (!boundary_locus(gf, n_theta).sector_included) return false;
    for (std::size_t j = 0; j < n_grid; ++j) {
        const double r = static_cast<double>(j) / static_cast<double>(n_grid);
        for (std::size_t k = 0; k < n_theta; ++k) {
            const double th = 2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n_theta);
            const auto z = gf.reciprocal(std::polar(r, th));
            if (z && detail::strictly_inside_sector(*z, gf.alpha())) return false;
            if (j == 0) break;
        }
    }
    return true;
}

/// Locus as CSV: three comment lines, then theta,re,im at 17 significant digits.
inline void write_boundary_csv(std::ostream& os, const StabilityBoundary& b) {
    os << "# method=" << to_string(b.method) << '\n';
    os << "# alpha=" << std::setprecision(17) << b.alpha << '\n';
    os << "# sector_included=" << (b.sector_included ? "true" : "false") << '\n';
    os << "theta,re,im\n";
    for (std::size_t k = 0; k < b.points.size(); ++k) {
        os << b.theta[k] << ',' << b.points[k].real() << ',' << b.points[k].imag() << '\n';
    }
}

}  // namespace fde
