#pragma once

#include "fde/core.hpp"
#include "fde/fft.hpp"

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <span>
#include <stdexcept>
#include <vector>

namespace fde {

/// Direct lag sum  sum_{j=0}^{n-1} omega_{n-j} f_j  (no h^alpha scaling, no
/// diagonal term omega_0 f_n).
[[nodiscard]] inline Vector lag_direct(std::span<const double> omega,
                                       std::span<const Vector> history, std::size_t n) {
    if (history.size() < n) throw std::out_of_range("lag_direct: history shorter than n");
    if (omega.size() < n + 1) throw std::out_of_range("lag_direct: omega shorter than n+1");
    if (n == 0) return history.empty() ? Vector() : Vector::Zero(history.front().size());
    const Eigen::Index q = history.front().size();
    Vector out(q);
    for (Eigen::Index i = 0; i < q; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < n; ++j) acc += omega[n - j] * history[j](i);
        out(i) = acc;
    }
    return out;
}

inline constexpr std::size_t default_lag_block = 64;

/// Online evaluation of the lag sums of a discrete convolution whose inputs
/// f_0, f_1, ... arrive one at a time.
///
/// Indices 0..N are split by a binary tree with leaves of `block` entries.
/// For every internal node with children [a, a+L) and [a+L, a+2L), the
/// contribution of f over the left child to all nodes of the right child is
/// one FFT convolution of length 2L, done as soon as the left child is
/// complete and added to per-node partial sums. Pairs inside a leaf are summed
/// directly when the lag is requested. Total work is O(N log^2 N).
///
/// Capacity is N = omega.size() - 1. With N <= block everything is summed
/// directly, in the same order as lag_direct.
class LagAccumulator {
public:
    LagAccumulator(std::vector<double> omega, Eigen::Index q,
                   std::size_t block = default_lag_block)
        : omega_(std::move(omega)), q_(q), block_(block) {
        if (omega_.empty()) throw std::invalid_argument("LagAccumulator: empty weights");
        if (q_ < 1) throw std::invalid_argument("LagAccumulator: dimension must be >= 1");
        if (block_ < 1) throw std::invalid_argument("LagAccumulator: block must be >= 1");
        capacity_ = omega_.size() - 1;
        direct_only_ = capacity_ <= block_;
        history_.assign(static_cast<std::size_t>(q_), {});
        for (auto& h : history_) h.reserve(capacity_ + 1);
        if (!direct_only_) partial_.assign(static_cast<std::size_t>(q_), std::vector<double>(capacity_ + 1, 0.0));
    }

    [[nodiscard]] std::size_t size() const noexcept { return count_; }
    [[nodiscard]] std::size_t capacity() const noexcept { return capacity_; }
    [[nodiscard]] Eigen::Index dimension() const noexcept { return q_; }
    [[nodiscard]] std::size_t block() const noexcept { return block_; }

    /// Estimated floating-point work so far (transforms at 2.5 n log2 n,
    /// two flops per multiply-add).
    [[nodiscard]] double flops() const noexcept { return flops_; }
    [[nodiscard]] std::size_t transforms() const noexcept { return transforms_; }

    /// Appends f_j; `index` must equal size().
    void append(std::size_t index, const Vector& f) {
        if (index != count_) {
            throw std::logic_error("LagAccumulator: out-of-order append (expected index " +
                                   std::to_string(count_) + ", got " + std::to_string(index) + ")");
        }
        push(f);
    }

    void push(const Vector& f) {
        if (f.size() != q_) throw std::invalid_argument("LagAccumulator: dimension mismatch");
        if (count_ > capacity_) throw std::length_error("LagAccumulator: capacity exceeded");
        for (Eigen::Index i = 0; i < q_; ++i) history_[static_cast<std::size_t>(i)].push_back(f(i));
        ++count_;
        if (!direct_only_) scatter_completed_blocks();
    }

    /// sum_{j=0}^{n-1} omega_{n-j} f_j; requires f_0..f_{n-1}.
    [[nodiscard]] Vector lag(std::size_t n) {
        if (n > count_) {
            throw std::logic_error("LagAccumulator: lag(" + std::to_string(n) +
                                   ") requested before f_" + std::to_string(n - 1) + " was appended");
        }
        if (n > capacity_) throw std::out_of_range("LagAccumulator: node beyond capacity");
        Vector out(q_);
        const std::size_t start = direct_only_ ? 0 : (n / block_) * block_;
        for (Eigen::Index i = 0; i < q_; ++i) {
            const auto& h = history_[static_cast<std::size_t>(i)];
            double acc = direct_only_ ? 0.0 : partial_[static_cast<std::size_t>(i)][n];
            for (std::size_t j = start; j < n; ++j) acc += omega_[n - j] * h[j];
            out(i) = acc;
        }
        flops_ += 2.0 * static_cast<double>(n - start) * static_cast<double>(q_);
        return out;
    }

private:
    struct LevelTransform {
        std::unique_ptr<fft::RealFft> plan;
        fft::ComplexBuffer omega_hat;
    };

    void scatter_completed_blocks() {
        const std::size_t done = count_;  // f_0..f_{done-1} available
        for (std::size_t L = block_; L <= done; L *= 2) {
            if (done % L != 0) break;
            if ((done / L) % 2 == 0) continue;  // a right child just closed
            const std::size_t a = done - L;
            const std::size_t first = a + L;
            if (first > capacity_) continue;
            const std::size_t last = std::min(a + 2 * L, capacity_ + 1);  // exclusive
            add_block(a, L, last - first);
        }
    }

    // Contribution of f_a..f_{a+L-1} to nodes a+L .. a+L+T-1.
    void add_block(std::size_t a, std::size_t L, std::size_t T) {
        const double qd = static_cast<double>(q_);
        if (T < L) {
            const double direct_cost = 2.0 * static_cast<double>(L * T) * qd;
            const std::size_t M = fft::next_pow2(L + T);
            const double fft_cost = fft::transform_flops(M) * (2.0 * qd + 1.0);
            if (direct_cost <= fft_cost) {
                for (std::size_t i = 0; i < static_cast<std::size_t>(q_); ++i) {
                    const auto& h = history_[i];
                    auto& p = partial_[i];
                    for (std::size_t n = a + L; n < a + L + T; ++n) {
                        double acc = 0.0;
                        for (std::size_t j = a; j < a + L; ++j) acc += omega_[n - j] * h[j];
                        p[n] += acc;
                    }
                }
                flops_ += direct_cost;
                return;
            }
            fft::RealFft tf(M);
            fft::ComplexBuffer what(tf.spectrum_size());
            transform_weights(tf, std::min(M, L + T), what);
            convolve_block(tf, what, a, L, T);
            return;
        }
        auto& level = level_transform(L);
        convolve_block(*level.plan, level.omega_hat, a, L, T);
    }

    LevelTransform& level_transform(std::size_t L) {
        auto it = levels_.find(L);
        if (it != levels_.end()) return it->second;
        LevelTransform lt;
        lt.plan = std::make_unique<fft::RealFft>(2 * L);
        lt.omega_hat = fft::ComplexBuffer(lt.plan->spectrum_size());
        transform_weights(*lt.plan, 2 * L, lt.omega_hat);
        return levels_.emplace(L, std::move(lt)).first->second;
    }

    // FFT of omega_0..omega_{count-1}, zero padded to the transform length.
    void transform_weights(const fft::RealFft& tf, std::size_t count, fft::ComplexBuffer& out) {
        fft::RealBuffer buf(tf.size());
        const std::size_t n = std::min(count, omega_.size());
        for (std::size_t k = 0; k < n; ++k) buf[k] = omega_[k];
        tf.forward(buf, out);
        flops_ += fft::transform_flops(tf.size());
        ++transforms_;
    }

    // Circular convolution of length M >= L + T: for output k in [L, L+T) and
    // input i in [0, L), k - i lies in [1, L+T-1], so nothing wraps.
    void convolve_block(const fft::RealFft& tf, const fft::ComplexBuffer& omega_hat,
                        std::size_t a, std::size_t L, std::size_t T) {
        const std::size_t M = tf.size();
        fft::RealBuffer buf(M);
        fft::ComplexBuffer spec(tf.spectrum_size());
        const double scale = 1.0 / static_cast<double>(M);
        for (std::size_t i = 0; i < static_cast<std::size_t>(q_); ++i) {
            const auto& h = history_[i];
            for (std::size_t k = 0; k < M; ++k) buf[k] = k < L ? h[a + k] : 0.0;
            tf.forward(buf, spec);
            for (std::size_t k = 0; k < spec.size(); ++k) spec[k] *= omega_hat[k];
            tf.backward(spec, buf);
            auto& p = partial_[i];
            for (std::size_t k = L; k < L + T; ++k) p[a + k] += buf[k] * scale;
            flops_ += 2.0 * fft::transform_flops(M) + 6.0 * static_cast<double>(spec.size()) +
                      static_cast<double>(T);
            transforms_ += 2;
        }
    }

    std::vector<double> omega_;
    Eigen::Index q_;
    std::size_t block_;
    std::size_t capacity_ = 0;
    bool direct_only_ = true;
    std::size_t count_ = 0;
    std::vector<std::vector<double>> history_;  // per component
    std::vector<std::vector<double>> partial_;  // per component, per node
    std::map<std::size_t, LevelTransform> levels_;
    double flops_ = 0.0;
    std::size_t transforms_ = 0;
};

}  // namespace fde
