#pragma once

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <new>
#include <span>
#include <stdexcept>

namespace fde::fft {

/// fftw_malloc'd storage; execution with the new-array interface needs the
/// SIMD alignment the plans were made with.
template <typename T>
class AlignedBuffer {
public:
    AlignedBuffer() = default;
    explicit AlignedBuffer(std::size_t n)
        : data_(static_cast<T*>(fftw_malloc(sizeof(T) * (n == 0 ? 1 : n)))), size_(n) {
        if (data_ == nullptr) throw std::bad_alloc();
        for (std::size_t i = 0; i < size_; ++i) data_[i] = T{};
    }
    AlignedBuffer(const AlignedBuffer&) = delete;
    AlignedBuffer& operator=(const AlignedBuffer&) = delete;
    AlignedBuffer(AlignedBuffer&& other) noexcept : data_(other.data_), size_(other.size_) {
        other.data_ = nullptr;
        other.size_ = 0;
    }
    AlignedBuffer& operator=(AlignedBuffer&& other) noexcept {
        if (this != &other) {
            release();
            data_ = other.data_;
            size_ = other.size_;
            other.data_ = nullptr;
            other.size_ = 0;
        }
        return *this;
    }
    ~AlignedBuffer() { release(); }

    [[nodiscard]] T* data() noexcept { return data_; }
    [[nodiscard]] const T* data() const noexcept { return data_; }
    [[nodiscard]] std::size_t size() const noexcept { return size_; }
    T& operator[](std::size_t i) noexcept { return data_[i]; }
    const T& operator[](std::size_t i) const noexcept { return data_[i]; }
    [[nodiscard]] std::span<T> span() noexcept { return {data_, size_}; }

private:
    void release() noexcept {
        if (data_ != nullptr) fftw_free(data_);
        data_ = nullptr;
    }

    T* data_ = nullptr;
    std::size_t size_ = 0;
};

using RealBuffer = AlignedBuffer<double>;
using ComplexBuffer = AlignedBuffer<std::complex<double>>;

namespace detail {

struct PlanPair {
    fftw_plan forward = nullptr;
    fftw_plan backward = nullptr;
};

// The FFTW planner is not thread-safe; plan creation is serialized here and
// plans are kept for the lifetime of the process. Execution through the
// new-array interface is safe from any thread.
inline PlanPair plans_for(std::size_t n) {
    static std::mutex mutex;
    static std::map<std::size_t, PlanPair> cache;
    std::lock_guard lock(mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;
    RealBuffer in(n);
    ComplexBuffer out(n / 2 + 1);
    auto* cout = reinterpret_cast<fftw_complex*>(out.data());
    PlanPair p;
    p.forward = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), cout, FFTW_ESTIMATE);
    p.backward = fftw_plan_dft_c2r_1d(static_cast<int>(n), cout, in.data(), FFTW_ESTIMATE);
    if (p.forward == nullptr || p.backward == nullptr) {
        throw std::runtime_error("FFTW plan creation failed");
    }
    cache.emplace(n, p);
    return p;
}

}  // namespace detail

/// Real transform of fixed length n (unnormalized, as FFTW).
class RealFft {
public:
    explicit RealFft(std::size_t n) : n_(n), plans_(detail::plans_for(n)) {}

    [[nodiscard]] std::size_t size() const noexcept { return n_; }
    [[nodiscard]] std::size_t spectrum_size() const noexcept { return n_ / 2 + 1; }

    void forward(RealBuffer& in, ComplexBuffer& out) const {
        fftw_execute_dft_r2c(plans_.forward, in.data(),
                             reinterpret_cast<fftw_complex*>(out.data()));
    }

    /// Destroys the contents of `in` (c2r transforms overwrite their input).
    void backward(ComplexBuffer& in, RealBuffer& out) const {
        fftw_execute_dft_c2r(plans_.backward, reinterpret_cast<fftw_complex*>(in.data()),
                             out.data());
    }

private:
    std::size_t n_;
    detail::PlanPair plans_;
};

/// Smallest power of two >= n.
[[nodiscard]] constexpr std::size_t next_pow2(std::size_t n) noexcept {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

/// Flop estimate for one real transform of length n, 2.5 n log2 n.
[[nodiscard]] inline double transform_flops(std::size_t n) noexcept {
    std::size_t lg = 0;
    while ((std::size_t{1} << lg) < n) ++lg;
    return 2.5 * static_cast<double>(n) * static_cast<double>(lg);
}

}  // namespace fde::fft
