#pragma once

#include "timeemb/array.hpp"

#include <complex>
#include <cstddef>
#include <memory>
#include <span>
#include <vector>

namespace timeemb {

using cplx = std::complex<double>;

/// Complex FFT of arbitrary length. Lengths whose prime factors are all small
/// use a recursive mixed-radix decimation in time; anything else goes through
/// Bluestein's chirp-z reformulation on a power-of-two grid.
class FftPlan {
public:
    explicit FftPlan(std::size_t n);
    ~FftPlan();
    FftPlan(FftPlan&&) noexcept;
    FftPlan& operator=(FftPlan&&) noexcept;

    std::size_t size() const noexcept { return n_; }
    bool uses_bluestein() const noexcept { return bluestein_ != nullptr; }

    // Unnormalized: forward uses e^{-j2πkn/N}, backward e^{+j2πkn/N}.
    void forward(std::span<cplx> data) const;
    void backward(std::span<cplx> data) const;

private:
    struct Bluestein;

    void transform(std::span<cplx> data, bool inverse) const;
    void recurse(const cplx* in, cplx* out, std::size_t n, std::size_t stride,
                 std::size_t factor_idx, bool inverse) const;

    std::size_t n_ = 0;
    std::vector<std::size_t> factors_;
    std::vector<cplx> twiddle_;  // e^{-j2πk/n}, k < n
    std::unique_ptr<Bluestein> bluestein_;
    mutable std::vector<cplx> scratch_;
};

/// Real-input transform of length L producing F = L/2 + 1 bins.
class RealFft {
public:
    explicit RealFft(std::size_t length);

    std::size_t length() const noexcept { return length_; }
    std::size_t bins() const noexcept { return length_ / 2 + 1; }
    bool has_nyquist() const noexcept { return length_ % 2 == 0; }

    // bins[k] = Σ_n x[n] e^{-j2πkn/L}. DC and Nyquist imaginary parts are
    // written as exact zeros.
    void forward(std::span<const double> x, std::span<double> re, std::span<double> im) const;
    // x[n] = (1/L) Σ over the Hermitian extension of (re, im). Imaginary
    // parts of DC and Nyquist are ignored.
    void inverse(std::span<const double> re, std::span<const double> im, std::span<double> x) const;

private:
    std::size_t length_;
    FftPlan plan_;
    mutable std::vector<cplx> buffer_;
};

// Process-wide plan cache, one RealFft per (thread, length).
const RealFft& real_fft(std::size_t length);

/// Per-channel spectrum of an L×D window.
struct Spectrum {
    ComplexArray bins;             // F×D
    std::size_t origin_length = 0; // L

    std::size_t bin_count() const { return bins.shape().at(0); }
    std::size_t channels() const { return bins.shape().at(1); }

    // Throws InvariantError when F != L/2+1 or a DC/Nyquist bin carries an
    // imaginary part beyond rounding.
    void validate() const;
};

Spectrum forward_rfft(const RealArray& window);
RealArray inverse_rfft(const Spectrum& spectrum);

/// Direct O(L²) circular convolution, y[n] = Σ_m x[m] h[(n-m) mod L].
std::vector<double> circular_convolve(std::span<const double> x, std::span<const double> h);

/// Direct O(L²) evaluation of the forward DFT sum for bins 0..L/2.
std::vector<cplx> naive_rdft(std::span<const double> x);

} // namespace timeemb
