#include "timeemb/spectral.hpp"

#include "timeemb/error.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

namespace timeemb {

namespace {

constexpr std::size_t kMaxDirectRadix = 13;

// e^{-j2πk/n} with exact values on the axes.
cplx unit_root(std::size_t k, std::size_t n) {
    k %= n;
    if (k == 0) return {1.0, 0.0};
    if (4 * k == n) return {0.0, -1.0};
    if (2 * k == n) return {-1.0, 0.0};
    if (4 * k == 3 * n) return {0.0, 1.0};
    const double angle = -2.0 * std::numbers::pi * static_cast<double>(k) / static_cast<double>(n);
    return {std::cos(angle), std::sin(angle)};
}

std::vector<std::size_t> factorize(std::size_t n, bool& ok) {
    std::vector<std::size_t> factors;
    ok = true;
    while (n % 4 == 0) {
        factors.push_back(4);
        n /= 4;
    }
    for (std::size_t p = 2; p <= kMaxDirectRadix && n > 1; ++p) {
        while (n % p == 0) {
            factors.push_back(p);
            n /= p;
        }
    }
    if (n > 1) ok = false;
    return factors;
}

} // namespace

struct FftPlan::Bluestein {
    std::size_t m = 0;
    std::vector<cplx> chirp;       // e^{-jπk²/n}
    std::vector<cplx> kernel_fft;  // FFT_m of the conjugate chirp, wrapped
    std::unique_ptr<FftPlan> inner;
    std::vector<cplx> work;
};

FftPlan::FftPlan(std::size_t n) : n_(n) {
    if (n == 0) throw DimensionError("FftPlan: length must be positive");
    bool direct = false;
    factors_ = factorize(n, direct);
    if (direct) {
        twiddle_.resize(n);
        for (std::size_t k = 0; k < n; ++k) twiddle_[k] = unit_root(k, n);
        scratch_.resize(n);
        return;
    }

    auto bs = std::make_unique<Bluestein>();
    std::size_t m = 1;
    while (m < 2 * n - 1) m <<= 1;
    bs->m = m;
    bs->chirp.resize(n);
    const std::size_t two_n = 2 * n;
    for (std::size_t k = 0; k < n; ++k) {
        // k² mod 2n keeps the chirp argument small and exact.
        const std::size_t k2 = (k * k) % two_n;
        bs->chirp[k] = unit_root(k2, two_n);
    }
    bs->inner = std::make_unique<FftPlan>(m);
    bs->kernel_fft.assign(m, cplx{});
    bs->kernel_fft[0] = std::conj(bs->chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        bs->kernel_fft[k] = std::conj(bs->chirp[k]);
        bs->kernel_fft[m - k] = std::conj(bs->chirp[k]);
    }
    bs->inner->forward(bs->kernel_fft);
    bs->work.resize(m);
    bluestein_ = std::move(bs);
}

FftPlan::~FftPlan() = default;
FftPlan::FftPlan(FftPlan&&) noexcept = default;
FftPlan& FftPlan::operator=(FftPlan&&) noexcept = default;

void FftPlan::forward(std::span<cplx> data) const { transform(data, false); }

void FftPlan::backward(std::span<cplx> data) const { transform(data, true); }

void FftPlan::transform(std::span<cplx> data, bool inverse) const {
    if (data.size() != n_) {
        throw DimensionError("FftPlan: expected " + std::to_string(n_) + " points, got " +
                             std::to_string(data.size()));
    }
    if (n_ == 1) return;
    if (inverse) {
        for (auto& v : data) v = std::conj(v);
    }
    if (bluestein_) {
        auto& bs = *bluestein_;
        std::fill(bs.work.begin(), bs.work.end(), cplx{});
        for (std::size_t k = 0; k < n_; ++k) bs.work[k] = data[k] * bs.chirp[k];
        bs.inner->forward(bs.work);
        for (std::size_t k = 0; k < bs.m; ++k) bs.work[k] *= bs.kernel_fft[k];
        bs.inner->backward(bs.work);
        const double scale = 1.0 / static_cast<double>(bs.m);
        for (std::size_t k = 0; k < n_; ++k) data[k] = bs.work[k] * bs.chirp[k] * scale;
    } else {
        recurse(data.data(), scratch_.data(), n_, 1, 0, false);
        std::copy(scratch_.begin(), scratch_.end(), data.begin());
    }
    if (inverse) {
        for (auto& v : data) v = std::conj(v);
    }
}

void FftPlan::recurse(const cplx* in, cplx* out, std::size_t n, std::size_t stride,
                      std::size_t factor_idx, bool inverse) const {
    if (n == 1) {
        out[0] = in[0];
        return;
    }
    const std::size_t p = factors_[factor_idx];
    const std::size_t m = n / p;
    for (std::size_t r = 0; r < p; ++r) {
        recurse(in + r * stride, out + r * m, m, stride * p, factor_idx + 1, inverse);
    }

    const std::size_t step = n_ / n;  // W_n^j == twiddle_[j * step]
    cplx t[kMaxDirectRadix];
    for (std::size_t k = 0; k < m; ++k) {
        t[0] = out[k];
        for (std::size_t r = 1; r < p; ++r) t[r] = out[r * m + k] * twiddle_[(r * k) * step];
        if (p == 2) {
            out[k] = t[0] + t[1];
            out[k + m] = t[0] - t[1];
        } else if (p == 4) {
            const cplx a = t[0] + t[2];
            const cplx b = t[0] - t[2];
            const cplx c = t[1] + t[3];
            const cplx d = t[1] - t[3];
            const cplx d_rot{d.imag(), -d.real()};  // -j·d
            out[k] = a + c;
            out[k + m] = b + d_rot;
            out[k + 2 * m] = a - c;
            out[k + 3 * m] = b - d_rot;
        } else {
            for (std::size_t q = 0; q < p; ++q) {
                cplx acc = t[0];
                for (std::size_t r = 1; r < p; ++r) {
                    acc += t[r] * twiddle_[((r * q) % p) * m * step];
                }
                out[k + q * m] = acc;
            }
        }
    }
}

RealFft::RealFft(std::size_t length) : length_(length), plan_(length), buffer_(length) {
    if (length < 2) throw DimensionError("RealFft: length must be at least 2");
}

void RealFft::forward(std::span<const double> x, std::span<double> re, std::span<double> im) const {
    const std::size_t f = bins();
    if (x.size() != length_ || re.size() != f || im.size() != f) {
        throw DimensionError("RealFft::forward: size mismatch");
    }
    for (std::size_t n = 0; n < length_; ++n) buffer_[n] = cplx(x[n], 0.0);
    plan_.forward(buffer_);
    for (std::size_t k = 0; k < f; ++k) {
        re[k] = buffer_[k].real();
        im[k] = buffer_[k].imag();
    }
    im[0] = 0.0;
    if (has_nyquist()) im[f - 1] = 0.0;
}

void RealFft::inverse(std::span<const double> re, std::span<const double> im, std::span<double> x) const {
    const std::size_t f = bins();
    if (x.size() != length_ || re.size() != f || im.size() != f) {
        throw DimensionError("RealFft::inverse: size mismatch");
    }
    for (std::size_t k = 0; k < f; ++k) buffer_[k] = cplx(re[k], im[k]);
    buffer_[0] = cplx(re[0], 0.0);
    if (has_nyquist()) buffer_[f - 1] = cplx(re[f - 1], 0.0);
    for (std::size_t k = f; k < length_; ++k) buffer_[k] = std::conj(buffer_[length_ - k]);
    plan_.backward(buffer_);
    const double scale = 1.0 / static_cast<double>(length_);
    for (std::size_t n = 0; n < length_; ++n) x[n] = buffer_[n].real() * scale;
}

const RealFft& real_fft(std::size_t length) {
    thread_local std::map<std::size_t, std::unique_ptr<RealFft>> cache;
    auto& slot = cache[length];
    if (!slot) slot = std::make_unique<RealFft>(length);
    return *slot;
}

void Spectrum::validate() const {
    const auto& shape = bins.shape();
    if (shape.size() != 2) throw InvariantError("Spectrum: bins must be F×D");
    const std::size_t f = shape[0];
    if (origin_length < 2 || f != origin_length / 2 + 1) {
        throw InvariantError("Spectrum: " + std::to_string(f) + " bins inconsistent with length " +
                             std::to_string(origin_length));
    }
    const std::size_t d = shape[1];
    double scale = 1.0;
    for (std::size_t i = 0; i < bins.size(); ++i) {
        scale = std::max({scale, std::abs(bins.re()[i]), std::abs(bins.im()[i])});
    }
    const double tol = 1e-9 * scale;
    auto check_row = [&](std::size_t k, const char* name) {
        for (std::size_t c = 0; c < d; ++c) {
            if (std::abs(bins.im().at(k, c)) > tol) {
                throw InvariantError(std::string("Spectrum: ") + name + " bin of channel " +
                                     std::to_string(c) + " has imaginary part " +
                                     std::to_string(bins.im().at(k, c)));
            }
        }
    };
    check_row(0, "DC");
    if (origin_length % 2 == 0) check_row(f - 1, "Nyquist");
}

Spectrum forward_rfft(const RealArray& window) {
    if (window.rank() != 2) throw DimensionError("forward_rfft: window must be L×D");
    const std::size_t length = window.dim(0);
    const std::size_t channels = window.dim(1);
    if (length < 2) throw DimensionError("forward_rfft: window length must be at least 2");

    const auto& fft = real_fft(length);
    const std::size_t f = fft.bins();
    Spectrum out{ComplexArray({f, channels}), length};
    std::vector<double> column(length), re(f), im(f);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t n = 0; n < length; ++n) column[n] = window.at(n, c);
        fft.forward(column, re, im);
        for (std::size_t k = 0; k < f; ++k) {
            out.bins.re().at(k, c) = re[k];
            out.bins.im().at(k, c) = im[k];
        }
    }
    return out;
}

RealArray inverse_rfft(const Spectrum& spectrum) {
    spectrum.validate();
    const std::size_t length = spectrum.origin_length;
    const std::size_t f = spectrum.bin_count();
    const std::size_t channels = spectrum.channels();
    const auto& fft = real_fft(length);

    RealArray out({length, channels});
    std::vector<double> column(length), re(f), im(f);
    for (std::size_t c = 0; c < channels; ++c) {
        for (std::size_t k = 0; k < f; ++k) {
            re[k] = spectrum.bins.re().at(k, c);
            im[k] = spectrum.bins.im().at(k, c);
        }
        fft.inverse(re, im, column);
        for (std::size_t n = 0; n < length; ++n) out.at(n, c) = column[n];
    }
    return out;
}

std::vector<double> circular_convolve(std::span<const double> x, std::span<const double> h) {
    if (x.size() != h.size()) {
        throw DimensionError("circular_convolve: lengths " + std::to_string(x.size()) + " and " +
                             std::to_string(h.size()) + " differ");
    }
    const std::size_t n = x.size();
    std::vector<double> y(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t m = 0; m < n; ++m) acc += x[m] * h[(i + n - m) % n];
        y[i] = acc;
    }
    return y;
}

std::vector<cplx> naive_rdft(std::span<const double> x) {
    const std::size_t n = x.size();
    std::vector<cplx> out(n / 2 + 1);
    for (std::size_t k = 0; k < out.size(); ++k) {
        cplx acc{};
        for (std::size_t t = 0; t < n; ++t) {
            // Reduce k·t mod n before converting to an angle.
            const double angle = -2.0 * std::numbers::pi * static_cast<double>((k * t) % n) /
                                 static_cast<double>(n);
            acc += x[t] * cplx(std::cos(angle), std::sin(angle));
        }
        out[k] = acc;
    }
    return out;
}

} // namespace timeemb
