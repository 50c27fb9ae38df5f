#include "pattern.hpp"

#include "timeemb/error.hpp"
#include "timeemb/spectral.hpp"

#include <doctest.h>

#include <vector>

using namespace timeemb;
using timeemb::test::gaussian;
using timeemb::test::pattern;

namespace {

Spectrum spectrum_of(const RealArray& column) { return forward_rfft(column); }

} // namespace

TEST_CASE("rfft matches reference values for odd and even lengths") {
    const Spectrum odd = spectrum_of(pattern({5, 1}, 0.1));
    const std::vector<double> odd_re{3.2329364700488821, -0.81057130249504505, -0.55631339091232546};
    const std::vector<double> odd_im{0, 0.63254682625332892, 0.13993447455298838};
    REQUIRE(odd.bin_count() == 3);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(odd.bins.re()[k] == doctest::Approx(odd_re[k]).epsilon(1e-13));
        CHECK(odd.bins.im()[k] == doctest::Approx(odd_im[k]).epsilon(1e-13));
    }

    const Spectrum even = spectrum_of(pattern({8, 1}, 0.2));
    const std::vector<double> even_re{5.3984246709159205, -1.480929313699058, -0.27542676869117777,
                                      -0.10981842910697159, -0.076721001561016688};
    const std::vector<double> even_im{0, -0.34076740697188168, -0.11641599849622053, -0.046813608720054689, 0};
    REQUIRE(even.bin_count() == 5);
    for (std::size_t k = 0; k < 5; ++k) {
        CHECK(even.bins.re()[k] == doctest::Approx(even_re[k]).epsilon(1e-13));
        CHECK(even.bins.im()[k] == doctest::Approx(even_im[k]).epsilon(1e-13));
    }
}

TEST_CASE("DC and Nyquist imaginary parts are exact zeros") {
    for (std::size_t l : {2u, 6u, 96u, 100u}) {
        const Spectrum s = forward_rfft(gaussian({l, 3}, l));
        for (std::size_t c = 0; c < 3; ++c) {
            CHECK(s.bins.im().at(0, c) == 0.0);
            CHECK(s.bins.im().at(s.bin_count() - 1, c) == 0.0);
        }
    }
}

TEST_CASE("roundtrip recovers the input for many lengths") {
    for (std::size_t l = 2; l <= 130; ++l) {
        const RealArray x = gaussian({l, 2}, 100 + l);
        CHECK(max_abs_diff(inverse_rfft(forward_rfft(x)), x) < 1e-11);
    }
    for (std::size_t l : {337u, 509u, 720u, 1009u}) {
        const RealArray x = gaussian({l, 1}, l);
        CHECK(max_abs_diff(inverse_rfft(forward_rfft(x)), x) < 1e-10);
    }
}

TEST_CASE("plans agree with the direct DFT sum on prime and composite lengths") {
    for (std::size_t l : {3u, 13u, 17u, 31u, 53u, 97u, 120u, 337u}) {
        const RealArray x = gaussian({l, 1}, 7 * l);
        const Spectrum s = forward_rfft(x);
        const auto ref = naive_rdft(x.values());
        double err = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k)
            err = std::max(err, std::abs(cplx(s.bins.re()[k], s.bins.im()[k]) - ref[k]));
        CHECK(err < 1e-9 * static_cast<double>(l));
    }
}

TEST_CASE("FftPlan selects Bluestein only for large prime factors") {
    CHECK_FALSE(FftPlan(96).uses_bluestein());
    CHECK_FALSE(FftPlan(13 * 11).uses_bluestein());
    CHECK(FftPlan(337).uses_bluestein());
    CHECK(FftPlan(2 * 17).uses_bluestein());
}

TEST_CASE("forward and backward complex transforms are unnormalized inverses") {
    const std::size_t n = 12;
    std::vector<cplx> data(n), original(n);
    for (std::size_t i = 0; i < n; ++i) data[i] = original[i] = cplx(std::sin(i * 0.7), std::cos(i * 1.3));
    const FftPlan plan(n);
    plan.forward(data);
    plan.backward(data);
    for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(data[i] / static_cast<double>(n) - original[i]) < 1e-13);
}

TEST_CASE("circular convolution matches reference values") {
    const RealArray a = pattern({6}, 0.3);
    const RealArray b = pattern({6}, 1.1);
    const auto y = circular_convolve(a.values(), b.values());
    const std::vector<double> expected{3.4087137959644465, 3.1291625862444183, 3.0518523371765873,
                                       3.2054823475855341, 3.500333647606138,  3.7497408333423508};
    for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == doctest::Approx(expected[i]).epsilon(1e-13));
}

TEST_CASE("circular convolution with a delta is the identity") {
    const RealArray x = gaussian({9}, 3);
    std::vector<double> delta(9, 0.0);
    delta[0] = 1.0;
    const auto y = circular_convolve(x.values(), delta);
    for (std::size_t i = 0; i < 9; ++i) CHECK(y[i] == x[i]);
}

TEST_CASE("spectral error paths") {
    CHECK_THROWS_AS(forward_rfft(RealArray({1, 2})), DimensionError);
    std::vector<double> a(4), b(5);
    CHECK_THROWS_AS(circular_convolve(a, b), DimensionError);

    Spectrum bad = forward_rfft(gaussian({8, 1}, 1));
    bad.bins.im()[0] = 0.5;
    CHECK_THROWS_AS(bad.validate(), InvariantError);
    CHECK_THROWS_AS(inverse_rfft(bad), InvariantError);

    Spectrum wrong_bins{ComplexArray(Shape{4, 1}), 8};
    CHECK_THROWS_AS(wrong_bins.validate(), InvariantError);
}

TEST_CASE("rfft is linear") {
    const RealArray x = gaussian({32, 2}, 11);
    const RealArray y = gaussian({32, 2}, 12);
    RealArray z(x.shape());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = 2.5 * x[i] - y[i];
    const Spectrum sx = forward_rfft(x), sy = forward_rfft(y), sz = forward_rfft(z);
    for (std::size_t i = 0; i < sz.bins.size(); ++i) {
        CHECK(std::abs(sz.bins.re()[i] - (2.5 * sx.bins.re()[i] - sy.bins.re()[i])) < 1e-12);
        CHECK(std::abs(sz.bins.im()[i] - (2.5 * sx.bins.im()[i] - sy.bins.im()[i])) < 1e-12);
    }
}
