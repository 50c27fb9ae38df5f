#include "timeemb/verify.hpp"

#include "timeemb/disentangle.hpp"
#include "timeemb/model.hpp"
#include "timeemb/spectral.hpp"
#include "timeemb/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <random>

namespace timeemb {

namespace {

std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng) {
    std::normal_distribution<double> dist(0.0, 1.0);
    std::vector<double> v(n);
    for (double& x : v) x = dist(rng);
    return v;
}

RealArray column(const std::vector<double>& v) { return RealArray({v.size(), 1}, v); }

OracleResult finish(std::string property, double error, double tolerance) {
    return {std::move(property), error, tolerance, error < tolerance};
}

// Merges per-length results into one line per property.
OracleResult worst_of(const std::string& property, const std::vector<double>& errors, double tolerance) {
    return finish(property, *std::max_element(errors.begin(), errors.end()), tolerance);
}

} // namespace

std::vector<OracleResult> fft_roundtrip_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<double> errors;
    for (std::size_t l : {7u, 8u, 96u, 337u}) {
        const RealArray x({l, 3}, random_vector(3 * l, rng));
        errors.push_back(max_abs_diff(inverse_rfft(forward_rfft(x)), x));
    }
    return {worst_of("fft_roundtrip", errors, 1e-9)};
}

std::vector<OracleResult> naive_dft_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 1);
    std::vector<double> errors;
    for (std::size_t l = 2; l <= 32; ++l) {
        const auto x = random_vector(l, rng);
        const Spectrum s = forward_rfft(column(x));
        const auto ref = naive_rdft(x);
        double err = 0.0;
        for (std::size_t k = 0; k < ref.size(); ++k) {
            err = std::max(err, std::abs(cplx(s.bins.re()[k], s.bins.im()[k]) - ref[k]));
        }
        errors.push_back(err);
    }
    return {worst_of("naive_dft_agreement", errors, 1e-10)};
}

std::vector<OracleResult> parseval_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 2);
    std::vector<double> errors;
    for (std::size_t l : {7u, 8u, 16u, 96u, 337u}) {
        const auto x = random_vector(l, rng);
        const Spectrum s = forward_rfft(column(x));
        double time_energy = 0.0;
        for (double v : x) time_energy += v * v;
        double freq_energy = 0.0;
        const std::size_t f = s.bin_count();
        for (std::size_t k = 0; k < f; ++k) {
            const double p = std::norm(cplx(s.bins.re()[k], s.bins.im()[k]));
            const bool self_conjugate = k == 0 || (l % 2 == 0 && k == f - 1);
            freq_energy += self_conjugate ? p : 2.0 * p;
        }
        freq_energy /= static_cast<double>(l);
        errors.push_back(std::abs(time_energy - freq_energy) / std::max(time_energy, 1.0));
    }
    return {worst_of("parseval", errors, 1e-9)};
}

std::vector<OracleResult> convolution_theorem_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 3);
    std::vector<double> errors;
    for (std::size_t l = 4; l <= 64; ++l) {
        const auto x = random_vector(l, rng);
        const auto h = random_vector(l, rng);
        const Spectrum y = forward_rfft(column(circular_convolve(x, h)));
        const Spectrum sx = forward_rfft(column(x));
        const Spectrum sh = forward_rfft(column(h));
        double err = 0.0;
        for (std::size_t k = 0; k < y.bin_count(); ++k) {
            const cplx product = cplx(sx.bins.re()[k], sx.bins.im()[k]) * cplx(sh.bins.re()[k], sh.bins.im()[k]);
            err = std::max(err, std::abs(cplx(y.bins.re()[k], y.bins.im()[k]) - product));
        }
        errors.push_back(err);
    }
    return {worst_of("convolution_theorem", errors, 1e-9)};
}

std::vector<OracleResult> lti_equivalence_oracle(std::uint64_t seed) {
    std::mt19937_64 rng(seed + 4);
    std::vector<double> errors;
    for (std::size_t l : {8u, 15u, 16u, 96u}) {
        const std::size_t d = 3;
        const std::size_t f = l / 2 + 1;
        FrequencyFilter filter = FrequencyFilter::identity(f);
        filter.re.value = RealArray({f}, random_vector(f, rng));
        filter.im.value = RealArray({f}, random_vector(f, rng));
        filter.im.value[0] = 0.0;
        if (l % 2 == 0) filter.im.value[f - 1] = 0.0;

        const RealArray x({l, d}, random_vector(l * d, rng));
        const Spectrum sx = forward_rfft(x);
        const RealArray y = inverse_rfft(Spectrum{modulate(sx.bins, filter), l});

        // Impulse response of the filter.
        RealArray h({l, 1});
        real_fft(l).inverse(filter.re.value.values(), filter.im.value.values(), h.storage());

        double err = 0.0;
        for (std::size_t c = 0; c < d; ++c) {
            std::vector<double> xc(l);
            for (std::size_t t = 0; t < l; ++t) xc[t] = x.at(t, c);
            const auto ref = circular_convolve(xc, h.values());
            for (std::size_t t = 0; t < l; ++t) err = std::max(err, std::abs(y.at(t, c) - ref[t]));
        }
        errors.push_back(err);
    }
    return {worst_of("lti_equivalence", errors, 1e-9)};
}

std::vector<OracleResult> gradient_oracle(const VerifyOptions& options) {
    std::mt19937_64 rng(options.seed + 5);
    ModelConfig cfg;
    cfg.lookback = 16;
    cfg.horizon = 8;
    cfg.channels = 3;
    cfg.hidden = 8;
    cfg.banks = {BankSpec{4, 4}};
    TimeEmbModel model = TimeEmbModel::create(cfg, options.seed);

    // Move banks and filter off their neutral initialization so every
    // group has a non-trivial gradient.
    std::normal_distribution<double> small(0.0, 0.5);
    for (auto& b : model.banks)
        for (double& v : b.values.value.storage()) v = small(rng);
    for (double& v : model.filter.re.value.storage()) v = 1.0 + small(rng);
    for (double& v : model.filter.im.value.storage()) v = small(rng);

    const std::size_t steps = 64;
    const RealArray series({steps, cfg.channels}, random_vector(steps * cfg.channels, rng));
    std::vector<WindowIndex> ws;
    for (std::size_t start : {0u, 5u, 17u, 30u, 39u}) ws.push_back({start, start + cfg.lookback - 1});
    const Batch batch = make_batch(series, ws, cfg.lookback, cfg.horizon);

    const auto params = model.trainable();
    const ForwardFn forward = [&](Graph& g) {
        const auto pred = model.forward(g, batch);
        return combined_loss(g, pred, g.constant(to_rows(batch.y)), 0.5, FrequencyLoss::modulus);
    };
    GradCheckOptions check;
    check.step = 1e-5;
    check.scale_floor = 1e-4;
    if (options.perturb_filter_gradient) {
        check.gradient_hook = [](std::span<Parameter* const> ps) {
            for (Parameter* p : ps)
                if (p->name == "filter.re")
                    for (double& gval : p->grad.storage()) gval = gval * 1.01 + 1e-3;
        };
    }
    const auto worst = finite_difference_check(params, forward, check);

    std::vector<OracleResult> out;
    for (const Parameter* p : params) out.push_back(finish("gradient_check[" + p->name + "]", worst.at(p->name), 1e-4));
    return out;
}

std::vector<OracleResult> run_theory_oracles(const VerifyOptions& options) {
    std::vector<OracleResult> all;
    for (auto part : {fft_roundtrip_oracle(options.seed), naive_dft_oracle(options.seed),
                      parseval_oracle(options.seed), convolution_theorem_oracle(options.seed),
                      lti_equivalence_oracle(options.seed), gradient_oracle(options)}) {
        all.insert(all.end(), part.begin(), part.end());
    }
    return all;
}

bool all_passed(const std::vector<OracleResult>& results) {
    return std::all_of(results.begin(), results.end(), [](const OracleResult& r) { return r.passed; });
}

void write_report(std::ostream& os, const std::vector<OracleResult>& results) {
    for (const auto& r : results) {
        char line[256];
        std::snprintf(line, sizeof line, "%-4s %-32s max_error=%.3e tolerance=%.0e\n", r.passed ? "PASS" : "FAIL",
                      r.property.c_str(), r.max_error, r.tolerance);
        os << line;
    }
}

} // namespace timeemb
