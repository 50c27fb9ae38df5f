#include "timeemb/disentangle.hpp"

#include "timeemb/error.hpp"

#include <iomanip>
#include <ostream>

namespace timeemb {

void BankSpec::validate() const {
    if (slots == 0) throw ConfigError("bank: slot count must be at least 1");
    if (period == 0 || period % slots != 0) {
        throw ConfigError("bank: period " + std::to_string(period) + " is not a multiple of " +
                          std::to_string(slots) + " slots");
    }
}

EmbeddingBank EmbeddingBank::zeros(std::string name, BankSpec spec, std::size_t bins, std::size_t channels) {
    spec.validate();
    return EmbeddingBank{spec, Parameter(std::move(name), RealArray({spec.slots, bins, channels}))};
}

FrequencyFilter FrequencyFilter::identity(std::size_t bins) {
    return FrequencyFilter{Parameter("filter.re", RealArray({bins}, 1.0)),
                           Parameter("filter.im", RealArray({bins}, 0.0))};
}

std::size_t slot_index(std::uint64_t t_last, const BankSpec& spec) {
    return static_cast<std::size_t>((t_last % spec.period) / spec.steps_per_slot());
}

RealArray lookup_invariant(std::span<const EmbeddingBank> banks, std::uint64_t t_last) {
    if (banks.empty()) throw ConfigError("lookup_invariant: no embedding banks configured");
    const std::size_t f = banks.front().bins();
    const std::size_t d = banks.front().channels();
    RealArray out({f, d});
    for (const auto& bank : banks) {
        if (bank.bins() != f || bank.channels() != d) {
            throw ConfigError("lookup_invariant: bank " + bank.values.name + " is " +
                              shape_string(bank.values.value.shape()) + ", expected F=" +
                              std::to_string(f) + " D=" + std::to_string(d));
        }
        const double* slot = bank.values.value.data() + slot_index(t_last, bank.spec) * f * d;
        for (std::size_t i = 0; i < f * d; ++i) out[i] += slot[i];
    }
    return out;
}

ComplexArray subtract_invariant(const Spectrum& spectrum, const RealArray& invariant) {
    require_same_shape(spectrum.bins.shape(), invariant.shape(), "subtract_invariant");
    ComplexArray out = spectrum.bins;
    for (std::size_t i = 0; i < out.size(); ++i) out.re()[i] -= invariant[i];
    return out;
}

ComplexArray modulate(const ComplexArray& varying, const FrequencyFilter& filter) {
    const auto& shape = varying.shape();
    if (shape.size() != 2 || filter.bins() != shape[0] || filter.im.value.size() != shape[0]) {
        throw DimensionError("modulate: filter of " + std::to_string(filter.bins()) +
                             " bins vs component " + shape_string(shape));
    }
    const std::size_t f = shape[0];
    const std::size_t d = shape[1];
    ComplexArray out(shape);
    for (std::size_t k = 0; k < f; ++k) {
        const double wr = filter.re.value[k];
        const double wi = filter.im.value[k];
        for (std::size_t c = 0; c < d; ++c) {
            const double zr = varying.re().at(k, c);
            const double zi = varying.im().at(k, c);
            out.re().at(k, c) = zr * wr - zi * wi;
            out.im().at(k, c) = zr * wi + zi * wr;
        }
    }
    return out;
}

Spectrum recombine(const ComplexArray& filtered, const RealArray& invariant, std::size_t origin_length) {
    require_same_shape(filtered.shape(), invariant.shape(), "recombine");
    Spectrum out{filtered, origin_length};
    for (std::size_t i = 0; i < invariant.size(); ++i) out.bins.re()[i] += invariant[i];
    out.validate();
    return out;
}

void write_bank_csv(std::ostream& os, std::span<const EmbeddingBank> banks) {
    os << "bank,slot,bin,channel,value\n";
    os << std::setprecision(17);
    for (std::size_t b = 0; b < banks.size(); ++b) {
        const RealArray& v = banks[b].values.value;
        const std::size_t f = v.dim(1);
        const std::size_t d = v.dim(2);
        for (std::size_t m = 0; m < v.dim(0); ++m)
            for (std::size_t k = 0; k < f; ++k)
                for (std::size_t c = 0; c < d; ++c)
                    os << b << ',' << m << ',' << k << ',' << c << ',' << v[(m * f + k) * d + c] << '\n';
    }
}

void write_filter_csv(std::ostream& os, const FrequencyFilter& filter) {
    os << "bin,re,im\n" << std::setprecision(17);
    for (std::size_t k = 0; k < filter.bins(); ++k) {
        os << k << ',' << filter.re.value[k] << ',' << filter.im.value[k] << '\n';
    }
}

void write_component_header(std::ostream& os) { os << "window,bin,channel,re,im\n"; }

void write_component_rows(std::ostream& os, std::size_t window, const ComplexArray& component) {
    os << std::setprecision(17);
    const std::size_t f = component.shape().at(0);
    const std::size_t d = component.shape().at(1);
    for (std::size_t k = 0; k < f; ++k)
        for (std::size_t c = 0; c < d; ++c)
            os << window << ',' << k << ',' << c << ',' << component.re().at(k, c) << ','
               << component.im().at(k, c) << '\n';
}

void write_component_rows(std::ostream& os, std::size_t window, const RealArray& real_component) {
    write_component_rows(os, window, ComplexArray(real_component, RealArray(real_component.shape())));
}

} // namespace timeemb
