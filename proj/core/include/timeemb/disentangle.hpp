#pragma once

#include "timeemb/array.hpp"
#include "timeemb/autodiff.hpp"
#include "timeemb/spectral.hpp"

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace timeemb {

/// Slot layout of an embedding bank: `slots` embeddings tiling a cycle of
/// `period` dataset steps, each covering period/slots consecutive steps.
/// period == slots reproduces plain `t_last mod M` indexing.
struct BankSpec {
    std::size_t slots = 24;
    std::size_t period = 24;

    std::size_t steps_per_slot() const { return period / slots; }
    void validate() const;
    friend bool operator==(const BankSpec&, const BankSpec&) = default;
};

/// Learnable time-invariant spectra, values shaped M×F×D.
struct EmbeddingBank {
    BankSpec spec;
    Parameter values;

    static EmbeddingBank zeros(std::string name, BankSpec spec, std::size_t bins, std::size_t channels);
    std::size_t bins() const { return values.value.dim(1); }
    std::size_t channels() const { return values.value.dim(2); }
};

/// Complex per-bin gain shared across channels.
struct FrequencyFilter {
    Parameter re;
    Parameter im;

    // re = 1, im = 0.
    static FrequencyFilter identity(std::size_t bins);
    std::size_t bins() const { return re.value.size(); }
};

std::size_t slot_index(std::uint64_t t_last, const BankSpec& spec);

/// Sum over banks of bank.values[slot_index(t_last, bank)], shaped F×D.
RealArray lookup_invariant(std::span<const EmbeddingBank> banks, std::uint64_t t_last);

/// Removes X_s from the real part; the imaginary part is untouched.
ComplexArray subtract_invariant(const Spectrum& spectrum, const RealArray& invariant);

/// Per-bin complex product with the filter, broadcast over channels.
ComplexArray modulate(const ComplexArray& varying, const FrequencyFilter& filter);

/// Adds X_s back onto the real part and re-validates the spectrum.
Spectrum recombine(const ComplexArray& filtered, const RealArray& invariant, std::size_t origin_length);

// CSV exports for external visualization.
void write_bank_csv(std::ostream& os, std::span<const EmbeddingBank> banks);
void write_filter_csv(std::ostream& os, const FrequencyFilter& filter);
void write_component_header(std::ostream& os);
// Rows (window, bin, channel, re, im) for an F×D component.
void write_component_rows(std::ostream& os, std::size_t window, const ComplexArray& component);
void write_component_rows(std::ostream& os, std::size_t window, const RealArray& real_component);

} // namespace timeemb
